#pragma once

// Small deterministic datasets for tests: baseline solutions stand in for ES
// labels so fixtures build in milliseconds.

#include <vector>

#include "nrc/baseline.hpp"
#include "nrc/teacher.hpp"

namespace nrc::testing {

inline simenc::VideoConfig short_videos(int frames = 24) {
    simenc::VideoConfig c;
    c.min_frames = frames;
    c.max_frames = frames;
    return c;
}

inline std::vector<simenc::SyntheticVideo> small_corpus(int count, int frames, std::uint64_t seed = 1) {
    std::vector<simenc::SyntheticVideo> out;
    for (int i = 0; i < count; ++i)
        out.push_back(simenc::generate_video(seed * 1000 + static_cast<std::uint64_t>(i),
                                             short_videos(frames), "v" + std::to_string(i)));
    return out;
}

inline std::vector<teacher::TeacherRecord> baseline_records(const std::vector<simenc::SyntheticVideo>& videos,
                                                            const std::vector<double>& targets) {
    std::vector<teacher::TeacherRecord> out;
    for (const auto& v : videos) {
        const auto g = simenc::plan_gop(v);
        for (double kbps : targets)
            out.push_back(teacher::make_record(v, g, baseline::run_baseline(v, g, kbps),
                                               teacher::Provenance::Es));
    }
    return out;
}

}  // namespace nrc::testing
