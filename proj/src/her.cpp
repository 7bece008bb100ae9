#include "nrc/her.hpp"

#include <map>

#include "nrc/error.hpp"
#include "nrc/inference.hpp"

namespace nrc::policy {

std::vector<teacher::TeacherRecord> her_relabel(const PolicyModel& model,
                                                const std::vector<simenc::SyntheticVideo>& videos,
                                                const std::vector<std::pair<std::size_t, double>>& tasks,
                                                const HerConfig& config) {
    const auto traces = inference::rollout_suite(model, videos, tasks, config.seed,
                                                 inference::SampleMode::Truncated, nullptr, {},
                                                 config.gop_interval, config.workers);
    std::vector<teacher::TeacherRecord> out;
    out.reserve(traces.size());
    for (std::size_t i = 0; i < traces.size(); ++i) {
        const auto& video = videos.at(tasks[i].first);
        const auto gop = simenc::plan_gop(video, config.gop_interval);
        // Re-encoding at the achieved rate regenerates the budget-relative inputs.
        const auto relabeled = simenc::replay_qps(video, gop, traces[i].bitrate_kbps, traces[i].qps);
        if (relabeled.bits != traces[i].bits) fail(ErrorKind::ReplayMismatch, "HER replay diverged for " + video.video_id);
        out.push_back(teacher::make_record(video, gop, relabeled, teacher::Provenance::Her));
    }
    return out;
}

TrainResult her_refine(const PolicyModel& model, const std::vector<teacher::TeacherRecord>& teacher_records,
                       const std::vector<simenc::SyntheticVideo>& videos, const TrainConfig& train_config,
                       const NetworkConfig& network, const HerConfig& config) {
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < videos.size(); ++i) index.emplace(videos[i].video_id, i);
    std::vector<std::pair<std::size_t, double>> tasks;
    for (const auto& r : teacher_records) {
        if (r.provenance != teacher::Provenance::Es) continue;
        const auto it = index.find(r.video_id);
        if (it == index.end()) fail(ErrorKind::MissingInput, "no video for teacher record " + r.video_id);
        tasks.emplace_back(it->second, r.target_kbps);
    }
    std::vector<teacher::TeacherRecord> all = teacher_records;
    for (auto& r : her_relabel(model, videos, tasks, config)) all.push_back(std::move(r));
    return train(all, train_config, network);
}

}  // namespace nrc::policy
