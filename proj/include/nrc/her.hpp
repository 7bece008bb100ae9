#pragma once

// Hindsight relabeling: roll the trained policy out, then rewrite each
// episode's target bitrate to the bitrate it actually achieved.

#include <cstdint>
#include <utility>
#include <vector>

#include "nrc/network.hpp"
#include "nrc/teacher.hpp"
#include "nrc/trainer.hpp"

namespace nrc::policy {

struct HerConfig {
    std::uint64_t seed = 0;
    int gop_interval = simenc::kDefaultGopInterval;
    int workers = 1;
};

/// Truncated-sampling rollouts (no feedback control) on each (video index,
/// target) task; records carry target = achieved bitrate, provenance HER.
std::vector<teacher::TeacherRecord> her_relabel(const PolicyModel& model,
                                                const std::vector<simenc::SyntheticVideo>& videos,
                                                const std::vector<std::pair<std::size_t, double>>& tasks,
                                                const HerConfig& config = {});

/// Retrains from scratch on the union of the teacher records and their HER
/// relabels; returns the new training result.
TrainResult her_refine(const PolicyModel& model, const std::vector<teacher::TeacherRecord>& teacher_records,
                       const std::vector<simenc::SyntheticVideo>& videos, const TrainConfig& train_config,
                       const NetworkConfig& network, const HerConfig& config = {});

}  // namespace nrc::policy
