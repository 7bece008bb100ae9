#pragma once

// Two-pass VBR heuristic: per-frame bit targets from first-pass weights, each
// realized by a binary search over QP against trial encodes.

#include <span>
#include <vector>

#include "nrc/simenc.hpp"

namespace nrc::baseline {

struct BaselineConfig {
    double boost_key = 4.0;
    double boost_alt_ref = 3.0;
    double boost_inter = 1.0;
    /// Rescale the remaining targets to the remaining budget before each frame.
    bool recompute_budget = true;
    /// Cap on bisection rounds; 9 covers the 256-value QP range.
    int max_search_iterations = 16;

    void validate() const;
    double boost(simenc::FrameType type) const;
};

/// Splits `total_budget_bits` proportionally to weight x type boost.
std::vector<double> allocate_targets(std::span<const double> weights,
                                     std::span<const simenc::FrameType> types,
                                     double total_budget_bits, const BaselineConfig& config = {});

/// Frame weights come from the first-pass frame_weight feature.
std::vector<double> allocate_frame_targets(const simenc::SyntheticVideo& video,
                                           const simenc::GopPlan& gop, double target_kbps,
                                           const BaselineConfig& config = {});

/// QP whose trial-encoded bits are closest to `target_bits`, ties toward the
/// higher QP. Found by bisection on the monotone bits(qp) curve.
int qp_for_target_bits(const simenc::SyntheticVideo& video, const simenc::GopPlan& gop,
                       const simenc::EncodeState& state, double target_bits,
                       const BaselineConfig& config = {}, const simenc::RdModel& model = {});

/// Stateful policy callback. It mirrors the encoder by committing each QP it
/// emits, so it can run trial encodes against the exact reference state.
class BaselinePolicy {
public:
    BaselinePolicy(const simenc::SyntheticVideo& video, const simenc::GopPlan& gop,
                   double target_kbps, BaselineConfig config = {}, simenc::RdModel model = {});

    int operator()(const simenc::Observation& obs);

private:
    const simenc::SyntheticVideo* video_;
    const simenc::GopPlan* gop_;
    BaselineConfig config_;
    simenc::RdModel model_;
    std::vector<double> targets_;
    double budget_bits_;
    simenc::EncodeState shadow_;
};

simenc::EpisodeTrace run_baseline(const simenc::SyntheticVideo& video, const simenc::GopPlan& gop,
                                  double target_kbps, const BaselineConfig& config = {},
                                  double lambda = simenc::kDefaultLambda,
                                  const simenc::RdModel& model = {});

}  // namespace nrc::baseline
