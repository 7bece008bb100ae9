#include "nrc/baseline.hpp"

#include <cmath>
#include <numeric>

#include "nrc/error.hpp"

namespace nrc::baseline {

using simenc::FrameType;

void BaselineConfig::validate() const {
    require(boost_key >= 1.0 && boost_alt_ref >= 1.0, "KEY/ALT_REF boosts must be >= 1");
    require(boost_inter == 1.0, "INTER boost is fixed at 1");
    require(max_search_iterations >= 1, "max_search_iterations must be >= 1");
}

double BaselineConfig::boost(FrameType type) const {
    switch (type) {
        case FrameType::Key: return boost_key;
        case FrameType::AltRefHidden: return boost_alt_ref;
        case FrameType::Inter: return boost_inter;
    }
    return 1.0;
}

std::vector<double> allocate_targets(std::span<const double> weights,
                                     std::span<const FrameType> types, double total_budget_bits,
                                     const BaselineConfig& config) {
    config.validate();
    require(weights.size() == types.size(), "weights/types length mismatch");
    require(total_budget_bits > 0.0, "total bit budget must be positive");
    std::vector<double> scaled(weights.size());
    for (std::size_t i = 0; i < weights.size(); ++i) {
        require(weights[i] >= 0.0 && std::isfinite(weights[i]), "frame weights must be finite and >= 0");
        scaled[i] = weights[i] * config.boost(types[i]);
    }
    const double total = std::accumulate(scaled.begin(), scaled.end(), 0.0);
    if (!(total > 0.0)) fail(ErrorKind::InvalidArgument, "zero total frame weight");
    for (double& s : scaled) s = s / total * total_budget_bits;
    for (double s : scaled)
        if (!(s > 0.0)) fail(ErrorKind::InvalidArgument, "frame with zero weight gets no bits");
    return scaled;
}

std::vector<double> allocate_frame_targets(const simenc::SyntheticVideo& video,
                                           const simenc::GopPlan& gop, double target_kbps,
                                           const BaselineConfig& config) {
    std::vector<double> weights;
    weights.reserve(video.first_pass.size());
    for (const auto& fp : video.first_pass) weights.push_back(fp[simenc::FirstPassField::FrameWeight]);
    return allocate_targets(weights, gop.types, target_kbps * 1000.0 * video.duration(), config);
}

int qp_for_target_bits(const simenc::SyntheticVideo& video, const simenc::GopPlan& gop,
                       const simenc::EncodeState& state, double target_bits,
                       const BaselineConfig& config, const simenc::RdModel& model) {
    require(target_bits > 0.0, "target bits must be positive");
    auto bits = [&](int qp) { return simenc::evaluate_frame(video, gop, state, qp, model).bits; };

    // Largest qp in [lo, 255] whose bits are >= value; bits(lo) >= value holds.
    auto last_at_least = [&](int lo, double value) {
        int hi = simenc::kMaxQp;
        if (bits(hi) >= value) return hi;
        int iter = 0;
        while (hi - lo > 1 && iter++ < config.max_search_iterations) {
            const int mid = lo + (hi - lo) / 2;
            if (bits(mid) >= value) lo = mid;
            else hi = mid;
        }
        return lo;
    };

    const double top = bits(simenc::kMinQp);
    if (top < target_bits) return last_at_least(simenc::kMinQp, top);

    const int q1 = last_at_least(simenc::kMinQp, target_bits);
    if (q1 == simenc::kMaxQp) return q1;
    const double b1 = bits(q1);
    const double b2 = bits(q1 + 1);
    const int q2 = last_at_least(q1 + 1, b2);
    return (target_bits - b2 <= b1 - target_bits) ? q2 : q1;
}

BaselinePolicy::BaselinePolicy(const simenc::SyntheticVideo& video, const simenc::GopPlan& gop,
                               double target_kbps, BaselineConfig config, simenc::RdModel model)
    : video_(&video),
      gop_(&gop),
      config_(config),
      model_(model),
      targets_(allocate_frame_targets(video, gop, target_kbps, config)),
      budget_bits_(target_kbps * 1000.0 * video.duration()) {}

int BaselinePolicy::operator()(const simenc::Observation& obs) {
    const int t = shadow_.cursor;
    if (obs.step.frame_index != t)
        fail(ErrorKind::InvalidArgument, "baseline policy observed an out-of-order frame");
    double target = targets_[static_cast<std::size_t>(t)];
    if (config_.recompute_budget) {
        const double remaining = budget_bits_ - shadow_.cumulative_bits;
        const double planned = std::accumulate(targets_.begin() + t, targets_.end(), 0.0);
        // An exhausted budget asks for the coarsest quantizer.
        target = remaining > 0.0 ? target * remaining / planned : 1.0;
    }
    const int qp = qp_for_target_bits(*video_, *gop_, shadow_, target, config_, model_);
    shadow_ = simenc::encode_frame(*video_, *gop_, std::move(shadow_), qp, model_).next;
    return qp;
}

simenc::EpisodeTrace run_baseline(const simenc::SyntheticVideo& video, const simenc::GopPlan& gop,
                                  double target_kbps, const BaselineConfig& config, double lambda,
                                  const simenc::RdModel& model) {
    BaselinePolicy policy(video, gop, target_kbps, config, model);
    return simenc::run_episode(
        video, gop, target_kbps, [&policy](const simenc::Observation& o) { return policy(o); },
        lambda, model);
}

}  // namespace nrc::baseline
