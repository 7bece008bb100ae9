#pragma once

// Inference-time wrappers around a trained policy: top-k truncated sampling,
// cumulative-bitrate envelope bounds, and index-offset feedback control.

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "nrc/io.hpp"
#include "nrc/network.hpp"
#include "nrc/rng.hpp"
#include "nrc/simenc.hpp"

namespace nrc::inference {

inline constexpr int kSamplePool = 15;
inline constexpr int kCandidatePool = 40;
inline constexpr std::string_view kBoundsSchema = "bounds.v1";

/// Indices of the k largest logits, by descending logit; ties go to the lower QP.
std::vector<int> top_k(const Eigen::RowVectorXd& logits, int k);

struct TruncatedDistribution {
    std::vector<int> qps;       ///< descending logit order
    std::vector<double> probs;  ///< softmax over the kept logits
};

/// Throws InvalidArgument for non-finite logits or a width other than 256.
TruncatedDistribution truncated_distribution(const Eigen::RowVectorXd& logits, int k = kSamplePool);

/// Samples from the top-15 renormalized softmax; one uniform draw per call.
int truncated_sample(const Eigen::RowVectorXd& logits, Rng& rng);

/// Top-40 logit QPs sorted ascending by QP value.
std::vector<int> sorted_candidates(const Eigen::RowVectorXd& logits, int pool = kCandidatePool);

struct FeedbackConfig {
    /// Index offset per kbps of bound violation.
    double alpha = 0.05;
    int candidates = kCandidatePool;
    int sample_pool = kSamplePool;

    void validate() const;
};

/// Maps the 1-based candidate index i to j: unchanged inside [lower, upper],
/// shifted toward lower QPs below and higher QPs above, clamped to [1, pool].
int feedback_adjust(int i, double b_t, double lower, double upper, double alpha,
                    int pool = kCandidatePool);

// ---------------------------------------------------------------------------
// Envelope bounds

/// a1 log(a2 x + a3) + a4 x + a5 over normalized position x in [0, 1].
struct LogBound {
    double a1 = 0.0, a2 = 1.0, a3 = 1.0, a4 = 0.0, a5 = 0.0;
    double operator()(double x) const;
};

struct BoundsConfig {
    double quantile_lo = 0.025;
    double quantile_hi = 0.975;
    /// Bound values at the end lie within this fraction of the target.
    double end_gap = 0.05;
    int min_traces = 20;
    int grid_points = 101;

    void validate() const;
};

struct BoundsModel {
    LogBound lower;
    LogBound upper;
    double target_kbps = 0.0;
    double quantile_lo = 0.025;
    double quantile_hi = 0.975;
    std::string fit_date;

    /// Bounds in kbps-equivalent for an episode at `kbps`; they scale linearly
    /// with the target.
    double lower_at(double x, double kbps) const { return lower(x) * kbps / target_kbps; }
    double upper_at(double x, double kbps) const { return upper(x) * kbps / target_kbps; }
    /// Unbounded model: control never triggers.
    static BoundsModel unbounded(double target_kbps);
};

/// Cumulative bits / duration / 1000 after each prefix, at x = t / T (t = 0..T).
std::vector<double> cumulative_kbps(const simenc::EpisodeTrace& trace);

/// Fits the envelope of `traces` rescaled to `target_kbps`. Throws
/// InvalidArgument with fewer than min_traces traces and FitFailure when the fit
/// is non-finite or the bounds cross.
BoundsModel fit_bounds(const std::vector<simenc::EpisodeTrace>& traces, double target_kbps,
                       const BoundsConfig& config = {});

/// Fraction of traces lying within the bounds at every grid point.
double bounds_coverage(const BoundsModel& bounds, const std::vector<simenc::EpisodeTrace>& traces,
                       int grid_points = 101);

io::json bounds_to_json(const BoundsModel& b);
BoundsModel bounds_from_json(const io::json& j);

// ---------------------------------------------------------------------------
// Policy callbacks

enum class SampleMode { Truncated, Greedy };

struct ControlEvent {
    int frame = 0;
    double b_t = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    int sampled_index = 0;   ///< 1-based position in the sorted candidates
    int adjusted_index = 0;
    int sampled_qp = 0;
    int qp = 0;
    bool active = false;
};

/// Stateful per-episode callback driving a PolicySession. With bounds it runs
/// feedback control on top of truncated sampling.
class PolicyRunner {
public:
    PolicyRunner(const policy::PolicyModel& model, std::uint64_t seed, SampleMode mode = SampleMode::Truncated);
    PolicyRunner(const policy::PolicyModel& model, std::uint64_t seed, const BoundsModel& bounds,
                 const FeedbackConfig& feedback);

    int operator()(const simenc::Observation& obs);
    simenc::PolicyCallback callback();
    const std::vector<ControlEvent>& events() const { return events_; }

private:
    const policy::PolicyModel* model_;
    Rng rng_;
    SampleMode mode_;
    std::optional<BoundsModel> bounds_;
    FeedbackConfig feedback_;
    std::unique_ptr<policy::PolicySession> session_;
    std::vector<ControlEvent> events_;
};

/// Rolls the policy out on every (video, target) pair; seeds derive from `seed`
/// and the pair index. `bounds` enables feedback control.
std::vector<simenc::EpisodeTrace> rollout_suite(const policy::PolicyModel& model,
                                                const std::vector<simenc::SyntheticVideo>& videos,
                                                const std::vector<std::pair<std::size_t, double>>& tasks,
                                                std::uint64_t seed, SampleMode mode,
                                                const BoundsModel* bounds = nullptr,
                                                const FeedbackConfig& feedback = {},
                                                int gop_interval = simenc::kDefaultGopInterval,
                                                int workers = 1);

}  // namespace nrc::inference
