#pragma once

// Evolution-strategies search over per-frame QP sequences, initialized from the
// baseline policy, and the imitation dataset built from its solutions.

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "nrc/baseline.hpp"
#include "nrc/io.hpp"
#include "nrc/rng.hpp"
#include "nrc/simenc.hpp"

namespace nrc::teacher {

inline constexpr std::string_view kTeacherSchema = "teacher.v1";

struct EsConfig {
    double sigma = 4.0;
    int batch = 16;
    double learning_rate = 16.0;
    /// Learning rate multiplies by decay_rate every decay_steps steps (smoothly).
    double decay_rate = 0.5;
    int decay_steps = 100;
    int max_steps = 100;
    double lambda = simenc::kDefaultLambda;
    /// Mirrored perturbations (eps, -eps); halves the independent draws.
    bool antithetic = false;
    /// Also scores round(theta) after each update as a best-seen candidate.
    bool evaluate_mean = false;
    std::uint64_t seed = 0;

    void validate() const;
    double learning_rate_at(int step) const;
};

struct EsState {
    Eigen::VectorXd theta;
    int step = 0;
    double best_reward = -std::numeric_limits<double>::infinity();
    std::vector<int> best_qps;
};

/// Rounds and clamps a parameter vector to valid QPs.
std::vector<int> to_qps(const Eigen::VectorXd& theta);

using RewardFn = std::function<double(const std::vector<int>&)>;

/// One update: theta += lr/(n sigma) * sum_i F(round(theta + sigma eps_i)) eps_i.
/// `noise` holds one perturbation per column (T x n).
EsState es_step(EsState state, const EsConfig& config, const RewardFn& reward,
                const Eigen::MatrixXd& noise);

/// Draws the T x n noise batch for `step` (antithetic columns when enabled).
Eigen::MatrixXd draw_noise(int dims, const EsConfig& config, Rng& rng);

struct EsResult {
    std::vector<int> best_qps;
    simenc::EpisodeTrace trace;
    simenc::EpisodeTrace baseline_trace;
    std::vector<double> best_reward_history;
};

EsResult run_es(const simenc::SyntheticVideo& video, const simenc::GopPlan& gop,
                double target_kbps, const EsConfig& config,
                const baseline::BaselineConfig& baseline_config = {});

// ---------------------------------------------------------------------------
// Dataset

enum class Provenance { Es, Her };

struct TeacherRecord {
    std::string video_id;
    double target_kbps = 0.0;
    simenc::StaticFeatures statics;
    /// T x 25 first-pass matrix so the record is self-contained.
    Eigen::MatrixXd first_pass;
    std::vector<simenc::StepFeatures> steps;
    std::vector<int> label_qps;
    std::vector<double> label_bits;
    double psnr_db = 0.0;
    double bitrate_kbps = 0.0;
    double reward = 0.0;
    Provenance provenance = Provenance::Es;
    /// Mean |label - baseline| QP per frame (ES records only).
    double baseline_drift = 0.0;

    int num_frames() const { return static_cast<int>(label_qps.size()); }
    double budget_bits() const { return target_kbps * 1000.0 * statics.duration; }
};

struct DatasetConfig {
    int bitrates_per_video = 4;
    double min_kbps = 256.0;
    double max_kbps = 768.0;
    int gop_interval = simenc::kDefaultGopInterval;
    double max_baseline_drift = 64.0;
    std::uint64_t seed = 0;
    int workers = 1;
};

/// Builds the record for a solved (video, target): observations regenerated by
/// replaying `qps`; throws ReplayMismatch if the replay disagrees with `trace`.
TeacherRecord make_record(const simenc::SyntheticVideo& video, const simenc::GopPlan& gop,
                          const simenc::EpisodeTrace& trace, Provenance provenance,
                          double lambda = simenc::kDefaultLambda);

/// Episode trace view of a record (labels as the encoded QPs and bits).
simenc::EpisodeTrace record_trace(const TeacherRecord& record);

/// Re-encodes the labels and checks bits match bit-exactly.
bool replay_matches(const TeacherRecord& record, const simenc::SyntheticVideo& video,
                    int gop_interval = simenc::kDefaultGopInterval);

/// Target bitrates for video `index`, uniform in [min_kbps, max_kbps].
std::vector<double> sample_targets(const DatasetConfig& config, std::size_t index);

std::vector<TeacherRecord> build_teacher_dataset(const std::vector<simenc::SyntheticVideo>& videos,
                                                 const DatasetConfig& dataset,
                                                 const EsConfig& es);

io::json record_to_json(const TeacherRecord& r);
TeacherRecord record_from_json(const io::json& j);
void write_dataset(const std::string& path, const std::vector<TeacherRecord>& records);
std::vector<TeacherRecord> read_dataset(const std::string& path);

}  // namespace nrc::teacher
