#pragma once

// Teacher-forced imitation training of the policy network with the QP
// cross-entropy plus frame-size and total-size auxiliary losses.

#include <cstdint>
#include <string>
#include <vector>

#include "nrc/network.hpp"
#include "nrc/teacher.hpp"

namespace nrc::policy {

struct TrainConfig {
    double beta1 = 2.0;  ///< per-frame size loss weight
    double beta2 = 2.0;  ///< total size loss weight
    /// Size terms are measured in units of this many kilobits. Around twice
    /// the per-frame label spread keeps them commensurate with the cross-entropy.
    double bits_unit_kbit = 30.0;
    double learning_rate = 3e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    /// Global gradient-norm clip; 0 disables it.
    double clip_norm = 0.0;
    int batch_size = 4;
    int epochs = 10;
    bool dropout = true;
    std::uint64_t seed = 0;
    std::string preset = "tiny";
    int workers = 1;

    void validate() const;
};

/// One record converted for the network.
struct TrainingExample {
    EpisodeInput input;
    std::vector<int> labels;
    Eigen::VectorXd label_kbit;
    double budget_kbit = 0.0;
};

TrainingExample make_example(const teacher::TeacherRecord& record, const FeatureSpec& spec);

struct LossParts {
    double qp = 0.0;
    double frame_bits = 0.0;
    double total_bits = 0.0;
    double total = 0.0;
    int top1 = 0;   ///< steps whose argmax equals the label
    int top15 = 0;  ///< steps whose label is among the 15 largest logits
    int steps = 0;
};

/// Rank of logits[label] (0 = largest); ties go to the lower QP.
int label_rank(const Eigen::RowVectorXd& logits, int label);

/// L = sum_t CE_t + beta1 sum_t (b_t - b*_t)^2 + beta2 (sum_t b_t - budget)^2,
/// sizes in units of bits_unit_kbit kilobits. Gradients are accumulated into `grads` when non-null.
LossParts episode_loss(const PolicyModel& model, const TrainingExample& example, double beta1,
                       double beta2, bool train_mode, std::uint64_t dropout_seed,
                       PolicyParams* grads = nullptr, double bits_unit_kbit = 1.0);

struct TrainLogRow {
    int step = 0;
    int epoch = 0;
    double l_qp = 0.0;
    double l_frame_bits = 0.0;
    double l_total_bits = 0.0;
    double loss = 0.0;
    double top1 = 0.0;
    double top15 = 0.0;
};

struct TrainResult {
    PolicyModel model;
    std::vector<TrainLogRow> log;
};

/// Fits the feature spec on `records`, initializes from the seed and trains.
TrainResult train(const std::vector<teacher::TeacherRecord>& records, const TrainConfig& config);
TrainResult train(const std::vector<teacher::TeacherRecord>& records, const TrainConfig& config,
                  const NetworkConfig& network);

/// Continues training an existing model; its feature spec is kept frozen.
TrainResult train_from(PolicyModel model, const std::vector<teacher::TeacherRecord>& records,
                       const TrainConfig& config);

struct Coverage {
    double top1 = 0.0;
    double top15 = 0.0;
    int steps = 0;
};

/// Eval-mode teacher-forced label coverage.
Coverage label_coverage(const PolicyModel& model, const std::vector<teacher::TeacherRecord>& records);

void write_train_log(const std::string& path, const std::vector<TrainLogRow>& rows);

}  // namespace nrc::policy
