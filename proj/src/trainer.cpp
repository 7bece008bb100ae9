#include "nrc/trainer.hpp"

#include <cmath>
#include <numeric>

#include "nrc/error.hpp"
#include "nrc/parallel.hpp"
#include "nrc/rng.hpp"

namespace nrc::policy {

namespace {

constexpr int kTopK = 15;

struct Adam {
    PolicyParams m, v;
    int t = 0;

    explicit Adam(const PolicyParams& p) : m(PolicyParams::zeros_like(p)), v(PolicyParams::zeros_like(p)) {}

    void step(PolicyParams& params, const PolicyParams& grads, const TrainConfig& cfg) {
        ++t;
        const double c1 = 1.0 - std::pow(cfg.adam_beta1, t);
        const double c2 = 1.0 - std::pow(cfg.adam_beta2, t);
        for (std::size_t i = 0; i < params.tensors.size(); ++i) {
            auto& mi = m.tensors[i];
            auto& vi = v.tensors[i];
            const auto& g = grads.tensors[i];
            mi = cfg.adam_beta1 * mi + (1.0 - cfg.adam_beta1) * g;
            vi = cfg.adam_beta2 * vi + (1.0 - cfg.adam_beta2) * g.cwiseProduct(g);
            params.tensors[i].array() -=
                cfg.learning_rate * (mi.array() / c1) / ((vi.array() / c2).sqrt() + cfg.adam_eps);
        }
    }
};

}  // namespace

void TrainConfig::validate() const {
    require(beta1 >= 0.0 && beta2 >= 0.0, "loss weights must be >= 0");
    require(bits_unit_kbit > 0.0, "bits unit must be positive");
    require(learning_rate > 0.0, "learning rate must be positive");
    require(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0,
            "Adam moment constants must be in [0, 1)");
    require(adam_eps > 0.0, "Adam epsilon must be positive");
    require(clip_norm >= 0.0, "clip norm must be >= 0");
    require(batch_size >= 1 && epochs >= 0, "batch size must be >= 1 and epochs >= 0");
}

TrainingExample make_example(const teacher::TeacherRecord& record, const FeatureSpec& spec) {
    if (record.label_qps.size() != record.steps.size() || record.label_bits.size() != record.steps.size())
        fail(ErrorKind::InvalidArgument, "teacher record is missing labels");
    TrainingExample ex;
    ex.input.first_pass = spec.normalize_first_pass(record.first_pass);
    ex.input.bundles = record_bundles(record, spec);
    ex.labels = record.label_qps;
    ex.label_kbit.resize(static_cast<Eigen::Index>(record.label_bits.size()));
    for (std::size_t t = 0; t < record.label_bits.size(); ++t)
        ex.label_kbit[static_cast<Eigen::Index>(t)] = record.label_bits[t] / 1000.0;
    ex.budget_kbit = record.budget_bits() / 1000.0;
    return ex;
}

int label_rank(const Eigen::RowVectorXd& logits, int label) {
    const double v = logits[label];
    int rank = 0;
    for (Eigen::Index q = 0; q < logits.size(); ++q)
        if (logits[q] > v || (logits[q] == v && q < label)) ++rank;
    return rank;
}

LossParts episode_loss(const PolicyModel& model, const TrainingExample& ex, double beta1, double beta2,
                       bool train_mode, std::uint64_t dropout_seed, PolicyParams* grads,
                       double bits_unit_kbit) {
    require(bits_unit_kbit > 0.0, "bits unit must be positive");
    const int T = ex.input.size();
    if (static_cast<int>(ex.labels.size()) != T || ex.label_kbit.size() != T)
        fail(ErrorKind::InvalidArgument, "labels missing for some steps");
    ForwardCache cache;
    const ForwardOutput out = forward(model.config, model.params, model.spec, ex.input, train_mode,
                                      dropout_seed, grads ? &cache : nullptr);
    LossParts loss;
    loss.steps = T;
    Eigen::MatrixXd d_logits(T, simenc::kNumQp);
    for (int t = 0; t < T; ++t) {
        const int y = ex.labels[static_cast<std::size_t>(t)];
        if (y < simenc::kMinQp || y > simenc::kMaxQp) fail(ErrorKind::InvalidArgument, "label QP out of range");
        const Eigen::RowVectorXd row = out.logits.row(t);
        const double lse = nn::logsumexp<double>(row);
        loss.qp += lse - row[y];
        d_logits.row(t) = (row.array() - lse).exp().matrix();
        d_logits(t, y) -= 1.0;
        const int rank = label_rank(row, y);
        if (rank == 0) ++loss.top1;
        if (rank < kTopK) ++loss.top15;
    }
    const Eigen::VectorXd diff = (out.bits_kbit - ex.label_kbit) / bits_unit_kbit;
    const double total_diff = (out.bits_kbit.sum() - ex.budget_kbit) / bits_unit_kbit;
    loss.frame_bits = diff.squaredNorm();
    loss.total_bits = total_diff * total_diff;
    loss.total = loss.qp + beta1 * loss.frame_bits + beta2 * loss.total_bits;
    if (grads) {
        const Eigen::VectorXd d_bits =
            (2.0 * beta1 * diff + Eigen::VectorXd::Constant(T, 2.0 * beta2 * total_diff)) / bits_unit_kbit;
        backward(model.config, model.params, model.spec, cache, d_logits, d_bits, *grads);
    }
    return loss;
}

TrainResult train(const std::vector<teacher::TeacherRecord>& records, const TrainConfig& config) {
    return train(records, config, NetworkConfig::from_preset(config.preset));
}

TrainResult train(const std::vector<teacher::TeacherRecord>& records, const TrainConfig& config,
                  const NetworkConfig& network) {
    config.validate();
    network.validate();
    require(!records.empty(), "training dataset is empty");
    PolicyModel model;
    model.config = network;
    model.spec = fit_feature_spec(records);
    model.params = init_params(network, derive_seed(config.seed, 0));
    return train_from(std::move(model), records, config);
}

TrainResult train_from(PolicyModel model, const std::vector<teacher::TeacherRecord>& records,
                       const TrainConfig& config) {
    config.validate();
    require(!records.empty(), "training dataset is empty");
    std::vector<TrainingExample> examples;
    examples.reserve(records.size());
    for (const auto& r : records) examples.push_back(make_example(r, model.spec));

    TrainResult result;
    Adam adam(model.params);
    Rng shuffle_rng(derive_seed(config.seed, 1));
    std::vector<std::size_t> order(examples.size());
    int step = 0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.uniform_index(i)]);
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t n = std::min(order.size() - start, static_cast<std::size_t>(config.batch_size));
            std::vector<PolicyParams> grads(n);
            std::vector<LossParts> parts(n);
            parallel_for(n, config.workers, [&](std::size_t b) {
                grads[b] = PolicyParams::zeros_like(model.params);
                const std::uint64_t seed = derive_seed(config.seed, 1000003ULL * (step + 1) + b);
                parts[b] = episode_loss(model, examples[order[start + b]], config.beta1, config.beta2,
                                        config.dropout, seed, &grads[b], config.bits_unit_kbit);
            });
            PolicyParams total = PolicyParams::zeros_like(model.params);
            TrainLogRow row;
            row.step = step;
            row.epoch = epoch;
            int steps = 0, top1 = 0, top15 = 0;
            for (std::size_t b = 0; b < n; ++b) {
                total.add_scaled(grads[b], 1.0 / static_cast<double>(n));
                row.l_qp += parts[b].qp / static_cast<double>(n);
                row.l_frame_bits += parts[b].frame_bits / static_cast<double>(n);
                row.l_total_bits += parts[b].total_bits / static_cast<double>(n);
                row.loss += parts[b].total / static_cast<double>(n);
                steps += parts[b].steps;
                top1 += parts[b].top1;
                top15 += parts[b].top15;
            }
            row.top1 = static_cast<double>(top1) / steps;
            row.top15 = static_cast<double>(top15) / steps;
            const double gnorm = std::sqrt(total.squared_norm());
            if (!std::isfinite(row.loss) || !std::isfinite(gnorm))
                fail(ErrorKind::Divergence, "non-finite loss at training step " + std::to_string(step) +
                                                " (epoch " + std::to_string(epoch) + ")");
            if (config.clip_norm > 0.0 && gnorm > config.clip_norm)
                for (auto& t : total.tensors) t *= config.clip_norm / gnorm;
            adam.step(model.params, total, config);
            result.log.push_back(row);
            ++step;
        }
    }
    result.model = std::move(model);
    return result;
}

Coverage label_coverage(const PolicyModel& model, const std::vector<teacher::TeacherRecord>& records) {
    Coverage c;
    int top1 = 0, top15 = 0;
    for (const auto& r : records) {
        const auto parts = episode_loss(model, make_example(r, model.spec), 0.0, 0.0, false, 0);
        top1 += parts.top1;
        top15 += parts.top15;
        c.steps += parts.steps;
    }
    if (c.steps > 0) {
        c.top1 = static_cast<double>(top1) / c.steps;
        c.top15 = static_cast<double>(top15) / c.steps;
    }
    return c;
}

void write_train_log(const std::string& path, const std::vector<TrainLogRow>& rows) {
    io::CsvTable table;
    table.header = {"step", "L_QP", "L_frame_bits", "L_total_bits", "top1", "top15"};
    for (const auto& r : rows)
        table.rows.push_back({std::to_string(r.step), io::format_double(r.l_qp), io::format_double(r.l_frame_bits),
                              io::format_double(r.l_total_bits), io::format_double(r.top1),
                              io::format_double(r.top15)});
    io::write_csv(path, table);
}

}  // namespace nrc::policy
