#pragma once

// Policy network: a single pre-LN transformer layer over the first-pass
// matrix, an LSTM over per-step inputs, and two MLP heads (QP logits and frame
// size). Gradients are computed by an explicit reverse pass.

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "nrc/features.hpp"
#include "nrc/io.hpp"
#include "nrc/nn_kernels.hpp"

namespace nrc::policy {

inline constexpr std::string_view kPolicySchema = "policy.v1";

struct NetworkConfig {
    std::string preset = "tiny";
    int heads = 2;
    int key_dim = 4;
    int hidden = 16;
    int recurrent = 16;
    /// Feed-forward width inside the transformer layer.
    int ff_hidden = 32;
    int head_hidden1 = 32;
    int head_hidden2 = 16;
    /// Relative offsets beyond +-window share one bias.
    int relative_window = 32;
    double dropout = 0.1;

    static NetworkConfig full();
    static NetworkConfig tiny();
    /// "full" or "tiny"; throws InvalidArgument otherwise.
    static NetworkConfig from_preset(std::string_view name);

    void validate() const;
    int attn_dim() const { return heads * key_dim; }
    int lstm_input() const { return hidden + kBundleDense + 2 * kEmbedDim; }
};

enum class Block : int {
    InW, InB, Ln1G, Ln1B, Wq, Bq, Wk, Bk, Wv, Bv, Wo, Bo, RelBias, Ln2G, Ln2B,
    FfW1, FfB1, FfW2, FfB2, QpEmbed, TypeEmbed, LstmW, LstmB,
    QpW1, QpB1, QpW2, QpB2, QpW3, QpB3, BitsW1, BitsB1, BitsW2, BitsB2, BitsW3, BitsB3,
};
inline constexpr int kNumBlocks = static_cast<int>(Block::BitsB3) + 1;

std::string_view block_name(Block b);

/// Every tensor is a dense matrix; gradients use the same type and shapes.
struct PolicyParams {
    std::array<Eigen::MatrixXd, kNumBlocks> tensors;

    Eigen::MatrixXd& operator[](Block b) { return tensors[static_cast<std::size_t>(b)]; }
    const Eigen::MatrixXd& operator[](Block b) const { return tensors[static_cast<std::size_t>(b)]; }

    static PolicyParams zeros_like(const PolicyParams& p);
    void set_zero();
    void add_scaled(const PolicyParams& other, double scale);
    std::size_t count() const;
    double squared_norm() const;
};

PolicyParams init_params(const NetworkConfig& config, std::uint64_t seed);

struct EpisodeInput {
    /// Normalized T x 25 first-pass matrix.
    Eigen::MatrixXd first_pass;
    std::vector<InputBundle> bundles;

    int size() const { return static_cast<int>(bundles.size()); }
};

struct ForwardOutput {
    Eigen::MatrixXd logits;      ///< T x 256
    Eigen::VectorXd bits_kbit;   ///< T
};

/// Intermediate values kept for the reverse pass.
struct ForwardCache {
    Eigen::MatrixXd x, h0, a, q, k, v, o, z_mask, h1, bn, f1, g, f_mask, e;
    nn::LayerNormCache<double> ln1, ln2;
    std::vector<Eigen::MatrixXd> probs, probs_dropped, attn_mask;
    Eigen::MatrixXd lstm_in;  ///< T x (lstm_input + recurrent), [x_t, h_{t-1}]
    Eigen::MatrixXd gi, gf, gg, go, c, tanh_c, hs;
    Eigen::MatrixXd qa1, qu1, qa2, qu2, ba1, bu1, ba2, bu2;
    std::vector<int> types, prev_qps;
    bool train = false;
};

/// Full-episode forward pass. Dropout is active only in train mode and its
/// masks are drawn from `dropout_seed`.
ForwardOutput forward(const NetworkConfig& config, const PolicyParams& params, const FeatureSpec& spec,
                      const EpisodeInput& input, bool train_mode, std::uint64_t dropout_seed,
                      ForwardCache* cache = nullptr);

/// Accumulates parameter gradients for upstream gradients on the outputs.
void backward(const NetworkConfig& config, const PolicyParams& params, const FeatureSpec& spec,
              const ForwardCache& cache, const Eigen::MatrixXd& d_logits,
              const Eigen::VectorXd& d_bits, PolicyParams& grads);

/// Row of the QP embedding for `prev_qp`, or zeros for -1.
Eigen::RowVectorXd qp_embedding(const PolicyParams& params, int prev_qp);

struct PolicyModel {
    NetworkConfig config;
    FeatureSpec spec;
    PolicyParams params;
};

io::json model_to_json(const PolicyModel& model);
PolicyModel model_from_json(const io::json& j);
void save_model(const std::string& path, const PolicyModel& model);
PolicyModel load_model(const std::string& path);

/// Eval-mode incremental rollout: the transformer runs once per episode and
/// each step advances the LSTM by one frame. Matches forward() step by step.
class PolicySession {
public:
    PolicySession(const PolicyModel& model, const Eigen::MatrixXd& raw_first_pass);

    struct Step {
        Eigen::RowVectorXd logits;
        double bits_kbit = 0.0;
    };
    Step step(const InputBundle& bundle);
    int position() const { return t_; }

private:
    const PolicyModel* model_;
    Eigen::MatrixXd embeddings_;
    Eigen::RowVectorXd h_, c_;
    int t_ = 0;
};

}  // namespace nrc::policy
