#include "nrc/network.hpp"

#include <algorithm>
#include <cmath>

#include "nrc/error.hpp"
#include "nrc/rng.hpp"
#include "nrc/simenc.hpp"

namespace nrc::policy {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using nn::Mat;

namespace {

constexpr std::array<std::string_view, kNumBlocks> kBlockNames = {
    "in_w",    "in_b",    "ln1_g",   "ln1_b",   "wq",      "bq",       "wk",        "bk",
    "wv",      "bv",      "wo",      "bo",      "rel_bias", "ln2_g",   "ln2_b",     "ff_w1",
    "ff_b1",   "ff_w2",   "ff_b2",   "qp_embed", "type_embed", "lstm_w", "lstm_b",   "qp_w1",
    "qp_b1",   "qp_w2",   "qp_b2",   "qp_w3",   "qp_b3",    "bits_w1", "bits_b1",   "bits_w2",
    "bits_b2", "bits_w3", "bits_b3"};

MatrixXd gaussian(Index rows, Index cols, double sd, Rng& rng) {
    MatrixXd m(rows, cols);
    for (Index c = 0; c < cols; ++c)
        for (Index r = 0; r < rows; ++r) m(r, c) = rng.normal(0.0, sd);
    return m;
}

MatrixXd dropout_mask(Index rows, Index cols, double rate, Rng& rng) {
    MatrixXd m(rows, cols);
    const double keep = 1.0 - rate;
    for (Index c = 0; c < cols; ++c)
        for (Index r = 0; r < rows; ++r) m(r, c) = rng.uniform() < keep ? 1.0 / keep : 0.0;
    return m;
}

int rel_bucket(int i, int j, int window) { return std::clamp(j - i, -window, window) + window; }

/// Transformer layer; fills `c` when non-null. Masks are drawn when `rng` is set.
MatrixXd transformer(const NetworkConfig& cfg, const PolicyParams& p, const MatrixXd& x, Rng* rng,
                     ForwardCache* c) {
    const Index T = x.rows();
    const int H = cfg.heads, dk = cfg.key_dim;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
    nn::LayerNormCache<double> ln1, ln2;
    MatrixXd h0 = nn::linear<double>(x, p[Block::InW], p[Block::InB]);
    MatrixXd a = nn::layer_norm<double>(h0, p[Block::Ln1G], p[Block::Ln1B], ln1);
    MatrixXd q = nn::linear<double>(a, p[Block::Wq], p[Block::Bq]);
    MatrixXd k = nn::linear<double>(a, p[Block::Wk], p[Block::Bk]);
    MatrixXd v = nn::linear<double>(a, p[Block::Wv], p[Block::Bv]);
    MatrixXd o(T, cfg.attn_dim());
    const MatrixXd& rel = p[Block::RelBias];
    if (c) {
        c->probs.assign(static_cast<std::size_t>(H), {});
        c->probs_dropped.assign(static_cast<std::size_t>(H), {});
        c->attn_mask.assign(static_cast<std::size_t>(H), {});
    }
    for (int h = 0; h < H; ++h) {
        MatrixXd s = q.middleCols(h * dk, dk) * k.middleCols(h * dk, dk).transpose() * scale;
        for (Index i = 0; i < T; ++i)
            for (Index j = 0; j < T; ++j)
                s(i, j) += rel(h, rel_bucket(static_cast<int>(i), static_cast<int>(j), cfg.relative_window));
        MatrixXd prob = nn::softmax_rows<double>(s);
        MatrixXd dropped = prob;
        if (rng) {
            MatrixXd m = dropout_mask(T, T, cfg.dropout, *rng);
            dropped = prob.cwiseProduct(m);
            if (c) c->attn_mask[static_cast<std::size_t>(h)] = std::move(m);
        }
        o.middleCols(h * dk, dk) = dropped * v.middleCols(h * dk, dk);
        if (c) {
            c->probs[static_cast<std::size_t>(h)] = std::move(prob);
            c->probs_dropped[static_cast<std::size_t>(h)] = std::move(dropped);
        }
    }
    MatrixXd z = nn::linear<double>(o, p[Block::Wo], p[Block::Bo]);
    MatrixXd z_mask;
    if (rng) {
        z_mask = dropout_mask(T, cfg.hidden, cfg.dropout, *rng);
        z = z.cwiseProduct(z_mask);
    }
    MatrixXd h1 = h0 + z;
    MatrixXd bn = nn::layer_norm<double>(h1, p[Block::Ln2G], p[Block::Ln2B], ln2);
    MatrixXd f1 = nn::linear<double>(bn, p[Block::FfW1], p[Block::FfB1]);
    MatrixXd g = nn::gelu<double>(f1);
    MatrixXd f2 = nn::linear<double>(g, p[Block::FfW2], p[Block::FfB2]);
    MatrixXd f_mask;
    if (rng) {
        f_mask = dropout_mask(T, cfg.hidden, cfg.dropout, *rng);
        f2 = f2.cwiseProduct(f_mask);
    }
    MatrixXd e = h1 + f2;
    if (c) {
        c->x = x;
        c->h0 = std::move(h0);
        c->a = std::move(a);
        c->q = std::move(q);
        c->k = std::move(k);
        c->v = std::move(v);
        c->o = std::move(o);
        c->z_mask = std::move(z_mask);
        c->h1 = std::move(h1);
        c->bn = std::move(bn);
        c->f1 = std::move(f1);
        c->g = std::move(g);
        c->f_mask = std::move(f_mask);
        c->ln1 = std::move(ln1);
        c->ln2 = std::move(ln2);
        c->e = e;
    }
    return e;
}

RowVectorXd lstm_input_row(const NetworkConfig& cfg, const PolicyParams& p, const RowVectorXd& e_row,
                           const InputBundle& b) {
    RowVectorXd x(cfg.lstm_input());
    x.head(cfg.hidden) = e_row;
    x.segment(cfg.hidden, kBundleDense) = b.dense.transpose();
    x.segment(cfg.hidden + kBundleDense, kEmbedDim) = p[Block::TypeEmbed].row(b.frame_type);
    x.tail(kEmbedDim) = qp_embedding(p, b.prev_qp);
    return x;
}

struct LstmGates {
    RowVectorXd i, f, g, o, c, tanh_c, h;
};

LstmGates lstm_cell(const NetworkConfig& cfg, const PolicyParams& p, const RowVectorXd& z,
                    const RowVectorXd& c_prev) {
    const int dr = cfg.recurrent;
    const RowVectorXd pre = z * p[Block::LstmW] + p[Block::LstmB].row(0);
    LstmGates s;
    s.i = pre.segment(0, dr).unaryExpr([](double v) { return nn::sigmoid(v); });
    s.f = pre.segment(dr, dr).unaryExpr([](double v) { return nn::sigmoid(v); });
    s.g = pre.segment(2 * dr, dr).array().tanh().matrix();
    s.o = pre.segment(3 * dr, dr).unaryExpr([](double v) { return nn::sigmoid(v); });
    s.c = s.f.cwiseProduct(c_prev) + s.i.cwiseProduct(s.g);
    s.tanh_c = s.c.array().tanh().matrix();
    s.h = s.o.cwiseProduct(s.tanh_c);
    return s;
}

void check_input(const NetworkConfig& cfg, const EpisodeInput& in) {
    const Index T = in.first_pass.rows();
    if (T < 1) fail(ErrorKind::InvalidArgument, "episode must have at least one frame");
    if (in.first_pass.cols() != simenc::kNumFirstPassFeatures)
        fail(ErrorKind::InvalidArgument, "first-pass matrix must have 25 columns");
    if (static_cast<Index>(in.bundles.size()) != T)
        fail(ErrorKind::InvalidArgument, "input bundles not aligned with frames");
    for (const auto& b : in.bundles) {
        if (b.dense.size() != kBundleDense) fail(ErrorKind::InvalidArgument, "bundle width mismatch");
        if (b.frame_type < 0 || b.frame_type >= simenc::kNumFrameTypes)
            fail(ErrorKind::InvalidArgument, "bundle frame type out of range");
        if (b.prev_qp < -1 || b.prev_qp > simenc::kMaxQp)
            fail(ErrorKind::InvalidArgument, "bundle prev_qp out of range");
    }
    (void)cfg;
}

}  // namespace

// ---------------------------------------------------------------------------

NetworkConfig NetworkConfig::full() {
    NetworkConfig c;
    c.preset = "full";
    c.heads = 16;
    c.key_dim = 16;
    c.hidden = 128;
    c.recurrent = 128;
    c.ff_hidden = 256;
    return c;
}

NetworkConfig NetworkConfig::tiny() { return NetworkConfig{}; }

NetworkConfig NetworkConfig::from_preset(std::string_view name) {
    if (name == "full") return full();
    if (name == "tiny") return tiny();
    fail(ErrorKind::InvalidArgument, "unknown network preset: " + std::string(name));
}

void NetworkConfig::validate() const {
    require(heads >= 1 && key_dim >= 1 && hidden >= 1 && recurrent >= 1 && ff_hidden >= 1,
            "network sizes must be positive");
    require(head_hidden1 >= 1 && head_hidden2 >= 1, "head sizes must be positive");
    require(relative_window >= 0, "relative window must be >= 0");
    require(dropout >= 0.0 && dropout < 1.0, "dropout must be in [0, 1)");
}

std::string_view block_name(Block b) { return kBlockNames[static_cast<std::size_t>(b)]; }

PolicyParams PolicyParams::zeros_like(const PolicyParams& p) {
    PolicyParams z;
    for (std::size_t i = 0; i < z.tensors.size(); ++i)
        z.tensors[i] = MatrixXd::Zero(p.tensors[i].rows(), p.tensors[i].cols());
    return z;
}

void PolicyParams::set_zero() {
    for (auto& t : tensors) t.setZero();
}

void PolicyParams::add_scaled(const PolicyParams& other, double scale) {
    for (std::size_t i = 0; i < tensors.size(); ++i) tensors[i] += scale * other.tensors[i];
}

std::size_t PolicyParams::count() const {
    std::size_t n = 0;
    for (const auto& t : tensors) n += static_cast<std::size_t>(t.size());
    return n;
}

double PolicyParams::squared_norm() const {
    double s = 0.0;
    for (const auto& t : tensors) s += t.squaredNorm();
    return s;
}

PolicyParams init_params(const NetworkConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    PolicyParams p;
    const int D = cfg.hidden, A = cfg.attn_dim(), F = cfg.ff_hidden, dr = cfg.recurrent;
    const int h1 = cfg.head_hidden1, h2 = cfg.head_hidden2;
    auto w = [&](Block b, int in, int out) { p[b] = gaussian(in, out, 1.0 / std::sqrt(double(in)), rng); };
    auto zero = [&](Block b, int rows, int cols) { p[b] = MatrixXd::Zero(rows, cols); };
    w(Block::InW, simenc::kNumFirstPassFeatures, D);
    zero(Block::InB, 1, D);
    p[Block::Ln1G] = MatrixXd::Ones(1, D);
    zero(Block::Ln1B, 1, D);
    w(Block::Wq, D, A);
    zero(Block::Bq, 1, A);
    w(Block::Wk, D, A);
    zero(Block::Bk, 1, A);
    w(Block::Wv, D, A);
    zero(Block::Bv, 1, A);
    w(Block::Wo, A, D);
    zero(Block::Bo, 1, D);
    zero(Block::RelBias, cfg.heads, 2 * cfg.relative_window + 1);
    p[Block::Ln2G] = MatrixXd::Ones(1, D);
    zero(Block::Ln2B, 1, D);
    w(Block::FfW1, D, F);
    zero(Block::FfB1, 1, F);
    w(Block::FfW2, F, D);
    zero(Block::FfB2, 1, D);
    p[Block::QpEmbed] = gaussian(simenc::kNumQp, kEmbedDim, 0.25, rng);
    p[Block::TypeEmbed] = gaussian(simenc::kNumFrameTypes, kEmbedDim, 0.25, rng);
    w(Block::LstmW, cfg.lstm_input() + dr, 4 * dr);
    zero(Block::LstmB, 1, 4 * dr);
    p[Block::LstmB].block(0, dr, 1, dr).setOnes();  // forget gate
    w(Block::QpW1, dr, h1);
    zero(Block::QpB1, 1, h1);
    w(Block::QpW2, h1, h2);
    zero(Block::QpB2, 1, h2);
    w(Block::QpW3, h2, simenc::kNumQp);
    zero(Block::QpB3, 1, simenc::kNumQp);
    w(Block::BitsW1, dr, h1);
    zero(Block::BitsB1, 1, h1);
    w(Block::BitsW2, h1, h2);
    zero(Block::BitsB2, 1, h2);
    w(Block::BitsW3, h2, 1);
    zero(Block::BitsB3, 1, 1);
    return p;
}

RowVectorXd qp_embedding(const PolicyParams& params, int prev_qp) {
    if (prev_qp < 0) return RowVectorXd::Zero(kEmbedDim);
    return params[Block::QpEmbed].row(prev_qp);
}

ForwardOutput forward(const NetworkConfig& cfg, const PolicyParams& p, const FeatureSpec& spec,
                      const EpisodeInput& in, bool train_mode, std::uint64_t dropout_seed,
                      ForwardCache* cache) {
    check_input(cfg, in);
    const Index T = in.first_pass.rows();
    const int dr = cfg.recurrent;
    const bool drop = train_mode && cfg.dropout > 0.0;
    Rng rng(dropout_seed);
    const MatrixXd e = transformer(cfg, p, in.first_pass, drop ? &rng : nullptr, cache);

    MatrixXd lstm_in(T, cfg.lstm_input() + dr);
    MatrixXd gi(T, dr), gf(T, dr), gg(T, dr), go(T, dr), cs(T, dr), tc(T, dr), hs(T, dr);
    RowVectorXd h = RowVectorXd::Zero(dr), c = RowVectorXd::Zero(dr);
    for (Index t = 0; t < T; ++t) {
        const auto& b = in.bundles[static_cast<std::size_t>(t)];
        lstm_in.row(t) << lstm_input_row(cfg, p, e.row(t), b), h;
        const LstmGates s = lstm_cell(cfg, p, lstm_in.row(t), c);
        gi.row(t) = s.i;
        gf.row(t) = s.f;
        gg.row(t) = s.g;
        go.row(t) = s.o;
        cs.row(t) = s.c;
        tc.row(t) = s.tanh_c;
        hs.row(t) = s.h;
        h = s.h;
        c = s.c;
    }

    MatrixXd qa1 = nn::linear<double>(hs, p[Block::QpW1], p[Block::QpB1]);
    MatrixXd qu1 = nn::gelu<double>(qa1);
    MatrixXd qa2 = nn::linear<double>(qu1, p[Block::QpW2], p[Block::QpB2]);
    MatrixXd qu2 = nn::gelu<double>(qa2);
    MatrixXd ba1 = nn::linear<double>(hs, p[Block::BitsW1], p[Block::BitsB1]);
    MatrixXd bu1 = nn::gelu<double>(ba1);
    MatrixXd ba2 = nn::linear<double>(bu1, p[Block::BitsW2], p[Block::BitsB2]);
    MatrixXd bu2 = nn::gelu<double>(ba2);

    ForwardOutput out;
    out.logits = nn::linear<double>(qu2, p[Block::QpW3], p[Block::QpB3]);
    const MatrixXd r = nn::linear<double>(bu2, p[Block::BitsW3], p[Block::BitsB3]);
    out.bits_kbit = (spec.bits_mean_kbit + spec.bits_std_kbit * r.col(0).array()).matrix();

    if (cache) {
        cache->train = drop;
        cache->lstm_in = std::move(lstm_in);
        cache->gi = std::move(gi);
        cache->gf = std::move(gf);
        cache->gg = std::move(gg);
        cache->go = std::move(go);
        cache->c = std::move(cs);
        cache->tanh_c = std::move(tc);
        cache->hs = std::move(hs);
        cache->qa1 = std::move(qa1);
        cache->qu1 = std::move(qu1);
        cache->qa2 = std::move(qa2);
        cache->qu2 = std::move(qu2);
        cache->ba1 = std::move(ba1);
        cache->bu1 = std::move(bu1);
        cache->ba2 = std::move(ba2);
        cache->bu2 = std::move(bu2);
        cache->types.clear();
        cache->prev_qps.clear();
        for (const auto& b : in.bundles) {
            cache->types.push_back(b.frame_type);
            cache->prev_qps.push_back(b.prev_qp);
        }
    }
    return out;
}

void backward(const NetworkConfig& cfg, const PolicyParams& p, const FeatureSpec& spec,
              const ForwardCache& c, const MatrixXd& d_logits, const Eigen::VectorXd& d_bits,
              PolicyParams& g) {
    const Index T = c.hs.rows();
    require(d_logits.rows() == T && d_logits.cols() == simenc::kNumQp && d_bits.size() == T,
            "upstream gradient shape mismatch");
    const int dr = cfg.recurrent, H = cfg.heads, dk = cfg.key_dim, D = cfg.hidden;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

    // Heads.
    MatrixXd d_qu2 = nn::linear_backward<double>(c.qu2, p[Block::QpW3], d_logits, g[Block::QpW3], g[Block::QpB3]);
    MatrixXd d_qa2 = nn::gelu_backward<double>(c.qa2, d_qu2);
    MatrixXd d_qu1 = nn::linear_backward<double>(c.qu1, p[Block::QpW2], d_qa2, g[Block::QpW2], g[Block::QpB2]);
    MatrixXd d_qa1 = nn::gelu_backward<double>(c.qa1, d_qu1);
    MatrixXd d_hs = nn::linear_backward<double>(c.hs, p[Block::QpW1], d_qa1, g[Block::QpW1], g[Block::QpB1]);

    const MatrixXd d_r = spec.bits_std_kbit * d_bits;
    MatrixXd d_bu2 = nn::linear_backward<double>(c.bu2, p[Block::BitsW3], d_r, g[Block::BitsW3], g[Block::BitsB3]);
    MatrixXd d_ba2 = nn::gelu_backward<double>(c.ba2, d_bu2);
    MatrixXd d_bu1 = nn::linear_backward<double>(c.bu1, p[Block::BitsW2], d_ba2, g[Block::BitsW2], g[Block::BitsB2]);
    MatrixXd d_ba1 = nn::gelu_backward<double>(c.ba1, d_bu1);
    d_hs += nn::linear_backward<double>(c.hs, p[Block::BitsW1], d_ba1, g[Block::BitsW1], g[Block::BitsB1]);

    // LSTM, backward through time.
    MatrixXd d_e(T, D);
    RowVectorXd dh_next = RowVectorXd::Zero(dr), dc_next = RowVectorXd::Zero(dr);
    MatrixXd& dW = g[Block::LstmW];
    MatrixXd& dB = g[Block::LstmB];
    const MatrixXd Wt = p[Block::LstmW].transpose();
    for (Index t = T - 1; t >= 0; --t) {
        const RowVectorXd dh = d_hs.row(t) + dh_next;
        const RowVectorXd i = c.gi.row(t), f = c.gf.row(t), gg = c.gg.row(t), o = c.go.row(t);
        const RowVectorXd tc = c.tanh_c.row(t);
        const RowVectorXd c_prev = t > 0 ? RowVectorXd(c.c.row(t - 1)) : RowVectorXd::Zero(dr);
        const RowVectorXd d_o = dh.cwiseProduct(tc);
        const RowVectorXd dc = dh.cwiseProduct(o).cwiseProduct((1.0 - tc.array().square()).matrix()) + dc_next;
        RowVectorXd d_pre(4 * dr);
        d_pre.segment(0, dr) = dc.cwiseProduct(gg).cwiseProduct(i.cwiseProduct((1.0 - i.array()).matrix()));
        d_pre.segment(dr, dr) = dc.cwiseProduct(c_prev).cwiseProduct(f.cwiseProduct((1.0 - f.array()).matrix()));
        d_pre.segment(2 * dr, dr) = dc.cwiseProduct(i).cwiseProduct((1.0 - gg.array().square()).matrix());
        d_pre.segment(3 * dr, dr) = d_o.cwiseProduct(o.cwiseProduct((1.0 - o.array()).matrix()));
        dc_next = dc.cwiseProduct(f);
        dW.noalias() += c.lstm_in.row(t).transpose() * d_pre;
        dB.row(0) += d_pre;
        const RowVectorXd dz = d_pre * Wt;
        dh_next = dz.tail(dr);
        d_e.row(t) = dz.head(D);
        const int type = c.types[static_cast<std::size_t>(t)];
        g[Block::TypeEmbed].row(type) += dz.segment(D + kBundleDense, kEmbedDim);
        const int pq = c.prev_qps[static_cast<std::size_t>(t)];
        if (pq >= 0) g[Block::QpEmbed].row(pq) += dz.segment(D + kBundleDense + kEmbedDim, kEmbedDim);
    }

    // Transformer: e = h1 + drop(ffn(ln2(h1))), h1 = h0 + drop(attn(ln1(h0)) Wo).
    MatrixXd d_h1 = d_e;
    MatrixXd d_f2 = c.train ? MatrixXd(d_e.cwiseProduct(c.f_mask)) : d_e;
    MatrixXd d_g = nn::linear_backward<double>(c.g, p[Block::FfW2], d_f2, g[Block::FfW2], g[Block::FfB2]);
    MatrixXd d_f1 = nn::gelu_backward<double>(c.f1, d_g);
    MatrixXd d_bn = nn::linear_backward<double>(c.bn, p[Block::FfW1], d_f1, g[Block::FfW1], g[Block::FfB1]);
    d_h1 += nn::layer_norm_backward<double>(c.ln2, p[Block::Ln2G], d_bn, g[Block::Ln2G], g[Block::Ln2B]);

    MatrixXd d_h0 = d_h1;
    MatrixXd d_z = c.train ? MatrixXd(d_h1.cwiseProduct(c.z_mask)) : d_h1;
    MatrixXd d_o = nn::linear_backward<double>(c.o, p[Block::Wo], d_z, g[Block::Wo], g[Block::Bo]);
    MatrixXd d_q(T, cfg.attn_dim()), d_k(T, cfg.attn_dim()), d_v(T, cfg.attn_dim());
    MatrixXd& d_rel = g[Block::RelBias];
    for (int h = 0; h < H; ++h) {
        const auto hs = static_cast<std::size_t>(h);
        const MatrixXd d_oh = d_o.middleCols(h * dk, dk);
        const MatrixXd d_pd = d_oh * c.v.middleCols(h * dk, dk).transpose();
        d_v.middleCols(h * dk, dk) = c.probs_dropped[hs].transpose() * d_oh;
        const MatrixXd d_p = c.train ? MatrixXd(d_pd.cwiseProduct(c.attn_mask[hs])) : d_pd;
        const MatrixXd d_s = nn::softmax_rows_backward<double>(c.probs[hs], d_p);
        for (Index i = 0; i < T; ++i)
            for (Index j = 0; j < T; ++j)
                d_rel(h, rel_bucket(static_cast<int>(i), static_cast<int>(j), cfg.relative_window)) += d_s(i, j);
        d_q.middleCols(h * dk, dk) = d_s * c.k.middleCols(h * dk, dk) * scale;
        d_k.middleCols(h * dk, dk) = d_s.transpose() * c.q.middleCols(h * dk, dk) * scale;
    }
    MatrixXd d_a = nn::linear_backward<double>(c.a, p[Block::Wq], d_q, g[Block::Wq], g[Block::Bq]);
    d_a += nn::linear_backward<double>(c.a, p[Block::Wk], d_k, g[Block::Wk], g[Block::Bk]);
    d_a += nn::linear_backward<double>(c.a, p[Block::Wv], d_v, g[Block::Wv], g[Block::Bv]);
    d_h0 += nn::layer_norm_backward<double>(c.ln1, p[Block::Ln1G], d_a, g[Block::Ln1G], g[Block::Ln1B]);
    nn::linear_backward<double>(c.x, p[Block::InW], d_h0, g[Block::InW], g[Block::InB]);
}

// ---------------------------------------------------------------------------

io::json model_to_json(const PolicyModel& m) {
    io::json params = io::json::object();
    for (int b = 0; b < kNumBlocks; ++b)
        params[std::string(block_name(static_cast<Block>(b)))] = io::matrix_to_json(m.params.tensors[static_cast<std::size_t>(b)]);
    const auto& c = m.config;
    return {{"schema", kPolicySchema},
            {"config",
             {{"preset", c.preset},
              {"heads", c.heads},
              {"key_dim", c.key_dim},
              {"hidden", c.hidden},
              {"recurrent", c.recurrent},
              {"ff_hidden", c.ff_hidden},
              {"head_hidden1", c.head_hidden1},
              {"head_hidden2", c.head_hidden2},
              {"relative_window", c.relative_window},
              {"dropout", c.dropout}}},
            {"feature_spec", spec_to_json(m.spec)},
            {"params", params}};
}

PolicyModel model_from_json(const io::json& j) {
    io::require_schema(j, kPolicySchema);
    PolicyModel m;
    try {
        const auto& c = j.at("config");
        m.config.preset = c.at("preset").get<std::string>();
        m.config.heads = c.at("heads").get<int>();
        m.config.key_dim = c.at("key_dim").get<int>();
        m.config.hidden = c.at("hidden").get<int>();
        m.config.recurrent = c.at("recurrent").get<int>();
        m.config.ff_hidden = c.at("ff_hidden").get<int>();
        m.config.head_hidden1 = c.at("head_hidden1").get<int>();
        m.config.head_hidden2 = c.at("head_hidden2").get<int>();
        m.config.relative_window = c.at("relative_window").get<int>();
        m.config.dropout = c.at("dropout").get<double>();
        m.config.validate();
        m.spec = spec_from_json(j.at("feature_spec"));
        const PolicyParams shape = init_params(m.config, 0);
        const auto& params = j.at("params");
        for (int b = 0; b < kNumBlocks; ++b) {
            const auto k = static_cast<std::size_t>(b);
            m.params.tensors[k] = io::matrix_from_json(params.at(std::string(block_name(static_cast<Block>(b)))));
            if (m.params.tensors[k].rows() != shape.tensors[k].rows() ||
                m.params.tensors[k].cols() != shape.tensors[k].cols())
                fail(ErrorKind::SchemaMismatch,
                     "parameter block " + std::string(block_name(static_cast<Block>(b))) + " has the wrong shape");
        }
    } catch (const io::json::exception& e) {
        fail(ErrorKind::SchemaMismatch, std::string("malformed policy checkpoint: ") + e.what());
    }
    return m;
}

void save_model(const std::string& path, const PolicyModel& model) { io::write_json(path, model_to_json(model)); }

PolicyModel load_model(const std::string& path) { return model_from_json(io::read_json(path)); }

// ---------------------------------------------------------------------------

PolicySession::PolicySession(const PolicyModel& model, const MatrixXd& raw_first_pass)
    : model_(&model),
      embeddings_(transformer(model.config, model.params, model.spec.normalize_first_pass(raw_first_pass),
                              nullptr, nullptr)),
      h_(RowVectorXd::Zero(model.config.recurrent)),
      c_(RowVectorXd::Zero(model.config.recurrent)) {}

PolicySession::Step PolicySession::step(const InputBundle& bundle) {
    if (t_ >= embeddings_.rows()) fail(ErrorKind::OutOfRange, "policy session stepped past the episode");
    const auto& cfg = model_->config;
    const auto& p = model_->params;
    RowVectorXd z(cfg.lstm_input() + cfg.recurrent);
    z << lstm_input_row(cfg, p, embeddings_.row(t_), bundle), h_;
    const LstmGates s = lstm_cell(cfg, p, z, c_);
    h_ = s.h;
    c_ = s.c;
    ++t_;
    const MatrixXd hs = h_;
    const MatrixXd qu2 = nn::gelu<double>(nn::linear<double>(
        nn::gelu<double>(nn::linear<double>(hs, p[Block::QpW1], p[Block::QpB1])), p[Block::QpW2], p[Block::QpB2]));
    const MatrixXd bu2 = nn::gelu<double>(nn::linear<double>(
        nn::gelu<double>(nn::linear<double>(hs, p[Block::BitsW1], p[Block::BitsB1])), p[Block::BitsW2],
        p[Block::BitsB2]));
    Step out;
    out.logits = nn::linear<double>(qu2, p[Block::QpW3], p[Block::QpB3]).row(0);
    out.bits_kbit = model_->spec.bits_mean_kbit +
                    model_->spec.bits_std_kbit * nn::linear<double>(bu2, p[Block::BitsW3], p[Block::BitsB3])(0, 0);
    return out;
}

}  // namespace nrc::policy
