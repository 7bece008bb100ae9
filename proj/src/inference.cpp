#include "nrc/inference.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <numeric>

#include <Eigen/QR>

#include "nrc/error.hpp"
#include "nrc/metrics.hpp"
#include "nrc/parallel.hpp"

namespace nrc::inference {

namespace {

void check_logits(const Eigen::RowVectorXd& logits) {
    if (logits.size() != simenc::kNumQp) fail(ErrorKind::InvalidArgument, "expected 256 logits");
    if (!logits.allFinite()) fail(ErrorKind::InvalidArgument, "non-finite logits");
}

std::string utc_date() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Linear interpolation of a polyline sampled at t / (n - 1).
double interp_uniform(const std::vector<double>& y, double x) {
    const double pos = std::clamp(x, 0.0, 1.0) * static_cast<double>(y.size() - 1);
    const auto i = static_cast<std::size_t>(std::floor(pos));
    if (i + 1 >= y.size()) return y.back();
    const double u = pos - static_cast<double>(i);
    return y[i] + u * (y[i + 1] - y[i]);
}

/// Least squares for a1 log(x + c) + a4 x + a5 over a log grid of c.
LogBound fit_log_form(const std::vector<double>& xs, const std::vector<double>& ys) {
    const auto n = static_cast<Eigen::Index>(xs.size());
    Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(ys.data(), n);
    LogBound best;
    double best_sse = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= 80; ++k) {
        const double c = std::pow(10.0, -3.0 + 4.0 * k / 80.0);
        Eigen::MatrixXd a(n, 3);
        for (Eigen::Index i = 0; i < n; ++i) a.row(i) << std::log(xs[static_cast<std::size_t>(i)] + c), xs[static_cast<std::size_t>(i)], 1.0;
        const Eigen::Vector3d coef = a.colPivHouseholderQr().solve(y);
        const double sse = (a * coef - y).squaredNorm();
        if (coef.allFinite() && sse < best_sse) {
            best_sse = sse;
            best = LogBound{coef[0], 1.0, c, coef[1], coef[2]};
        }
    }
    if (!std::isfinite(best_sse)) fail(ErrorKind::FitFailure, "bound fit produced non-finite parameters");
    return best;
}

}  // namespace

std::vector<int> top_k(const Eigen::RowVectorXd& logits, int k) {
    require(k >= 1 && k <= logits.size(), "top-k size out of range");
    std::vector<int> idx(static_cast<std::size_t>(logits.size()));
    std::iota(idx.begin(), idx.end(), 0);
    std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), [&](int a, int b) {
        return logits[a] > logits[b] || (logits[a] == logits[b] && a < b);
    });
    idx.resize(static_cast<std::size_t>(k));
    return idx;
}

TruncatedDistribution truncated_distribution(const Eigen::RowVectorXd& logits, int k) {
    check_logits(logits);
    TruncatedDistribution d;
    d.qps = top_k(logits, k);
    const double m = logits[d.qps.front()];
    double z = 0.0;
    for (int q : d.qps) {
        d.probs.push_back(std::exp(logits[q] - m));
        z += d.probs.back();
    }
    for (double& p : d.probs) p /= z;
    return d;
}

int truncated_sample(const Eigen::RowVectorXd& logits, Rng& rng) {
    const TruncatedDistribution d = truncated_distribution(logits, kSamplePool);
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < d.qps.size(); ++i) {
        acc += d.probs[i];
        if (u < acc) return d.qps[i];
    }
    return d.qps.back();
}

std::vector<int> sorted_candidates(const Eigen::RowVectorXd& logits, int pool) {
    check_logits(logits);
    std::vector<int> c = top_k(logits, pool);
    std::sort(c.begin(), c.end());
    return c;
}

void FeedbackConfig::validate() const {
    require(alpha >= 0.0, "feedback alpha must be >= 0");
    require(sample_pool >= 1 && sample_pool <= candidates && candidates <= simenc::kNumQp,
            "feedback pools must satisfy 1 <= sample <= candidates <= 256");
}

int feedback_adjust(int i, double b_t, double lower, double upper, double alpha, int pool) {
    if (i < 1 || i > pool) fail(ErrorKind::OutOfRange, "candidate index out of range");
    if (b_t < lower) return std::clamp(i - static_cast<int>(std::lround(alpha * (lower - b_t))), 1, pool);
    if (b_t > upper) return std::clamp(i + static_cast<int>(std::lround(alpha * (b_t - upper))), 1, pool);
    return i;
}

// ---------------------------------------------------------------------------

double LogBound::operator()(double x) const { return a1 * std::log(a2 * x + a3) + a4 * x + a5; }

void BoundsConfig::validate() const {
    require(quantile_lo >= 0.0 && quantile_lo < quantile_hi && quantile_hi <= 1.0,
            "bound quantiles must satisfy 0 <= lo < hi <= 1");
    require(end_gap > 0.01 && end_gap < 1.0, "end gap must be in (0.01, 1)");
    require(min_traces >= 1 && grid_points >= 3, "invalid bounds fit sizes");
}

BoundsModel BoundsModel::unbounded(double target_kbps) {
    BoundsModel b;
    b.target_kbps = target_kbps;
    b.lower = LogBound{0.0, 1.0, 1.0, 0.0, -std::numeric_limits<double>::infinity()};
    b.upper = LogBound{0.0, 1.0, 1.0, 0.0, std::numeric_limits<double>::infinity()};
    return b;
}

std::vector<double> cumulative_kbps(const simenc::EpisodeTrace& trace) {
    require(trace.complete() && trace.duration > 0.0, "cumulative curve needs a complete trace");
    std::vector<double> out{0.0};
    double cum = 0.0;
    for (double b : trace.bits) {
        cum += b;
        out.push_back(cum / trace.duration / 1000.0);
    }
    return out;
}

BoundsModel fit_bounds(const std::vector<simenc::EpisodeTrace>& traces, double target_kbps,
                       const BoundsConfig& cfg) {
    cfg.validate();
    require(target_kbps > 0.0, "bounds target must be positive");
    if (static_cast<int>(traces.size()) < cfg.min_traces)
        fail(ErrorKind::InvalidArgument, "need at least " + std::to_string(cfg.min_traces) + " traces to fit bounds");
    const int G = cfg.grid_points;
    std::vector<double> xs(static_cast<std::size_t>(G)), lo(xs.size()), hi(xs.size());
    std::vector<std::vector<double>> curves;
    for (const auto& t : traces) {
        auto c = cumulative_kbps(t);
        for (double& v : c) v *= target_kbps / t.target_kbps;
        curves.push_back(std::move(c));
    }
    for (int g = 0; g < G; ++g) {
        const double x = static_cast<double>(g) / (G - 1);
        std::vector<double> ys;
        ys.reserve(curves.size());
        for (const auto& c : curves) ys.push_back(interp_uniform(c, x));
        xs[static_cast<std::size_t>(g)] = x;
        lo[static_cast<std::size_t>(g)] = metrics::percentile(ys, cfg.quantile_lo);
        hi[static_cast<std::size_t>(g)] = metrics::percentile(ys, cfg.quantile_hi);
    }

    BoundsModel b;
    b.target_kbps = target_kbps;
    b.quantile_lo = cfg.quantile_lo;
    b.quantile_hi = cfg.quantile_hi;
    b.fit_date = utc_date();
    b.lower = fit_log_form(xs, lo);
    b.upper = fit_log_form(xs, hi);

    // End tightening: pin bound(1) inside +-end_gap of the target, keeping a
    // strict gap between the two ends.
    const double lower_end = std::clamp(lo.back(), (1.0 - cfg.end_gap) * target_kbps, 0.99 * target_kbps);
    const double upper_end = std::clamp(hi.back(), 1.01 * target_kbps, (1.0 + cfg.end_gap) * target_kbps);
    b.lower.a4 += lower_end - b.lower(1.0);
    b.upper.a4 += upper_end - b.upper(1.0);

    // Coverage repair: shift along (1 - x) so the envelope quantiles stay
    // inside; the end values are unchanged.
    double d_lo = 0.0, d_hi = 0.0;
    for (std::size_t g = 0; g + 1 < xs.size(); ++g) {
        const double w = 1.0 - xs[g];
        d_lo = std::max(d_lo, (b.lower(xs[g]) - lo[g]) / w);
        d_hi = std::max(d_hi, (hi[g] - b.upper(xs[g])) / w);
    }
    b.lower.a4 += d_lo;
    b.lower.a5 -= d_lo;
    b.upper.a4 -= d_hi;
    b.upper.a5 += d_hi;

    for (const auto* f : {&b.lower, &b.upper})
        if (!std::isfinite(f->a1) || !std::isfinite(f->a3) || !std::isfinite(f->a4) || !std::isfinite(f->a5) ||
            !(f->a3 > 0.0))
            fail(ErrorKind::FitFailure, "bound fit produced non-finite parameters");
    for (int g = 0; g <= 10 * (G - 1); ++g) {
        const double x = static_cast<double>(g) / (10 * (G - 1));
        if (!(b.lower(x) <= b.upper(x))) fail(ErrorKind::FitFailure, "fitted bounds cross");
    }
    return b;
}

double bounds_coverage(const BoundsModel& bounds, const std::vector<simenc::EpisodeTrace>& traces,
                       int grid_points) {
    require(!traces.empty() && grid_points >= 2, "coverage needs traces and a grid");
    std::vector<std::vector<double>> curves;
    for (const auto& t : traces) curves.push_back(cumulative_kbps(t));
    double worst = 1.0;
    for (int g = 0; g < grid_points; ++g) {
        const double x = static_cast<double>(g) / (grid_points - 1);
        int inside = 0;
        for (std::size_t i = 0; i < traces.size(); ++i) {
            const double y = interp_uniform(curves[i], x);
            const double k = traces[i].target_kbps;
            if (y >= bounds.lower_at(x, k) && y <= bounds.upper_at(x, k)) ++inside;
        }
        worst = std::min(worst, static_cast<double>(inside) / static_cast<double>(traces.size()));
    }
    return worst;
}

io::json bounds_to_json(const BoundsModel& b) {
    auto coef = [](const LogBound& f) {
        return io::json{{"a1", f.a1}, {"a2", f.a2}, {"a3", f.a3}, {"a4", f.a4}, {"a5", f.a5}};
    };
    return {{"schema", kBoundsSchema},  {"lower", coef(b.lower)},         {"upper", coef(b.upper)},
            {"target_kbps", b.target_kbps}, {"quantile_lo", b.quantile_lo}, {"quantile_hi", b.quantile_hi},
            {"fit_date", b.fit_date}};
}

BoundsModel bounds_from_json(const io::json& j) {
    io::require_schema(j, kBoundsSchema);
    BoundsModel b;
    auto coef = [](const io::json& c) {
        return LogBound{c.at("a1").get<double>(), c.at("a2").get<double>(), c.at("a3").get<double>(),
                        c.at("a4").get<double>(), c.at("a5").get<double>()};
    };
    try {
        b.lower = coef(j.at("lower"));
        b.upper = coef(j.at("upper"));
        b.target_kbps = j.at("target_kbps").get<double>();
        b.quantile_lo = j.at("quantile_lo").get<double>();
        b.quantile_hi = j.at("quantile_hi").get<double>();
        b.fit_date = j.at("fit_date").get<std::string>();
    } catch (const io::json::exception& e) {
        fail(ErrorKind::SchemaMismatch, std::string("malformed bounds model: ") + e.what());
    }
    if (!(b.target_kbps > 0.0)) fail(ErrorKind::SchemaMismatch, "bounds target must be positive");
    return b;
}

// ---------------------------------------------------------------------------

PolicyRunner::PolicyRunner(const policy::PolicyModel& model, std::uint64_t seed, SampleMode mode)
    : model_(&model), rng_(seed), mode_(mode) {}

PolicyRunner::PolicyRunner(const policy::PolicyModel& model, std::uint64_t seed, const BoundsModel& bounds,
                           const FeedbackConfig& feedback)
    : model_(&model), rng_(seed), mode_(SampleMode::Truncated), bounds_(bounds), feedback_(feedback) {
    feedback_.validate();
}

int PolicyRunner::operator()(const simenc::Observation& obs) {
    require(obs.video != nullptr, "observation carries no video");
    if (obs.step.frame_index == 0 || !session_) {
        session_ = std::make_unique<policy::PolicySession>(*model_, obs.video->first_pass_matrix());
        events_.clear();
    }
    const auto bundle = policy::build_features(obs.statics, obs.step, model_->spec, obs.step.prev_qp, obs.prev_reward);
    const auto out = session_->step(bundle);
    if (mode_ == SampleMode::Greedy) return top_k(out.logits, 1).front();
    const int sampled = truncated_sample(out.logits, rng_);
    if (!bounds_) return sampled;

    const std::vector<int> cands = sorted_candidates(out.logits, feedback_.candidates);
    const auto it = std::find(cands.begin(), cands.end(), sampled);
    require(it != cands.end(), "sampled QP outside the candidate pool");
    ControlEvent ev;
    ev.frame = obs.step.frame_index;
    ev.b_t = obs.step.cumulative_bits / obs.statics.duration / 1000.0;
    const double x = obs.step.frame_index / obs.statics.num_frames;
    ev.lower = bounds_->lower_at(x, obs.statics.target_kbps);
    ev.upper = bounds_->upper_at(x, obs.statics.target_kbps);
    ev.sampled_index = static_cast<int>(it - cands.begin()) + 1;
    ev.adjusted_index = feedback_adjust(ev.sampled_index, ev.b_t, ev.lower, ev.upper, feedback_.alpha,
                                        feedback_.candidates);
    ev.sampled_qp = sampled;
    ev.qp = cands[static_cast<std::size_t>(ev.adjusted_index - 1)];
    ev.active = ev.b_t < ev.lower || ev.b_t > ev.upper;
    events_.push_back(ev);
    return ev.qp;
}

simenc::PolicyCallback PolicyRunner::callback() {
    return [this](const simenc::Observation& o) { return (*this)(o); };
}

std::vector<simenc::EpisodeTrace> rollout_suite(const policy::PolicyModel& model,
                                                const std::vector<simenc::SyntheticVideo>& videos,
                                                const std::vector<std::pair<std::size_t, double>>& tasks,
                                                std::uint64_t seed, SampleMode mode, const BoundsModel* bounds,
                                                const FeedbackConfig& feedback, int gop_interval, int workers) {
    std::vector<simenc::EpisodeTrace> out(tasks.size());
    parallel_for(tasks.size(), workers, [&](std::size_t i) {
        const auto& video = videos.at(tasks[i].first);
        const auto gop = simenc::plan_gop(video, gop_interval);
        const std::uint64_t s = derive_seed(seed, i);
        PolicyRunner runner = bounds ? PolicyRunner(model, s, *bounds, feedback) : PolicyRunner(model, s, mode);
        out[i] = simenc::run_episode(video, gop, tasks[i].second, runner.callback());
    });
    return out;
}

}  // namespace nrc::inference
