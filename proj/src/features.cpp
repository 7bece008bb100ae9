#include "nrc/features.hpp"

#include <cmath>

#include "nrc/error.hpp"
#include "nrc/teacher.hpp"

namespace nrc::policy {

using simenc::FirstPassField;

namespace {

enum BundleIdx : int {
    kWidth, kHeight, kNumFrames, kDuration, kFrameRate, kTargetKbps, kEncodeSpeed,
    kPosition, kPrevQp, kHasPrev, kPrevBits, kPrevMse, kCumBits, kRelCumBits, kProgressGap,
    kPrevReward,
};

bool is_count_first_pass(int i) {
    switch (static_cast<FirstPassField>(i)) {
        case FirstPassField::FrameIndex:
        case FirstPassField::IntraError:
        case FirstPassField::CodedError:
        case FirstPassField::SrCodedError:
        case FirstPassField::FrameNoiseEnergy:
        case FirstPassField::InactiveZoneRows:
        case FirstPassField::InactiveZoneCols:
        case FirstPassField::FrameCount: return true;
        default: return false;
    }
}

Standardizer fit(const std::vector<Eigen::VectorXd>& rows, std::vector<bool> log1p,
                 std::vector<bool> normalize) {
    const auto n = static_cast<Eigen::Index>(log1p.size());
    Standardizer s;
    s.log1p = std::move(log1p);
    s.normalize = std::move(normalize);
    s.mean = Eigen::VectorXd::Zero(n);
    s.stddev = Eigen::VectorXd::Ones(n);
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(n), sq = Eigen::VectorXd::Zero(n);
    for (const auto& r : rows) {
        for (Eigen::Index i = 0; i < n; ++i) {
            const double v = s.log1p[i] ? std::log1p(r[i]) : r[i];
            sum[i] += v;
        }
    }
    const double count = static_cast<double>(rows.size());
    const Eigen::VectorXd mean = sum / count;
    for (const auto& r : rows) {
        for (Eigen::Index i = 0; i < n; ++i) {
            const double v = (s.log1p[i] ? std::log1p(r[i]) : r[i]) - mean[i];
            sq[i] += v * v;
        }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!s.normalize[i]) continue;
        s.mean[i] = mean[i];
        s.stddev[i] = std::sqrt(std::max(sq[i] / count, kVarianceFloor));
    }
    return s;
}

io::json standardizer_to_json(const Standardizer& s) {
    std::vector<double> mean(s.mean.data(), s.mean.data() + s.mean.size());
    std::vector<double> sd(s.stddev.data(), s.stddev.data() + s.stddev.size());
    std::vector<int> lg(s.log1p.begin(), s.log1p.end());
    std::vector<int> nm(s.normalize.begin(), s.normalize.end());
    return {{"mean", mean}, {"stddev", sd}, {"log1p", lg}, {"normalize", nm}};
}

Standardizer standardizer_from_json(const io::json& j, int expected) {
    Standardizer s;
    const auto mean = j.at("mean").get<std::vector<double>>();
    const auto sd = j.at("stddev").get<std::vector<double>>();
    const auto lg = j.at("log1p").get<std::vector<int>>();
    const auto nm = j.at("normalize").get<std::vector<int>>();
    if (static_cast<int>(mean.size()) != expected || sd.size() != mean.size() ||
        lg.size() != mean.size() || nm.size() != mean.size())
        fail(ErrorKind::SchemaMismatch, "feature standardizer has the wrong width");
    s.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), expected);
    s.stddev = Eigen::Map<const Eigen::VectorXd>(sd.data(), expected);
    for (int v : lg) s.log1p.push_back(v != 0);
    for (int v : nm) s.normalize.push_back(v != 0);
    for (double v : sd)
        if (!(v > 0.0)) fail(ErrorKind::SchemaMismatch, "feature stddev must be positive");
    return s;
}

}  // namespace

const std::array<std::string_view, kBundleDense>& bundle_names() {
    static const std::array<std::string_view, kBundleDense> names = {
        "width",         "height",      "num_frames",      "duration",     "frame_rate",
        "target_kbps",   "encode_speed", "position",       "prev_qp",      "has_prev",
        "prev_bits",     "prev_mse",    "cumulative_bits", "relative_cumulative_bits",
        "progress_gap",  "prev_reward"};
    return names;
}

double Standardizer::apply(int i, double v) const {
    const auto k = static_cast<std::size_t>(i);
    if (log1p[k]) v = std::log1p(std::max(v, 0.0));
    if (!normalize[k]) return v;
    return (v - mean[i]) / stddev[i];
}

int FeatureSpec::bundle_index(std::string_view name) {
    const auto& names = bundle_names();
    for (int i = 0; i < kBundleDense; ++i)
        if (names[static_cast<std::size_t>(i)] == name) return i;
    fail(ErrorKind::InvalidArgument, "unknown feature name: " + std::string(name));
}

Eigen::MatrixXd FeatureSpec::normalize_first_pass(const Eigen::MatrixXd& raw) const {
    if (!fitted) fail(ErrorKind::InvalidArgument, "feature spec is not fitted");
    require(raw.cols() == simenc::kNumFirstPassFeatures, "first-pass matrix must have 25 columns");
    Eigen::MatrixXd out(raw.rows(), raw.cols());
    for (Eigen::Index r = 0; r < raw.rows(); ++r)
        for (Eigen::Index c = 0; c < raw.cols(); ++c)
            out(r, c) = first_pass.apply(static_cast<int>(c), raw(r, c));
    return out;
}

Eigen::VectorXd raw_bundle(const simenc::StaticFeatures& st, const simenc::StepFeatures& step,
                           double prev_reward) {
    Eigen::VectorXd v(kBundleDense);
    v[kWidth] = st.width;
    v[kHeight] = st.height;
    v[kNumFrames] = st.num_frames;
    v[kDuration] = st.duration;
    v[kFrameRate] = st.frame_rate;
    v[kTargetKbps] = st.target_kbps;
    v[kEncodeSpeed] = st.encode_speed;
    const double last = std::max(1.0, st.num_frames - 1.0);
    v[kPosition] = step.frame_index / last;
    const bool has_prev = step.prev_qp >= 0;
    v[kPrevQp] = has_prev ? step.prev_qp / double(simenc::kMaxQp) : 0.0;
    v[kHasPrev] = has_prev ? 1.0 : 0.0;
    v[kPrevBits] = step.prev_bits;
    v[kPrevMse] = step.prev_mse;
    v[kCumBits] = step.cumulative_bits;
    v[kRelCumBits] = step.relative_cumulative_bits;
    v[kProgressGap] = step.relative_cumulative_bits - step.frame_index / std::max(1.0, st.num_frames);
    v[kPrevReward] = prev_reward;
    return v;
}

FeatureSpec fit_feature_spec(const std::vector<teacher::TeacherRecord>& records) {
    require(!records.empty(), "cannot fit features on an empty dataset");
    std::vector<Eigen::VectorXd> fp_rows, bundle_rows;
    double bits_sum = 0.0, bits_sq = 0.0;
    std::size_t bits_n = 0;
    for (const auto& r : records) {
        for (Eigen::Index t = 0; t < r.first_pass.rows(); ++t) fp_rows.push_back(r.first_pass.row(t).transpose());
        for (const auto& s : r.steps) bundle_rows.push_back(raw_bundle(r.statics, s, 0.0));
        for (double b : r.label_bits) {
            bits_sum += b / 1000.0;
            bits_sq += (b / 1000.0) * (b / 1000.0);
            ++bits_n;
        }
    }
    FeatureSpec spec;
    std::vector<bool> fp_log(simenc::kNumFirstPassFeatures), fp_norm(simenc::kNumFirstPassFeatures, true);
    for (int i = 0; i < simenc::kNumFirstPassFeatures; ++i) fp_log[static_cast<std::size_t>(i)] = is_count_first_pass(i);
    spec.first_pass = fit(fp_rows, fp_log, fp_norm);

    std::vector<bool> b_log(kBundleDense, false), b_norm(kBundleDense, false);
    for (int i : {kWidth, kHeight, kNumFrames, kPrevBits, kPrevMse, kCumBits}) b_log[static_cast<std::size_t>(i)] = true;
    for (int i : {kWidth, kHeight, kNumFrames, kDuration, kFrameRate, kTargetKbps, kEncodeSpeed,
                  kPrevBits, kPrevMse, kCumBits, kRelCumBits, kProgressGap})
        b_norm[static_cast<std::size_t>(i)] = true;
    spec.bundle = fit(bundle_rows, b_log, b_norm);

    const double n = static_cast<double>(bits_n);
    spec.bits_mean_kbit = bits_sum / n;
    spec.bits_std_kbit = std::sqrt(std::max(bits_sq / n - spec.bits_mean_kbit * spec.bits_mean_kbit, kVarianceFloor));
    spec.fitted = true;
    return spec;
}

InputBundle build_features(const simenc::StaticFeatures& statics, const simenc::StepFeatures& step,
                           const FeatureSpec& spec, int prev_qp, double prev_reward) {
    if (!spec.fitted) fail(ErrorKind::InvalidArgument, "feature spec is not fitted");
    if (prev_qp < -1 || prev_qp > simenc::kMaxQp) fail(ErrorKind::InvalidArgument, "prev_qp out of range");
    simenc::StepFeatures s = step;
    s.prev_qp = prev_qp;
    const Eigen::VectorXd raw = raw_bundle(statics, s, prev_reward);
    InputBundle b;
    b.dense.resize(kBundleDense);
    for (int i = 0; i < kBundleDense; ++i) b.dense[i] = spec.bundle.apply(i, raw[i]);
    b.frame_type = static_cast<int>(step.frame_type);
    b.prev_qp = prev_qp;
    return b;
}

std::vector<InputBundle> record_bundles(const teacher::TeacherRecord& record, const FeatureSpec& spec) {
    std::vector<InputBundle> out;
    out.reserve(record.steps.size());
    for (const auto& s : record.steps) out.push_back(build_features(record.statics, s, spec, s.prev_qp, 0.0));
    return out;
}

io::json spec_to_json(const FeatureSpec& spec) {
    if (!spec.fitted) fail(ErrorKind::InvalidArgument, "cannot serialize an unfitted feature spec");
    return {{"first_pass", standardizer_to_json(spec.first_pass)},
            {"bundle", standardizer_to_json(spec.bundle)},
            {"bundle_names", std::vector<std::string>(bundle_names().begin(), bundle_names().end())},
            {"bits_mean_kbit", spec.bits_mean_kbit},
            {"bits_std_kbit", spec.bits_std_kbit}};
}

FeatureSpec spec_from_json(const io::json& j) {
    FeatureSpec s;
    try {
        const auto names = j.at("bundle_names").get<std::vector<std::string>>();
        if (names != std::vector<std::string>(bundle_names().begin(), bundle_names().end()))
            fail(ErrorKind::SchemaMismatch, "feature bundle layout differs from this build");
        s.first_pass = standardizer_from_json(j.at("first_pass"), simenc::kNumFirstPassFeatures);
        s.bundle = standardizer_from_json(j.at("bundle"), kBundleDense);
        s.bits_mean_kbit = j.at("bits_mean_kbit").get<double>();
        s.bits_std_kbit = j.at("bits_std_kbit").get<double>();
    } catch (const io::json::exception& e) {
        fail(ErrorKind::SchemaMismatch, std::string("malformed feature spec: ") + e.what());
    }
    s.fitted = true;
    return s;
}

}  // namespace nrc::policy
