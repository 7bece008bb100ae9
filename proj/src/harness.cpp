#include "nrc/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "nrc/baseline.hpp"
#include "nrc/parallel.hpp"

#ifndef NRC_VERSION
#define NRC_VERSION "0.0.0"
#endif
#ifndef NRC_GIT_DESCRIBE
#define NRC_GIT_DESCRIBE "unknown"
#endif

namespace nrc::harness {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fixed(double v, int digits) {
    if (std::isnan(v)) return "nan";
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(digits) << v;
    return ss.str();
}

std::string sanitize(const std::string& s) {
    std::string out;
    for (char c : s) out.push_back(std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
    return out;
}

}  // namespace

ExperimentConfig ExperimentConfig::defaults() {
    ExperimentConfig c;
    c.es.antithetic = true;
    c.es.evaluate_mean = true;
    c.train.epochs = 40;
    return c;
}

void ExperimentConfig::validate() const {
    require(corpus_count >= 1, "corpus count must be >= 1");
    require(eval_count >= 1, "evaluation suite size must be >= 1");
    require(workers >= 1, "workers must be >= 1");
    require(!reference_multipliers.empty() && !eval_targets.empty(), "reference anchors and targets required");
    for (double m : reference_multipliers) require(m > 0.0, "reference multipliers must be positive");
    for (double t : eval_targets) require(t > 0.0, "evaluation targets must be positive");
    video.validate();
    es.validate();
    train.validate();
    feedback.validate();
    bounds.validate();
    require(dataset.bitrates_per_video >= 1 && dataset.min_kbps > 0.0 && dataset.max_kbps >= dataset.min_kbps,
            "invalid dataset bitrate settings");
}

io::json ExperimentConfig::to_json() const {
    return {{"corpus",
             {{"count", corpus_count},
              {"seed", corpus_seed},
              {"min_frames", video.min_frames},
              {"max_frames", video.max_frames},
              {"width", video.width},
              {"height", video.height},
              {"frame_rate", video.frame_rate}}},
            {"dataset",
             {{"bitrates_per_video", dataset.bitrates_per_video},
              {"min_kbps", dataset.min_kbps},
              {"max_kbps", dataset.max_kbps},
              {"gop_interval", dataset.gop_interval},
              {"max_baseline_drift", dataset.max_baseline_drift},
              {"seed", dataset.seed}}},
            {"es",
             {{"sigma", es.sigma},
              {"batch", es.batch},
              {"learning_rate", es.learning_rate},
              {"decay_rate", es.decay_rate},
              {"decay_steps", es.decay_steps},
              {"max_steps", es.max_steps},
              {"lambda", es.lambda},
              {"antithetic", es.antithetic},
              {"evaluate_mean", es.evaluate_mean},
              {"seed", es.seed}}},
            {"train",
             {{"beta1", train.beta1},
              {"beta2", train.beta2},
              {"bits_unit_kbit", train.bits_unit_kbit},
              {"learning_rate", train.learning_rate},
              {"adam_beta1", train.adam_beta1},
              {"adam_beta2", train.adam_beta2},
              {"adam_eps", train.adam_eps},
              {"clip_norm", train.clip_norm},
              {"batch_size", train.batch_size},
              {"epochs", train.epochs},
              {"dropout", train.dropout},
              {"seed", train.seed},
              {"preset", train.preset}}},
            {"feedback", {{"alpha", feedback.alpha}, {"candidates", feedback.candidates}, {"sample_pool", feedback.sample_pool}}},
            {"bounds",
             {{"quantile_lo", bounds.quantile_lo},
              {"quantile_hi", bounds.quantile_hi},
              {"end_gap", bounds.end_gap},
              {"min_traces", bounds.min_traces}}},
            {"eval",
             {{"reference_multipliers", reference_multipliers},
              {"targets", eval_targets},
              {"count", eval_count},
              {"seed", eval_seed}}}};
}

std::uint64_t ExperimentConfig::hash() const { return io::fnv1a(to_json().dump()); }

std::string resolve_output_dir(const std::string& explicit_dir) {
    if (!explicit_dir.empty()) return explicit_dir;
    if (const char* env = std::getenv(kOutputRootEnv); env && *env) return env;
    return "out";
}

int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidArgument: return 2;
        case ErrorKind::MissingInput: return 3;
        case ErrorKind::SchemaMismatch: return 4;
        default: return 1;
    }
}

std::vector<simenc::SyntheticVideo> generate_corpus(int count, std::uint64_t seed,
                                                    const simenc::VideoConfig& config, const std::string& prefix) {
    require(count >= 0, "corpus count must be >= 0");
    std::vector<simenc::SyntheticVideo> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        std::ostringstream id;
        id << prefix << std::setw(4) << std::setfill('0') << i;
        out.push_back(simenc::generate_video(derive_seed(seed, static_cast<std::uint64_t>(i)), config, id.str()));
    }
    return out;
}

std::vector<Task> cross_tasks(std::size_t num_videos, const std::vector<double>& targets) {
    std::vector<Task> out;
    for (std::size_t v = 0; v < num_videos; ++v)
        for (double t : targets) out.emplace_back(v, t);
    return out;
}

std::vector<simenc::EpisodeTrace> reference_traces(const std::vector<simenc::SyntheticVideo>& videos,
                                                   const std::vector<Task>& tasks,
                                                   const std::vector<double>& multipliers, int gop_interval,
                                                   int workers) {
    std::set<std::pair<std::size_t, double>> anchors;
    for (const auto& [v, t] : tasks)
        for (double m : multipliers) anchors.emplace(v, t * m);
    const std::vector<Task> list(anchors.begin(), anchors.end());
    return baseline_suite(videos, list, gop_interval, workers);
}

std::vector<simenc::EpisodeTrace> baseline_suite(const std::vector<simenc::SyntheticVideo>& videos,
                                                 const std::vector<Task>& tasks, int gop_interval, int workers) {
    std::vector<simenc::EpisodeTrace> out(tasks.size());
    parallel_for(tasks.size(), workers, [&](std::size_t i) {
        const auto& video = videos.at(tasks[i].first);
        out[i] = baseline::run_baseline(video, simenc::plan_gop(video, gop_interval), tasks[i].second);
    });
    return out;
}

metrics::SuiteSummary evaluate(const std::vector<simenc::EpisodeTrace>& policy,
                               const std::vector<simenc::EpisodeTrace>& reference, double tolerance) {
    return metrics::summarize_suite(policy, metrics::curves_by_video(reference), tolerance);
}

io::json summary_to_json(const metrics::SuiteSummary& s, const std::string& label) {
    auto num = [](double v) { return std::isnan(v) ? io::json(nullptr) : io::json(v); };
    return {{"schema", kSummarySchema},
            {"label", label},
            {"episodes", s.videos.size()},
            {"out_of_span", s.out_of_span},
            {"median_proj_bitrate_diff_pct", num(s.median_proj_bitrate_diff_pct)},
            {"p10_proj_bitrate_diff_pct", num(s.p10_proj_bitrate_diff_pct)},
            {"p90_proj_bitrate_diff_pct", num(s.p90_proj_bitrate_diff_pct)},
            {"median_proj_psnr_diff_db", num(s.median_proj_psnr_diff_db)},
            {"median_abs_bitrate_error_pct", num(s.median_abs_bitrate_error_pct)},
            {"accuracy",
             {{"under", s.accuracy.under},
              {"within", s.accuracy.within},
              {"over", s.accuracy.over},
              {"within_fraction", s.accuracy.within_fraction()}}}};
}

std::string write_manifest(const std::string& dir, const Manifest& m) {
    std::filesystem::create_directories(dir);
    const auto& c = m.config;
    io::json seeds = io::json::object();
    for (const char* section : {"corpus", "dataset", "es", "train", "eval"})
        if (c.contains(section) && c.at(section).contains("seed")) seeds[section] = c.at(section).at("seed");
    std::ostringstream hash;
    hash << std::hex << std::setw(16) << std::setfill('0') << m.config_hash;
    const io::json doc = {{"schema", kManifestSchema},
                          {"command", m.command},
                          {"config_hash", hash.str()},
                          {"seeds", seeds},
                          {"version", NRC_VERSION},
                          {"git", NRC_GIT_DESCRIBE},
                          {"config", c},
                          {"inputs", m.inputs},
                          {"outputs", m.outputs}};
    const std::string path = (std::filesystem::path(dir) / ("manifest-" + m.command + ".json")).string();
    io::write_json(path, doc);
    return path;
}

// ---------------------------------------------------------------------------

std::vector<HistogramBin> histogram(const std::vector<double>& values, int bins) {
    require(bins >= 1, "histogram needs at least one bin");
    std::vector<double> v;
    for (double x : values)
        if (std::isfinite(x)) v.push_back(x);
    if (v.empty()) return {};
    const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
    const double lo = *mn, hi = *mx;
    if (!(hi > lo)) return {HistogramBin{lo, hi, static_cast<int>(v.size())}};
    std::vector<HistogramBin> out(static_cast<std::size_t>(bins));
    const double w = (hi - lo) / bins;
    for (int b = 0; b < bins; ++b) {
        out[static_cast<std::size_t>(b)].lo = lo + b * w;
        out[static_cast<std::size_t>(b)].hi = b + 1 == bins ? hi : lo + (b + 1) * w;
    }
    for (double x : v) {
        const int b = std::min(bins - 1, static_cast<int>((x - lo) / w));
        ++out[static_cast<std::size_t>(b)].count;
    }
    return out;
}

io::CsvTable histogram_csv(const std::vector<HistogramBin>& bins) {
    io::CsvTable t;
    t.header = {"bin_lo", "bin_hi", "count"};
    for (const auto& b : bins) t.rows.push_back({io::format_double(b.lo), io::format_double(b.hi), std::to_string(b.count)});
    return t;
}

AblationRow ablation_row(const LabeledEvaluation& e, double tolerance) {
    AblationRow row;
    row.label = e.label;
    row.episodes = static_cast<int>(e.rows.size());
    std::vector<double> bd, pd;
    for (const auto& r : e.rows) {
        bd.push_back(r.proj_bitrate_diff_pct);
        pd.push_back(r.proj_psnr_diff_db);
        const double err = r.bitrate_kbps / r.target_kbps - 1.0;
        if (err < -tolerance) ++row.accuracy.under;
        else if (err > tolerance) ++row.accuracy.over;
        else ++row.accuracy.within;
    }
    row.median_proj_bitrate_diff_pct = metrics::median(bd);
    row.median_proj_psnr_diff_db = metrics::median(pd);
    return row;
}

Report make_report(const std::vector<LabeledEvaluation>& evaluations, int bins) {
    if (evaluations.empty()) fail(ErrorKind::InvalidArgument, "report needs at least one evaluation");
    Report rep;
    std::ostringstream text;
    text << "label                     episodes  med_proj_bitrate_%  med_proj_psnr_dB  within5%  under  over\n";
    for (const auto& e : evaluations) {
        if (e.rows.empty()) fail(ErrorKind::InvalidArgument, "evaluation '" + e.label + "' is empty");
        const AblationRow row = ablation_row(e);
        rep.ablation.push_back(row);
        text << std::left << std::setw(26) << row.label << std::right << std::setw(8) << row.episodes
             << std::setw(20) << fixed(row.median_proj_bitrate_diff_pct, 3) << std::setw(18)
             << fixed(row.median_proj_psnr_diff_db, 3) << std::setw(10) << fixed(row.accuracy.within_fraction(), 3)
             << std::setw(7) << row.accuracy.under << std::setw(6) << row.accuracy.over << '\n';
        std::vector<double> bd, pd, err;
        for (const auto& r : e.rows) {
            bd.push_back(r.proj_bitrate_diff_pct);
            pd.push_back(r.proj_psnr_diff_db);
            err.push_back(100.0 * (r.bitrate_kbps / r.target_kbps - 1.0));
        }
        rep.histograms.emplace_back(e.label + "/proj_bitrate_diff_pct", histogram(bd, bins));
        rep.histograms.emplace_back(e.label + "/proj_psnr_diff_db", histogram(pd, bins));
        rep.histograms.emplace_back(e.label + "/bitrate_error_pct", histogram(err, bins));
    }
    text << "\nNegative projected-bitrate differences are savings relative to the baseline curve.\n"
         << "Reference real-codec result: 8.5% median projected-bitrate reduction.\n";
    rep.text = text.str();
    return rep;
}

std::vector<std::string> write_report(const std::string& dir, const Report& report) {
    std::filesystem::create_directories(dir);
    std::vector<std::string> written;
    const auto base = std::filesystem::path(dir);
    {
        const std::string p = (base / "report.txt").string();
        std::ofstream out(p);
        if (!out) fail(ErrorKind::Io, "cannot write " + p);
        out << report.text;
        written.push_back(p);
    }
    io::CsvTable ab;
    ab.header = {"label", "episodes", "median_proj_bitrate_diff_pct", "median_proj_psnr_diff_db",
                 "within_fraction", "under", "within", "over"};
    for (const auto& r : report.ablation)
        ab.rows.push_back({r.label, std::to_string(r.episodes), io::format_double(r.median_proj_bitrate_diff_pct),
                           io::format_double(r.median_proj_psnr_diff_db),
                           io::format_double(r.accuracy.within_fraction()), std::to_string(r.accuracy.under),
                           std::to_string(r.accuracy.within), std::to_string(r.accuracy.over)});
    written.push_back((base / "ablation.csv").string());
    io::write_csv(written.back(), ab);
    for (const auto& [name, bins] : report.histograms) {
        written.push_back((base / ("hist_" + sanitize(name) + ".csv")).string());
        io::write_csv(written.back(), histogram_csv(bins));
    }
    return written;
}

}  // namespace nrc::harness
