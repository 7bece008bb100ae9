#pragma once

// Experiment plumbing: configuration, corpus and suite helpers, evaluation
// against baseline RD curves, manifests and reports.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "nrc/error.hpp"
#include "nrc/inference.hpp"
#include "nrc/io.hpp"
#include "nrc/metrics.hpp"
#include "nrc/teacher.hpp"
#include "nrc/trainer.hpp"

namespace nrc::harness {

inline constexpr std::string_view kManifestSchema = "manifest.v1";
inline constexpr std::string_view kSummarySchema = "summary.v1";
inline constexpr const char* kOutputRootEnv = "NRC_OUTPUT_ROOT";

struct ExperimentConfig {
    int corpus_count = 100;
    std::uint64_t corpus_seed = 1;
    simenc::VideoConfig video;
    teacher::DatasetConfig dataset;
    teacher::EsConfig es;
    policy::TrainConfig train;
    inference::FeedbackConfig feedback;
    inference::BoundsConfig bounds;
    /// Reference RD curve anchors, as multiples of each evaluation target.
    std::vector<double> reference_multipliers = {0.5, 0.7, 0.85, 1.0, 1.2, 1.4, 2.0};
    std::vector<double> eval_targets = {384.0, 640.0};
    int eval_count = 20;
    std::uint64_t eval_seed = 2;
    std::string output_dir;
    int workers = 1;

    /// Defaults used by the CLI: mirrored ES noise and mean scoring enabled.
    static ExperimentConfig defaults();
    void validate() const;
    io::json to_json() const;
    std::uint64_t hash() const;
};

/// Explicit value if non-empty, else $NRC_OUTPUT_ROOT, else "out".
std::string resolve_output_dir(const std::string& explicit_dir);

/// Process exit status for an error kind: 2 invalid arguments, 3 missing
/// input, 4 schema mismatch, 1 otherwise.
int exit_code(ErrorKind kind);

/// Videos with seeds derived from `seed` and ids "<prefix><index>".
std::vector<simenc::SyntheticVideo> generate_corpus(int count, std::uint64_t seed,
                                                    const simenc::VideoConfig& config,
                                                    const std::string& prefix = "vid");

using Task = std::pair<std::size_t, double>;

/// Every video crossed with every target.
std::vector<Task> cross_tasks(std::size_t num_videos, const std::vector<double>& targets);

/// Baseline traces at target x multiplier for each distinct (video, target).
std::vector<simenc::EpisodeTrace> reference_traces(const std::vector<simenc::SyntheticVideo>& videos,
                                                   const std::vector<Task>& tasks,
                                                   const std::vector<double>& multipliers,
                                                   int gop_interval = simenc::kDefaultGopInterval,
                                                   int workers = 1);

std::vector<simenc::EpisodeTrace> baseline_suite(const std::vector<simenc::SyntheticVideo>& videos,
                                                 const std::vector<Task>& tasks,
                                                 int gop_interval = simenc::kDefaultGopInterval,
                                                 int workers = 1);

metrics::SuiteSummary evaluate(const std::vector<simenc::EpisodeTrace>& policy,
                               const std::vector<simenc::EpisodeTrace>& reference,
                               double accuracy_tolerance = 0.05);

io::json summary_to_json(const metrics::SuiteSummary& s, const std::string& label);

struct Manifest {
    std::string command;
    std::uint64_t config_hash = 0;
    io::json config;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
};

/// Writes <dir>/manifest-<command>.json including seeds and the code version.
std::string write_manifest(const std::string& dir, const Manifest& manifest);

// ---------------------------------------------------------------------------
// Reports

struct HistogramBin {
    double lo = 0.0;
    double hi = 0.0;
    int count = 0;
};

/// Equal-width bins over the finite values; a zero-width range gives one bin.
std::vector<HistogramBin> histogram(const std::vector<double>& values, int bins = 20);
io::CsvTable histogram_csv(const std::vector<HistogramBin>& bins);

struct LabeledEvaluation {
    std::string label;
    std::vector<metrics::VideoComparison> rows;
};

struct AblationRow {
    std::string label;
    int episodes = 0;
    double median_proj_bitrate_diff_pct = 0.0;
    double median_proj_psnr_diff_db = 0.0;
    metrics::AccuracyBuckets accuracy;
};

AblationRow ablation_row(const LabeledEvaluation& e, double tolerance = 0.05);

struct Report {
    std::string text;
    std::vector<AblationRow> ablation;
    /// label -> histograms of projected bitrate diff, PSNR diff, bitrate error.
    std::vector<std::pair<std::string, std::vector<HistogramBin>>> histograms;
};

/// Throws InvalidArgument when there are no evaluations or one is empty.
Report make_report(const std::vector<LabeledEvaluation>& evaluations, int bins = 20);

/// Writes report.txt, ablation.csv and hist_<label>_<metric>.csv into `dir`.
std::vector<std::string> write_report(const std::string& dir, const Report& report);

}  // namespace nrc::harness
