// Command-line driver for the rate-control experiment pipeline.

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nrc/baseline.hpp"
#include "nrc/harness.hpp"
#include "nrc/her.hpp"
#include "nrc/parallel.hpp"
#include "nrc/inference.hpp"
#include "nrc/teacher.hpp"
#include "nrc/trainer.hpp"

namespace fs = std::filesystem;
using namespace nrc;

namespace {

struct Paths {
    std::string videos, eval_videos, reference, dataset, her_dataset, policy, bounds, out, log, label, split = "train",
        mode = "truncated";
    std::vector<std::string> inputs;
    std::vector<double> targets;
    int count = -1;
    long long seed = -1;
    bool control = false;
};

void add_experiment_options(CLI::App& app, harness::ExperimentConfig& c) {
    auto* g = app.add_option_group("experiment");
    g->add_option("--output-dir", c.output_dir, "Output root (default $NRC_OUTPUT_ROOT or ./out)");
    g->add_option("--workers", c.workers, "Worker threads")->check(CLI::PositiveNumber);
    g->add_option("--corpus-count", c.corpus_count, "Training corpus size");
    g->add_option("--corpus-seed", c.corpus_seed, "Training corpus seed");
    g->add_option("--min-frames", c.video.min_frames);
    g->add_option("--max-frames", c.video.max_frames);
    g->add_option("--bitrates-per-video", c.dataset.bitrates_per_video);
    g->add_option("--min-kbps", c.dataset.min_kbps);
    g->add_option("--max-kbps", c.dataset.max_kbps);
    g->add_option("--dataset-seed", c.dataset.seed);
    g->add_option("--max-drift", c.dataset.max_baseline_drift);
    g->add_option("--es-sigma", c.es.sigma);
    g->add_option("--es-batch", c.es.batch);
    g->add_option("--es-lr", c.es.learning_rate);
    g->add_option("--es-decay-rate", c.es.decay_rate);
    g->add_option("--es-decay-steps", c.es.decay_steps);
    g->add_option("--es-steps", c.es.max_steps);
    g->add_option("--es-antithetic", c.es.antithetic);
    g->add_option("--es-evaluate-mean", c.es.evaluate_mean);
    g->add_option("--es-seed", c.es.seed);
    g->add_option("--lambda", c.es.lambda);
    g->add_option("--beta1", c.train.beta1);
    g->add_option("--beta2", c.train.beta2);
    g->add_option("--bits-unit", c.train.bits_unit_kbit, "Kilobits per unit in the size losses");
    g->add_option("--lr", c.train.learning_rate);
    g->add_option("--clip-norm", c.train.clip_norm);
    g->add_option("--batch-size", c.train.batch_size);
    g->add_option("--epochs", c.train.epochs);
    g->add_option("--dropout", c.train.dropout);
    g->add_option("--train-seed", c.train.seed);
    g->add_option("--preset", c.train.preset)->check(CLI::IsMember({"tiny", "full"}));
    g->add_option("--alpha", c.feedback.alpha, "Feedback index offset per kbps");
    g->add_option("--quantile-lo", c.bounds.quantile_lo);
    g->add_option("--quantile-hi", c.bounds.quantile_hi);
    g->add_option("--end-gap", c.bounds.end_gap);
    g->add_option("--eval-count", c.eval_count);
    g->add_option("--eval-seed", c.eval_seed);
    g->add_option("--eval-targets", c.eval_targets);
    g->add_option("--ref-multipliers", c.reference_multipliers);
}

std::string in_dir(const std::string& dir, const std::string& value, const std::string& fallback) {
    return value.empty() ? (fs::path(dir) / fallback).string() : value;
}

std::vector<std::pair<std::size_t, double>> dataset_tasks(const std::vector<simenc::SyntheticVideo>& videos,
                                                          const teacher::DatasetConfig& d) {
    std::vector<std::pair<std::size_t, double>> tasks;
    for (std::size_t v = 0; v < videos.size(); ++v)
        for (double k : teacher::sample_targets(d, v)) tasks.emplace_back(v, k);
    return tasks;
}

int run(int argc, char** argv) {
    CLI::App app{"Learned rate control on a surrogate two-pass encoder"};
    app.set_config("--config", "", "INI file; CLI flags override its values");
    app.fallthrough();
    app.require_subcommand(1);
    harness::ExperimentConfig cfg = harness::ExperimentConfig::defaults();
    add_experiment_options(app, cfg);
    Paths p;

    auto* gen = app.add_subcommand("gen-videos", "Generate a synthetic corpus");
    gen->add_option("--split", p.split, "train or eval")->check(CLI::IsMember({"train", "eval"}));
    gen->add_option("--count", p.count, "Overrides the split's corpus size");
    gen->add_option("--seed", p.seed, "Overrides the split's corpus seed");
    gen->add_option("--out", p.out);

    auto* base = app.add_subcommand("run-baseline", "Baseline traces at the evaluation targets and RD anchors");
    base->add_option("--videos", p.videos);
    base->add_option("--targets", p.targets, "Targets in kbps (default: --eval-targets)");
    base->add_option("--out", p.out);

    auto* es = app.add_subcommand("run-es", "ES teacher search; writes the best traces");
    es->add_option("--videos", p.videos);
    es->add_option("--out", p.out);

    auto* build = app.add_subcommand("build-dataset", "ES teacher dataset");
    build->add_option("--videos", p.videos);
    build->add_option("--out", p.out);

    auto* train = app.add_subcommand("train", "Imitation training");
    train->add_option("--dataset", p.dataset);
    train->add_option("--out", p.out);
    train->add_option("--log", p.log);

    auto* her = app.add_subcommand("her-refine", "Hindsight relabel and retrain");
    her->add_option("--policy", p.policy);
    her->add_option("--dataset", p.dataset);
    her->add_option("--videos", p.videos);
    her->add_option("--her-dataset", p.her_dataset);
    her->add_option("--out", p.out);
    her->add_option("--log", p.log);

    auto* fit = app.add_subcommand("fit-bounds", "Fit cumulative-bitrate envelope bounds");
    fit->add_option("--dataset", p.dataset);
    fit->add_option("--out", p.out);
    double bounds_target = 512.0;
    fit->add_option("--target", bounds_target, "Reference target (kbps)");

    auto* eval = app.add_subcommand("evaluate", "Evaluate a policy against baseline RD curves");
    eval->add_option("--videos", p.eval_videos);
    eval->add_option("--reference", p.reference, "Baseline reference traces (computed when absent)");
    eval->add_option("--mode", p.mode, "baseline, es, truncated or greedy")
        ->check(CLI::IsMember({"baseline", "es", "truncated", "greedy"}));
    eval->add_option("--policy", p.policy);
    eval->add_option("--bounds", p.bounds, "Enables feedback control");
    eval->add_option("--label", p.label);
    eval->add_option("--targets", p.targets);

    auto* rep = app.add_subcommand("report", "Histograms and ablation table from evaluation CSVs");
    rep->add_option("inputs", p.inputs, "label=path.csv entries, or paths (label from file name)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }
    cfg.output_dir = harness::resolve_output_dir(cfg.output_dir);
    cfg.validate();
    const std::string& dir = cfg.output_dir;
    fs::create_directories(dir);
    harness::Manifest manifest;
    manifest.config = cfg.to_json();
    manifest.config_hash = cfg.hash();

    if (*gen) {
        const bool is_eval = p.split == "eval";
        const int count = p.count >= 0 ? p.count : (is_eval ? cfg.eval_count : cfg.corpus_count);
        const std::uint64_t seed = p.seed >= 0 ? static_cast<std::uint64_t>(p.seed) : (is_eval ? cfg.eval_seed : cfg.corpus_seed);
        const auto videos = harness::generate_corpus(count, seed, cfg.video, is_eval ? "eval" : "vid");
        const std::string out = in_dir(dir, p.out, is_eval ? "eval_videos.jsonl" : "videos.jsonl");
        simenc::write_videos(out, videos);
        manifest.command = "gen-videos-" + p.split;
        manifest.config["corpus"]["count"] = count;
        manifest.config["corpus"]["seed"] = seed;
        manifest.outputs = {out};
    } else if (*base) {
        const std::string vpath = in_dir(dir, p.videos, "eval_videos.jsonl");
        const auto videos = simenc::read_videos(vpath);
        const auto targets = p.targets.empty() ? cfg.eval_targets : p.targets;
        const auto traces = harness::reference_traces(videos, harness::cross_tasks(videos.size(), targets),
                                                      cfg.reference_multipliers, cfg.dataset.gop_interval, cfg.workers);
        const std::string out = in_dir(dir, p.out, "reference.jsonl");
        simenc::write_traces(out, traces);
        manifest.command = "run-baseline";
        manifest.inputs = {vpath};
        manifest.outputs = {out};
    } else if (*es) {
        const std::string vpath = in_dir(dir, p.videos, "videos.jsonl");
        const auto videos = simenc::read_videos(vpath);
        const auto tasks = dataset_tasks(videos, cfg.dataset);
        std::vector<simenc::EpisodeTrace> traces(tasks.size());
        parallel_for(tasks.size(), cfg.workers, [&](std::size_t i) {
            const auto& v = videos[tasks[i].first];
            teacher::EsConfig c = cfg.es;
            c.seed = derive_seed(cfg.es.seed, i);
            traces[i] = teacher::run_es(v, simenc::plan_gop(v, cfg.dataset.gop_interval), tasks[i].second, c).trace;
        });
        const std::string out = in_dir(dir, p.out, "es_traces.jsonl");
        simenc::write_traces(out, traces);
        manifest.command = "run-es";
        manifest.inputs = {vpath};
        manifest.outputs = {out};
    } else if (*build) {
        const std::string vpath = in_dir(dir, p.videos, "videos.jsonl");
        const auto videos = simenc::read_videos(vpath);
        teacher::DatasetConfig d = cfg.dataset;
        d.workers = cfg.workers;
        const auto records = teacher::build_teacher_dataset(videos, d, cfg.es);
        const std::string out = in_dir(dir, p.out, "teacher.jsonl");
        teacher::write_dataset(out, records);
        manifest.command = "build-dataset";
        manifest.inputs = {vpath};
        manifest.outputs = {out};
    } else if (*train) {
        const std::string dpath = in_dir(dir, p.dataset, "teacher.jsonl");
        const auto records = teacher::read_dataset(dpath);
        policy::TrainConfig tc = cfg.train;
        tc.workers = cfg.workers;
        const auto result = policy::train(records, tc);
        const std::string out = in_dir(dir, p.out, "policy.json");
        const std::string log = in_dir(dir, p.log, "train_log.csv");
        policy::save_model(out, result.model);
        policy::write_train_log(log, result.log);
        manifest.command = "train";
        manifest.inputs = {dpath};
        manifest.outputs = {out, log};
    } else if (*her) {
        const std::string ppath = in_dir(dir, p.policy, "policy.json");
        const std::string dpath = in_dir(dir, p.dataset, "teacher.jsonl");
        const std::string vpath = in_dir(dir, p.videos, "videos.jsonl");
        const auto model = policy::load_model(ppath);
        const auto records = teacher::read_dataset(dpath);
        const auto videos = simenc::read_videos(vpath);
        policy::HerConfig hc;
        hc.seed = derive_seed(cfg.train.seed, 7);
        hc.gop_interval = cfg.dataset.gop_interval;
        hc.workers = cfg.workers;
        std::map<std::string, std::size_t> index;
        for (std::size_t i = 0; i < videos.size(); ++i) index.emplace(videos[i].video_id, i);
        std::vector<std::pair<std::size_t, double>> tasks;
        for (const auto& r : records)
            if (r.provenance == teacher::Provenance::Es) {
                const auto it = index.find(r.video_id);
                if (it == index.end()) fail(ErrorKind::MissingInput, "no video for record " + r.video_id);
                tasks.emplace_back(it->second, r.target_kbps);
            }
        const auto relabeled = policy::her_relabel(model, videos, tasks, hc);
        std::vector<teacher::TeacherRecord> all = records;
        all.insert(all.end(), relabeled.begin(), relabeled.end());
        policy::TrainConfig tc = cfg.train;
        tc.workers = cfg.workers;
        const auto result = policy::train(all, tc, model.config);
        const std::string hpath = in_dir(dir, p.her_dataset, "her.jsonl");
        const std::string out = in_dir(dir, p.out, "policy_her.json");
        const std::string log = in_dir(dir, p.log, "train_log_her.csv");
        teacher::write_dataset(hpath, relabeled);
        policy::save_model(out, result.model);
        policy::write_train_log(log, result.log);
        manifest.command = "her-refine";
        manifest.inputs = {ppath, dpath, vpath};
        manifest.outputs = {hpath, out, log};
    } else if (*fit) {
        const std::string dpath = in_dir(dir, p.dataset, "teacher.jsonl");
        std::vector<simenc::EpisodeTrace> traces;
        for (const auto& r : teacher::read_dataset(dpath)) traces.push_back(teacher::record_trace(r));
        const auto bounds = inference::fit_bounds(traces, bounds_target, cfg.bounds);
        const std::string out = in_dir(dir, p.out, "bounds.json");
        io::write_json(out, inference::bounds_to_json(bounds));
        manifest.command = "fit-bounds";
        manifest.inputs = {dpath};
        manifest.outputs = {out};
    } else if (*eval) {
        const std::string vpath = in_dir(dir, p.eval_videos, "eval_videos.jsonl");
        const auto videos = simenc::read_videos(vpath);
        const auto targets = p.targets.empty() ? cfg.eval_targets : p.targets;
        const auto tasks = harness::cross_tasks(videos.size(), targets);
        std::vector<simenc::EpisodeTrace> reference;
        if (!p.reference.empty()) {
            reference = simenc::read_traces(p.reference);
            manifest.inputs.push_back(p.reference);
        } else {
            reference = harness::reference_traces(videos, tasks, cfg.reference_multipliers,
                                                  cfg.dataset.gop_interval, cfg.workers);
        }
        std::vector<simenc::EpisodeTrace> traces;
        std::string label = p.label.empty() ? p.mode : p.label;
        if (p.mode == "baseline") {
            traces = harness::baseline_suite(videos, tasks, cfg.dataset.gop_interval, cfg.workers);
        } else if (p.mode == "es") {
            traces.resize(tasks.size());
            parallel_for(tasks.size(), cfg.workers, [&](std::size_t i) {
                const auto& v = videos[tasks[i].first];
                teacher::EsConfig c = cfg.es;
                c.seed = derive_seed(cfg.es.seed, 1000000 + i);
                traces[i] = teacher::run_es(v, simenc::plan_gop(v, cfg.dataset.gop_interval), tasks[i].second, c).trace;
            });
        } else {
            const std::string ppath = in_dir(dir, p.policy, "policy.json");
            const auto model = policy::load_model(ppath);
            manifest.inputs.push_back(ppath);
            std::optional<inference::BoundsModel> bounds;
            if (!p.bounds.empty()) {
                bounds = inference::bounds_from_json(io::read_json(p.bounds));
                manifest.inputs.push_back(p.bounds);
            }
            const auto mode = p.mode == "greedy" ? inference::SampleMode::Greedy : inference::SampleMode::Truncated;
            traces = inference::rollout_suite(model, videos, tasks, cfg.eval_seed, mode, bounds ? &*bounds : nullptr,
                                              cfg.feedback, cfg.dataset.gop_interval, cfg.workers);
        }
        const auto summary = harness::evaluate(traces, reference);
        const std::string csv = (fs::path(dir) / ("eval_" + label + ".csv")).string();
        const std::string js = (fs::path(dir) / ("summary_" + label + ".json")).string();
        const std::string tr = (fs::path(dir) / ("traces_" + label + ".jsonl")).string();
        io::write_csv(csv, metrics::comparisons_to_csv(summary.videos));
        io::write_json(js, harness::summary_to_json(summary, label));
        simenc::write_traces(tr, traces);
        std::cout << harness::summary_to_json(summary, label).dump(2) << '\n';
        manifest.command = "evaluate-" + label;
        manifest.inputs.push_back(vpath);
        manifest.outputs = {csv, js, tr};
    } else if (*rep) {
        std::vector<harness::LabeledEvaluation> evals;
        for (const auto& entry : p.inputs) {
            harness::LabeledEvaluation e;
            std::string path = entry;
            if (const auto eq = entry.find('='); eq != std::string::npos) {
                e.label = entry.substr(0, eq);
                path = entry.substr(eq + 1);
            } else {
                e.label = fs::path(entry).stem().string();
                if (e.label.rfind("eval_", 0) == 0) e.label = e.label.substr(5);
            }
            e.rows = metrics::comparisons_from_csv(io::read_csv(path));
            evals.push_back(std::move(e));
            manifest.inputs.push_back(path);
        }
        const auto report = harness::make_report(evals);
        manifest.outputs = harness::write_report(dir, report);
        std::cout << report.text;
        manifest.command = "report";
    }
    harness::write_manifest(dir, manifest);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const nrc::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return harness::exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
