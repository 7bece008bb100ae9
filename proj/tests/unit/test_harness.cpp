#include <doctest.h>

#include <cstdlib>
#include <filesystem>

#include "nrc/error.hpp"
#include "nrc/harness.hpp"

using namespace nrc;
using namespace nrc::harness;

TEST_CASE("output dir precedence") {
    ::setenv(kOutputRootEnv, "/tmp/from_env", 1);
    CHECK(resolve_output_dir("explicit") == "explicit");
    CHECK(resolve_output_dir("") == "/tmp/from_env");
    ::unsetenv(kOutputRootEnv);
    CHECK(resolve_output_dir("") == "out");
}

TEST_CASE("exit codes by error kind") {
    CHECK(exit_code(ErrorKind::InvalidArgument) == 2);
    CHECK(exit_code(ErrorKind::MissingInput) == 3);
    CHECK(exit_code(ErrorKind::SchemaMismatch) == 4);
    CHECK(exit_code(ErrorKind::Divergence) == 1);
}

TEST_CASE("config defaults validate and hash stably") {
    const auto a = ExperimentConfig::defaults();
    CHECK_NOTHROW(a.validate());
    CHECK(a.es.antithetic);
    CHECK(a.hash() == ExperimentConfig::defaults().hash());
    auto b = a;
    b.es.sigma = 5.0;
    CHECK(a.hash() != b.hash());
    b = a;
    b.eval_count = 0;
    CHECK_THROWS_AS(b.validate(), Error);
}

TEST_CASE("corpus ids and determinism") {
    simenc::VideoConfig vc;
    vc.min_frames = vc.max_frames = 10;
    const auto a = generate_corpus(3, 7, vc, "t");
    const auto b = generate_corpus(3, 7, vc, "t");
    REQUIRE(a.size() == 3);
    CHECK(a[0].video_id == "t0000");
    CHECK(a[2].video_id == "t0002");
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(simenc::video_to_json(a[i]) == simenc::video_to_json(b[i]));
    CHECK(cross_tasks(2, {100.0, 200.0}).size() == 4);
}

TEST_CASE("baseline evaluated against its own curve has zero projected diff") {
    simenc::VideoConfig vc;
    vc.min_frames = vc.max_frames = 30;
    const auto videos = generate_corpus(4, 3, vc);
    const auto tasks = cross_tasks(videos.size(), {500.0});
    const auto ref = reference_traces(videos, tasks, {0.5, 1.0, 2.0});
    const auto base = baseline_suite(videos, tasks);
    const auto s = evaluate(base, ref);
    CHECK(s.median_proj_bitrate_diff_pct == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(s.median_proj_psnr_diff_db == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(summary_to_json(s, "baseline")["schema"] == kSummarySchema);
}

TEST_CASE("single value histogram has one bin") {
    const auto h = histogram({3.5}, 20);
    REQUIRE(h.size() == 1);
    CHECK(h[0].count == 1);
    CHECK(h[0].lo <= 3.5);
    CHECK(h[0].hi >= 3.5);
    const auto h2 = histogram({0.0, 1.0, 2.0, 3.0}, 3);
    int total = 0;
    for (const auto& b : h2) total += b.count;
    CHECK(total == 4);
    CHECK(histogram_csv(h2).header == std::vector<std::string>{"bin_lo", "bin_hi", "count"});
}

TEST_CASE("report on a single video") {
    LabeledEvaluation e{"policy", {{"v", 500.0, 505.0, 35.0, -2.0, -0.4, 0.05}}};
    const auto rep = make_report({e});
    REQUIRE(rep.ablation.size() == 1);
    CHECK(rep.ablation[0].median_proj_bitrate_diff_pct == -0.4);
    CHECK(rep.ablation[0].median_proj_psnr_diff_db == 0.05);
    CHECK(rep.ablation[0].accuracy.within == 1);
    for (const auto& [name, bins] : rep.histograms) CHECK(bins.size() == 1);
    CHECK(rep.text.find("8.5%") != std::string::npos);
    CHECK_THROWS_AS(make_report({}), Error);
    CHECK_THROWS_AS(make_report({{"empty", {}}}), Error);

    const auto dir = (std::filesystem::temp_directory_path() / "nrc_report").string();
    const auto files = write_report(dir, rep);
    for (const auto& f : files) CHECK(std::filesystem::exists(f));
}

TEST_CASE("manifest records seeds and config") {
    const auto cfg = ExperimentConfig::defaults();
    Manifest m{"unit", cfg.hash(), cfg.to_json(), {"in.jsonl"}, {"out.jsonl"}};
    const auto dir = (std::filesystem::temp_directory_path() / "nrc_manifest").string();
    const auto path = write_manifest(dir, m);
    const auto doc = io::read_json(path);
    CHECK(doc["schema"] == kManifestSchema);
    CHECK(doc["command"] == "unit");
    CHECK(doc["seeds"].contains("es"));
    CHECK(doc["inputs"][0] == "in.jsonl");
    CHECK(doc.contains("version"));
}
