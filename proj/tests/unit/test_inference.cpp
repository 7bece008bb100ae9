#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "fixtures.hpp"
#include "nrc/error.hpp"
#include "nrc/her.hpp"
#include "nrc/inference.hpp"
#include "nrc/trainer.hpp"

using namespace nrc;
using namespace nrc::inference;

namespace {

Eigen::RowVectorXd random_logits(Rng& rng) {
    Eigen::RowVectorXd l(256);
    for (int i = 0; i < 256; ++i) l[i] = rng.normal(0.0, 2.0);
    return l;
}

simenc::EpisodeTrace line_trace(double kbps, int T, double wobble = 0.0, double phase = 0.0) {
    simenc::EpisodeTrace t;
    t.video_id = "line";
    t.target_kbps = kbps;
    t.num_frames = T;
    t.duration = T / 30.0;
    const double per_frame = kbps * 1000.0 * t.duration / T;
    for (int i = 0; i < T; ++i) {
        t.qps.push_back(100);
        t.bits.push_back(per_frame * (1.0 + wobble * std::sin(0.3 * i + phase)));
        t.mse.push_back(10.0);
        t.show.push_back(true);
    }
    return t;
}

policy::PolicyModel tiny_model() {
    const auto recs = testing::baseline_records(testing::small_corpus(4, 20), {350.0, 650.0});
    policy::TrainConfig cfg;
    cfg.epochs = 5;
    cfg.seed = 2;
    return policy::train(recs, cfg).model;
}

}  // namespace

TEST_CASE("top_k orders by logit and breaks ties toward lower qp") {
    Eigen::RowVectorXd l = Eigen::RowVectorXd::Zero(256);
    const auto k = top_k(l, 15);
    for (int i = 0; i < 15; ++i) CHECK(k[static_cast<std::size_t>(i)] == i);
    l[100] = 5.0;
    l[3] = 4.0;
    const auto k2 = top_k(l, 3);
    CHECK(k2 == std::vector<int>{100, 3, 0});
}

TEST_CASE("dominant logit is sampled almost surely") {
    Rng rng(1);
    Eigen::RowVectorXd l = Eigen::RowVectorXd::Zero(256);
    l[77] = 100.0;
    for (int i = 0; i < 1000; ++i) REQUIRE(truncated_sample(l, rng) == 77);
}

TEST_CASE("equal logits sample uniformly over the first fifteen qps") {
    Rng rng(2);
    const Eigen::RowVectorXd l = Eigen::RowVectorXd::Zero(256);
    std::vector<int> counts(256, 0);
    const int n = 30000;
    for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(truncated_sample(l, rng))];
    for (int q = 0; q < 15; ++q) CHECK(std::abs(counts[static_cast<std::size_t>(q)] / double(n) - 1.0 / 15.0) < 0.01);
    for (int q = 15; q < 256; ++q) CHECK(counts[static_cast<std::size_t>(q)] == 0);
}

TEST_CASE("kept probabilities equal the renormalized softmax") {
    Rng rng(3);
    const auto l = random_logits(rng);
    const auto d = truncated_distribution(l);
    REQUIRE(d.qps.size() == 15);
    double z = 0.0;
    for (int q : d.qps) z += std::exp(l[q]);
    for (std::size_t i = 0; i < d.qps.size(); ++i)
        CHECK(d.probs[i] == doctest::Approx(std::exp(l[d.qps[i]]) / z).epsilon(1e-12));
    Eigen::RowVectorXd bad = l;
    bad[4] = NAN;
    CHECK_THROWS_AS(truncated_distribution(bad), Error);
    CHECK_THROWS_AS(truncated_distribution(Eigen::RowVectorXd::Zero(10)), Error);
}

TEST_CASE("sorted candidates are the top forty ascending by qp") {
    Rng rng(4);
    const auto l = random_logits(rng);
    const auto c = sorted_candidates(l);
    REQUIRE(c.size() == 40);
    CHECK(std::is_sorted(c.begin(), c.end()));
    auto top = top_k(l, 40);
    std::sort(top.begin(), top.end());
    CHECK(c == top);
}

TEST_CASE("feedback adjustment examples") {
    CHECK(feedback_adjust(10, 300.0, 200.0, 400.0, 0.01) == 10);
    CHECK(feedback_adjust(10, 900.0, 0.0, 400.0, 0.01) == 15);
    CHECK(feedback_adjust(3, 0.0, 1000.0, 2000.0, 0.01) == 1);
    CHECK(feedback_adjust(38, 10000.0, 0.0, 400.0, 0.01) == 40);
    CHECK(feedback_adjust(10, 1e6, 0.0, 400.0, 0.0) == 10);
    CHECK(feedback_adjust(10, -1e6, 0.0, 400.0, 0.0) == 10);
    CHECK_THROWS_AS(feedback_adjust(0, 1.0, 0.0, 2.0, 0.01), Error);
    CHECK_THROWS_AS(feedback_adjust(41, 1.0, 0.0, 2.0, 0.01), Error);
}

TEST_CASE("feedback adjustment is monotone in the violation") {
    for (int i = 1; i <= 40; ++i) {
        int prev = feedback_adjust(i, 400.0, 100.0, 400.0, 0.05);
        for (double b = 410.0; b < 2000.0; b += 10.0) {
            const int j = feedback_adjust(i, b, 100.0, 400.0, 0.05);
            REQUIRE(j >= prev);
            REQUIRE(j >= i);
            prev = j;
        }
        prev = feedback_adjust(i, 100.0, 100.0, 400.0, 0.05);
        for (double b = 90.0; b > -2000.0; b -= 10.0) {
            const int j = feedback_adjust(i, b, 100.0, 400.0, 0.05);
            REQUIRE(j <= prev);
            REQUIRE(j <= i);
            prev = j;
        }
    }
}

TEST_CASE("straight-line traces give bounds bracketing the line") {
    std::vector<simenc::EpisodeTrace> traces(25, line_trace(500.0, 100));
    const auto b = fit_bounds(traces, 500.0);
    for (int g = 0; g <= 100; ++g) {
        const double x = g / 100.0;
        CHECK(b.lower(x) <= 500.0 * x + 1e-9);
        CHECK(b.upper(x) >= 500.0 * x - 1e-9);
    }
    CHECK(b.lower(1.0) >= 0.95 * 500.0 - 1e-9);
    CHECK(b.upper(1.0) <= 1.05 * 500.0 + 1e-9);
    CHECK(b.upper(1.0) - b.lower(1.0) <= 0.10 * 500.0 + 1e-9);
    CHECK(bounds_coverage(b, traces) == 1.0);
}

TEST_CASE("bounds cover noisy traces and scale with the target") {
    std::vector<simenc::EpisodeTrace> traces;
    Rng rng(6);
    for (int i = 0; i < 200; ++i) {
        const double kbps = rng.uniform(256.0, 768.0);
        traces.push_back(line_trace(kbps * rng.uniform(0.97, 1.03), 120, 0.5, rng.uniform(0.0, 6.3)));
        traces.back().target_kbps = kbps;
    }
    const auto b = fit_bounds(traces, 512.0);
    CHECK(bounds_coverage(b, traces) >= 0.95);
    CHECK(b.lower_at(0.5, 1024.0) == doctest::Approx(2.0 * b.lower(0.5)));
    CHECK(b.upper(1.0) - b.lower(1.0) <= 0.10 * 512.0 + 1e-9);
}

TEST_CASE("too few traces and json round trip") {
    std::vector<simenc::EpisodeTrace> few(5, line_trace(500.0, 50));
    CHECK_THROWS_AS(fit_bounds(few, 500.0), Error);
    std::vector<simenc::EpisodeTrace> traces(30, line_trace(500.0, 50));
    const auto b = fit_bounds(traces, 500.0);
    const auto back = bounds_from_json(bounds_to_json(b));
    CHECK(back.lower(0.37) == b.lower(0.37));
    CHECK(back.upper(0.91) == b.upper(0.91));
    auto j = bounds_to_json(b);
    j["schema"] = "bounds.v9";
    CHECK_THROWS_AS(bounds_from_json(j), Error);
}

TEST_CASE("unbounded control reproduces the plain truncated policy") {
    const auto model = tiny_model();
    const auto videos = testing::small_corpus(3, 20, 9);
    const std::vector<std::pair<std::size_t, double>> tasks = {{0, 400.0}, {1, 500.0}, {2, 600.0}};
    const auto plain = rollout_suite(model, videos, tasks, 5, SampleMode::Truncated);
    const auto inf = BoundsModel::unbounded(512.0);
    const auto ctl = rollout_suite(model, videos, tasks, 5, SampleMode::Truncated, &inf);
    for (std::size_t i = 0; i < tasks.size(); ++i) CHECK(plain[i].qps == ctl[i].qps);

    const auto again = rollout_suite(model, videos, tasks, 5, SampleMode::Truncated);
    for (std::size_t i = 0; i < tasks.size(); ++i) CHECK(plain[i].qps == again[i].qps);
    const auto greedy = rollout_suite(model, videos, tasks, 5, SampleMode::Greedy);
    CHECK(greedy.size() == 3);
}

TEST_CASE("zero gain leaves sampled qps untouched") {
    const auto model = tiny_model();
    const auto videos = testing::small_corpus(1, 20, 3);
    std::vector<simenc::EpisodeTrace> traces(25, line_trace(100.0, 20));
    const auto bounds = fit_bounds(traces, 100.0);
    FeedbackConfig fb;
    fb.alpha = 0.0;
    PolicyRunner runner(model, 8, bounds, fb);
    simenc::run_episode(videos[0], simenc::plan_gop(videos[0]), 900.0, runner.callback());
    bool any_active = false;
    for (const auto& e : runner.events()) {
        any_active = any_active || e.active;
        CHECK(e.qp == e.sampled_qp);
        CHECK(e.adjusted_index == e.sampled_index);
    }
    CHECK(any_active);
}

TEST_CASE("hindsight records carry the achieved bitrate") {
    const auto model = tiny_model();
    const auto videos = testing::small_corpus(2, 20, 4);
    const std::vector<std::pair<std::size_t, double>> tasks = {{0, 512.0}, {1, 300.0}};
    const auto recs = policy::her_relabel(model, videos, tasks);
    REQUIRE(recs.size() == 2);
    for (const auto& r : recs) {
        CHECK(r.provenance == teacher::Provenance::Her);
        CHECK(r.target_kbps == r.bitrate_kbps);
        CHECK(teacher::replay_matches(r, r.video_id == videos[0].video_id ? videos[0] : videos[1]));
        double sum = 0.0;
        for (double b : r.label_bits) sum += b;
        CHECK(sum == doctest::Approx(r.budget_bits()).epsilon(1e-12));
    }
}
