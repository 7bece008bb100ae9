#include <doctest.h>

#include <filesystem>

#include "nrc/error.hpp"
#include "nrc/teacher.hpp"

using namespace nrc;
using namespace nrc::teacher;

TEST_CASE("single-dimension update matches the rule") {
    EsConfig cfg;
    cfg.batch = 1;
    EsState s;
    s.theta = Eigen::VectorXd::Constant(1, 128.0);
    Eigen::MatrixXd eps = Eigen::MatrixXd::Constant(1, 1, 1.0);
    const auto next = es_step(s, cfg, [](const std::vector<int>&) { return 10.0; }, eps);
    CHECK(next.theta(0) == doctest::Approx(168.0).epsilon(1e-14));
    CHECK(next.step == 1);
}

TEST_CASE("mirrored noise with equal rewards cancels") {
    EsConfig cfg;
    cfg.batch = 2;
    EsState s;
    s.theta = Eigen::VectorXd::Constant(5, 100.0);
    Eigen::MatrixXd eps(5, 2);
    eps.col(0) << 0.3, -1.2, 0.7, 2.0, -0.4;
    eps.col(1) = -eps.col(0);
    const auto next = es_step(s, cfg, [](const std::vector<int>&) { return 7.5; }, eps);
    CHECK(next.theta == s.theta);
}

TEST_CASE("zero noise leaves theta unchanged") {
    EsConfig cfg;
    EsState s;
    s.theta = Eigen::VectorXd::LinSpaced(6, 10.0, 200.0);
    const auto next = es_step(s, cfg, [](const std::vector<int>&) { return 3.0; },
                              Eigen::MatrixXd::Zero(6, cfg.batch));
    CHECK(next.theta == s.theta);
}

TEST_CASE("evaluated candidates stay in range and theta is clamped") {
    EsConfig cfg;
    cfg.batch = 4;
    EsState s;
    s.theta = Eigen::VectorXd::Constant(3, 250.0);
    s.theta(1) = 2.0;
    Eigen::MatrixXd eps = Eigen::MatrixXd::Constant(3, 4, 5.0);
    eps.row(1).setConstant(-5.0);
    bool in_range = true;
    const auto next = es_step(s, cfg, [&](const std::vector<int>& q) {
        for (int v : q) in_range = in_range && v >= 0 && v <= 255;
        return 1.0;
    }, eps);
    CHECK(in_range);
    CHECK(next.theta.maxCoeff() <= 255.0);
    CHECK(next.theta.minCoeff() >= 0.0);
}

TEST_CASE("non-finite reward is a divergence") {
    EsConfig cfg;
    cfg.batch = 1;
    EsState s;
    s.theta = Eigen::VectorXd::Constant(2, 50.0);
    try {
        es_step(s, cfg, [](const std::vector<int>&) { return NAN; }, Eigen::MatrixXd::Ones(2, 1));
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Divergence);
    }
}

TEST_CASE("learning rate halves every decay period") {
    EsConfig cfg;
    CHECK(cfg.learning_rate_at(0) == 16.0);
    CHECK(cfg.learning_rate_at(100) == doctest::Approx(8.0));
    CHECK(cfg.learning_rate_at(200) == doctest::Approx(4.0));
}

TEST_CASE("antithetic noise comes in mirrored pairs") {
    EsConfig cfg;
    cfg.antithetic = true;
    Rng rng(4);
    const auto eps = draw_noise(7, cfg, rng);
    REQUIRE(eps.cols() == cfg.batch);
    for (int i = 0; i + 1 < cfg.batch; i += 2) CHECK(eps.col(i) == -eps.col(i + 1));
}

TEST_CASE("invalid config") {
    EsConfig cfg;
    cfg.sigma = 0.0;
    CHECK_THROWS(cfg.validate());
    cfg = {};
    cfg.batch = 0;
    CHECK_THROWS(cfg.validate());
}

TEST_CASE("zero steps returns the baseline") {
    const auto v = simenc::generate_video(3, {});
    const auto g = simenc::plan_gop(v);
    EsConfig cfg;
    cfg.max_steps = 0;
    const auto r = run_es(v, g, 512.0, cfg);
    CHECK(r.best_qps == r.baseline_trace.qps);
    CHECK(r.trace.reward == r.baseline_trace.reward);
}

TEST_CASE("best-seen reward is nondecreasing and seeded runs repeat") {
    const auto v = simenc::generate_video(6, {});
    const auto g = simenc::plan_gop(v);
    EsConfig cfg;
    cfg.max_steps = 15;
    cfg.seed = 9;
    const auto a = run_es(v, g, 450.0, cfg);
    const auto b = run_es(v, g, 450.0, cfg);
    CHECK(a.best_qps == b.best_qps);
    for (std::size_t i = 1; i < a.best_reward_history.size(); ++i)
        CHECK(a.best_reward_history[i] >= a.best_reward_history[i - 1]);
    CHECK(a.trace.reward >= a.baseline_trace.reward);
    CHECK(a.trace.reward == a.best_reward_history.back());
}

TEST_CASE("dataset cardinality, target range and replay") {
    std::vector<simenc::SyntheticVideo> videos = {simenc::generate_video(1, {}, "a"),
                                                  simenc::generate_video(2, {}, "b")};
    DatasetConfig d;
    d.bitrates_per_video = 3;
    d.seed = 5;
    EsConfig es;
    es.max_steps = 3;
    es.batch = 4;
    const auto records = build_teacher_dataset(videos, d, es);
    REQUIRE(records.size() == 6);
    for (const auto& r : records) {
        CHECK(r.target_kbps >= d.min_kbps);
        CHECK(r.target_kbps <= d.max_kbps);
        CHECK(replay_matches(r, r.video_id == "a" ? videos[0] : videos[1]));
        CHECK(r.baseline_drift <= d.max_baseline_drift);
        CHECK(r.provenance == Provenance::Es);
    }

    const auto path = (std::filesystem::temp_directory_path() / "nrc_teacher.jsonl").string();
    write_dataset(path, records);
    const auto back = read_dataset(path);
    REQUIRE(back.size() == records.size());
    for (std::size_t i = 0; i < back.size(); ++i)
        CHECK(record_to_json(back[i]) == record_to_json(records[i]));
}

TEST_CASE("dataset is identical for any worker count") {
    std::vector<simenc::SyntheticVideo> videos;
    for (std::uint64_t i = 0; i < 5; ++i)
        videos.push_back(simenc::generate_video(10 + i, {}, "w" + std::to_string(i)));
    DatasetConfig d;
    d.bitrates_per_video = 2;
    d.seed = 9;
    EsConfig es;
    es.max_steps = 3;
    es.batch = 4;
    es.seed = 4;
    d.workers = 1;
    const auto serial = build_teacher_dataset(videos, d, es);
    d.workers = 3;
    const auto pooled = build_teacher_dataset(videos, d, es);
    REQUIRE(serial.size() == pooled.size());
    for (std::size_t i = 0; i < serial.size(); ++i)
        CHECK(record_to_json(serial[i]) == record_to_json(pooled[i]));
}

TEST_CASE("drift guard rejects far-off labels") {
    std::vector<simenc::SyntheticVideo> videos = {simenc::generate_video(1, {}, "a")};
    DatasetConfig d;
    d.bitrates_per_video = 1;
    d.max_baseline_drift = 0.0;
    EsConfig es;
    es.max_steps = 30;
    es.antithetic = true;
    es.evaluate_mean = true;
    CHECK_THROWS_AS(build_teacher_dataset(videos, d, es), Error);
}

TEST_CASE("replay mismatch is a hard error") {
    const auto v = simenc::generate_video(2, {}, "a");
    const auto g = simenc::plan_gop(v);
    auto tr = baseline::run_baseline(v, g, 500.0);
    tr.bits[3] += 1.0;
    try {
        make_record(v, g, tr, Provenance::Es);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ReplayMismatch);
    }
}

TEST_CASE("record json rejects bad schema") {
    const auto v = simenc::generate_video(2, {}, "a");
    const auto g = simenc::plan_gop(v);
    auto j = record_to_json(make_record(v, g, baseline::run_baseline(v, g, 500.0), Provenance::Es));
    j["schema"] = "teacher.v0";
    CHECK_THROWS_AS(record_from_json(j), Error);
}
