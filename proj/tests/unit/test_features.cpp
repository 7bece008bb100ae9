#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "nrc/error.hpp"
#include "nrc/features.hpp"
#include "nrc/network.hpp"

using namespace nrc;
using namespace nrc::policy;

TEST_CASE("bundle layout is stable and lookup rejects unknown names") {
    CHECK(bundle_names().size() == kBundleDense);
    CHECK(FeatureSpec::bundle_index("width") == 0);
    CHECK(FeatureSpec::bundle_index("prev_reward") == kBundleDense - 1);
    CHECK_THROWS_AS(FeatureSpec::bundle_index("no_such_feature"), Error);
}

TEST_CASE("value equal to the corpus mean normalizes to zero") {
    Standardizer s;
    s.mean = Eigen::VectorXd::Constant(1, 3.0);
    s.stddev = Eigen::VectorXd::Constant(1, 2.0);
    s.log1p = {false};
    s.normalize = {true};
    CHECK(s.apply(0, 3.0) == 0.0);
    CHECK(s.apply(0, 5.0) == 1.0);
}

TEST_CASE("count value zero maps to zero under log1p") {
    Standardizer s;
    s.mean = Eigen::VectorXd::Zero(1);
    s.stddev = Eigen::VectorXd::Ones(1);
    s.log1p = {true};
    s.normalize = {false};
    CHECK(s.apply(0, 0.0) == 0.0);
    CHECK(s.apply(0, std::expm1(2.0)) == doctest::Approx(2.0));
}

TEST_CASE("fitted spec centers the training features") {
    const auto recs = testing::baseline_records(testing::small_corpus(6, 20), {300.0, 600.0});
    const auto spec = fit_feature_spec(recs);
    REQUIRE(spec.fitted);
    double sum = 0.0;
    int n = 0;
    const int idx = FeatureSpec::bundle_index("target_kbps");
    for (const auto& r : recs)
        for (const auto& b : record_bundles(r, spec)) {
            sum += b.dense[idx];
            ++n;
        }
    CHECK(std::abs(sum / n) < 1e-9);
    for (int i = 0; i < spec.first_pass.size(); ++i) CHECK(spec.first_pass.stddev[i] > 0.0);
    CHECK(spec.bits_std_kbit > 0.0);
}

TEST_CASE("build_features contracts") {
    const auto recs = testing::baseline_records(testing::small_corpus(3, 20), {400.0});
    const auto spec = fit_feature_spec(recs);
    const auto& r = recs[0];
    const auto b = build_features(r.statics, r.steps[5], spec, 17, 0.0);
    CHECK(b.prev_qp == 17);
    CHECK(b.dense.size() == kBundleDense);
    CHECK(b.dense[FeatureSpec::bundle_index("has_prev")] == 1.0);
    CHECK(build_features(r.statics, r.steps[0], spec, -1, 0.0).dense[FeatureSpec::bundle_index("has_prev")] == 0.0);
    CHECK_THROWS_AS(build_features(r.statics, r.steps[5], spec, 256, 0.0), Error);
    CHECK_THROWS_AS(build_features(r.statics, r.steps[5], FeatureSpec{}, 17, 0.0), Error);

    const auto params = init_params(NetworkConfig::tiny(), 3);
    const auto row = qp_embedding(params, 17);
    CHECK(row.size() == kEmbedDim);
    CHECK(row == params[Block::QpEmbed].row(17));
    CHECK(qp_embedding(params, -1).isZero());
}

TEST_CASE("spec json round trip and layout check") {
    const auto recs = testing::baseline_records(testing::small_corpus(3, 20), {400.0});
    const auto spec = fit_feature_spec(recs);
    auto j = spec_to_json(spec);
    CHECK(spec_to_json(spec_from_json(j)) == j);
    j["bundle_names"][0] = "renamed";
    CHECK_THROWS_AS(spec_from_json(j), Error);
}
