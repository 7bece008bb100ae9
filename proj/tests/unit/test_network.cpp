#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "fixtures.hpp"
#include "nrc/error.hpp"
#include "nrc/network.hpp"
#include "nrc/trainer.hpp"

using namespace nrc;
using namespace nrc::policy;

namespace {

struct Fixture {
    std::vector<teacher::TeacherRecord> records;
    PolicyModel model;
    EpisodeInput input;

    explicit Fixture(int frames = 12) {
        records = testing::baseline_records(testing::small_corpus(2, frames), {350.0, 650.0});
        model.config = NetworkConfig::tiny();
        model.spec = fit_feature_spec(records);
        model.params = init_params(model.config, 7);
        input = make_example(records[0], model.spec).input;
    }
};

}  // namespace

TEST_CASE("presets") {
    const auto p = NetworkConfig::full();
    CHECK(p.heads == 16);
    CHECK(p.key_dim == 16);
    CHECK(p.hidden == 128);
    CHECK(p.recurrent == 128);
    CHECK(NetworkConfig::from_preset("tiny").hidden == NetworkConfig::tiny().hidden);
    CHECK_THROWS_AS(NetworkConfig::from_preset("huge"), Error);
}

TEST_CASE("forward output shapes for three steps") {
    Fixture f(3);
    const auto out = forward(f.model.config, f.model.params, f.model.spec, f.input, false, 0);
    CHECK(out.logits.rows() == 3);
    CHECK(out.logits.cols() == 256);
    CHECK(out.bits_kbit.size() == 3);
    CHECK(out.logits.allFinite());
}

TEST_CASE("eval mode is deterministic and train mode depends on the dropout seed") {
    Fixture f;
    const auto a = forward(f.model.config, f.model.params, f.model.spec, f.input, false, 1);
    const auto b = forward(f.model.config, f.model.params, f.model.spec, f.input, false, 2);
    CHECK(a.logits == b.logits);
    CHECK(a.bits_kbit == b.bits_kbit);
    const auto c = forward(f.model.config, f.model.params, f.model.spec, f.input, true, 1);
    const auto d = forward(f.model.config, f.model.params, f.model.spec, f.input, true, 1);
    const auto e = forward(f.model.config, f.model.params, f.model.spec, f.input, true, 2);
    CHECK(c.logits == d.logits);
    CHECK(c.logits != e.logits);
}

TEST_CASE("permuting first-pass rows changes the output") {
    Fixture f;
    auto permuted = f.input;
    permuted.first_pass.row(0).swap(permuted.first_pass.row(5));
    const auto a = forward(f.model.config, f.model.params, f.model.spec, f.input, false, 0);
    const auto b = forward(f.model.config, f.model.params, f.model.spec, permuted, false, 0);
    CHECK((a.logits - b.logits).cwiseAbs().maxCoeff() > 1e-9);
}

TEST_CASE("step outputs ignore later inputs") {
    Fixture f;
    auto changed = f.input;
    const int t = 6;
    for (int s = t + 1; s < changed.size(); ++s) {
        changed.bundles[static_cast<std::size_t>(s)].dense.array() += 3.0;
        changed.bundles[static_cast<std::size_t>(s)].prev_qp = 200;
    }
    const auto a = forward(f.model.config, f.model.params, f.model.spec, f.input, false, 0);
    const auto b = forward(f.model.config, f.model.params, f.model.spec, changed, false, 0);
    CHECK(a.logits.topRows(t + 1) == b.logits.topRows(t + 1));
    CHECK(a.logits.row(t + 1) != b.logits.row(t + 1));
}

TEST_CASE("softmax over logits sums to one") {
    Fixture f;
    const auto out = forward(f.model.config, f.model.params, f.model.spec, f.input, false, 0);
    const Eigen::MatrixXd p = nn::softmax_rows<double>(out.logits);
    for (Eigen::Index r = 0; r < p.rows(); ++r) CHECK(p.row(r).sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("incremental session matches full forward") {
    Fixture f;
    const auto& rec = f.records[0];
    const auto out = forward(f.model.config, f.model.params, f.model.spec, f.input, false, 0);
    PolicySession session(f.model, rec.first_pass);
    for (int t = 0; t < f.input.size(); ++t) {
        const auto st = session.step(f.input.bundles[static_cast<std::size_t>(t)]);
        CHECK((st.logits - out.logits.row(t)).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(st.bits_kbit == doctest::Approx(out.bits_kbit[t]).epsilon(1e-12));
    }
}

TEST_CASE("save and load reproduce forward bitwise") {
    Fixture f;
    const auto path = (std::filesystem::temp_directory_path() / "nrc_policy.json").string();
    save_model(path, f.model);
    const auto back = load_model(path);
    const auto a = forward(f.model.config, f.model.params, f.model.spec, f.input, false, 0);
    const auto b = forward(back.config, back.params, back.spec, f.input, false, 0);
    CHECK(a.logits == b.logits);
    CHECK(a.bits_kbit == b.bits_kbit);
}

TEST_CASE("model json rejects bad shapes and schema") {
    Fixture f;
    auto j = model_to_json(f.model);
    j["schema"] = "policy.v0";
    CHECK_THROWS_AS(model_from_json(j), Error);
}

TEST_CASE("gradients agree with finite differences on sampled entries") {
    Fixture f(6);
    const auto ex = make_example(f.records[1], f.model.spec);
    PolicyParams grads = PolicyParams::zeros_like(f.model.params);
    episode_loss(f.model, ex, 2.0, 2.0, true, 77, &grads);
    Rng rng(1);
    for (int b = 0; b < kNumBlocks; ++b) {
        const auto blk = static_cast<Block>(b);
        if (blk == Block::Bk) continue;  // softmax shift invariance: gradient is exactly zero
        auto& w = f.model.params[blk];
        for (int k = 0; k < 2; ++k) {
            const auto i = static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::uint64_t>(w.size())));
            const double orig = w(i);
            const double h = 1e-5 * std::max(1.0, std::abs(orig));
            w(i) = orig + h;
            const double lp = episode_loss(f.model, ex, 2.0, 2.0, true, 77).total;
            w(i) = orig - h;
            const double lm = episode_loss(f.model, ex, 2.0, 2.0, true, 77).total;
            w(i) = orig;
            const double fd = (lp - lm) / (2.0 * h);
            const double an = grads[blk](i);
            INFO(block_name(blk), " index ", i);
            CHECK(std::abs(fd - an) <= 1e-4 * std::max({std::abs(fd), std::abs(an), 1e-3}));
        }
    }
}

TEST_CASE("param container arithmetic") {
    const auto p = init_params(NetworkConfig::tiny(), 1);
    auto z = PolicyParams::zeros_like(p);
    CHECK(z.squared_norm() == 0.0);
    CHECK(z.count() == p.count());
    z.add_scaled(p, 2.0);
    CHECK(z.squared_norm() == doctest::Approx(4.0 * p.squared_norm()));
}
