#include <doctest.h>

#include <cmath>

#include "nrc/error.hpp"
#include "nrc/metrics.hpp"
#include "nrc/rng.hpp"

using namespace nrc;
using namespace nrc::metrics;

namespace {

const RDCurve two_point({{400.0, 34.0}, {600.0, 36.0}});

RDCurve scaled(const RDCurve& c, double k) {
    auto pts = c.points();
    for (auto& p : pts) p.bitrate_kbps *= k;
    return RDCurve(pts);
}

RDCurve random_curve(Rng& rng, int n) {
    std::vector<RDPoint> pts;
    double r = rng.uniform(100.0, 300.0), p = rng.uniform(28.0, 32.0);
    for (int i = 0; i < n; ++i) {
        pts.push_back({r, p});
        r *= rng.uniform(1.1, 1.8);
        p += rng.uniform(0.3, 3.0);
    }
    return RDCurve(pts);
}

// Fine-grid trapezoid integration of the log-rate gap, independent of knots.
double trapezoid_oracle(const RDCurve& a, const RDCurve& b, int n = 200000) {
    const double lo = std::max(a.min_psnr(), b.min_psnr());
    const double hi = std::min(a.max_psnr(), b.max_psnr());
    const double h = (hi - lo) / n;
    auto f = [&](double p) { return std::log(b.bitrate_at(p)) - std::log(a.bitrate_at(p)); };
    double s = 0.5 * (f(lo) + f(hi));
    for (int i = 1; i < n; ++i) s += f(lo + i * h);
    return 100.0 * std::expm1(s * h / (hi - lo));
}

}  // namespace

TEST_CASE("projected bitrate diff at the log-linear midpoint") {
    const double mid = std::sqrt(400.0 * 600.0);
    CHECK(std::abs(projected_bitrate_diff({mid, 35.0}, two_point).kbps) < 1e-9);
    const auto d = projected_bitrate_diff({440.0, 35.0}, two_point);
    CHECK(d.kbps == doctest::Approx(440.0 - mid).epsilon(1e-12));
    CHECK(d.kbps == doctest::Approx(-49.897949).epsilon(1e-7));
    CHECK(d.percent == doctest::Approx(-10.185376).epsilon(1e-6));
}

TEST_CASE("interpolation passes through knots") {
    for (const auto& p : two_point.points()) {
        CHECK(projected_bitrate_diff(p, two_point).kbps == 0.0);
        CHECK(projected_psnr_diff(p, two_point) == 0.0);
    }
}

TEST_CASE("projected psnr diff") {
    const double mid = std::sqrt(400.0 * 600.0);
    CHECK(projected_psnr_diff({mid, 36.0}, two_point) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("projected diffs are antisymmetric when roles swap") {
    const RDCurve a({{300.0, 33.0}, {500.0, 35.0}, {800.0, 37.5}});
    const RDCurve b({{320.0, 33.5}, {520.0, 35.4}, {820.0, 37.9}});
    const double anchor = 450.0;
    const RDPoint pa{anchor, a.psnr_at(anchor)};
    const RDPoint pb{anchor, b.psnr_at(anchor)};
    CHECK(projected_psnr_diff(pa, b) == doctest::Approx(-projected_psnr_diff(pb, a)).epsilon(1e-12));
}

TEST_CASE("out of span is an error") {
    CHECK_THROWS_AS(projected_bitrate_diff({500.0, 40.0}, two_point), Error);
    CHECK_THROWS_AS(projected_psnr_diff({1000.0, 35.0}, two_point), Error);
}

TEST_CASE("non-monotone curves are rejected") {
    CHECK_THROWS_AS(RDCurve({{400.0, 34.0}}), Error);
    CHECK_THROWS_AS(RDCurve({{400.0, 34.0}, {600.0, 33.0}}), Error);
    CHECK_THROWS_AS(RDCurve({{0.0, 34.0}, {600.0, 36.0}}), Error);
}

TEST_CASE("bd_rate identities") {
    CHECK(bd_rate(two_point, two_point) == 0.0);
    CHECK(bd_rate(two_point, scaled(two_point, 0.9)) == doctest::Approx(-10.0).epsilon(1e-13));
    const RDCurve far({{400.0, 50.0}, {600.0, 52.0}});
    CHECK_THROWS_AS(bd_rate(two_point, far), Error);
}

TEST_CASE("bd_rate matches a fine-grid trapezoid oracle") {
    Rng rng(2024);
    for (int i = 0; i < 10; ++i) {
        const auto a = random_curve(rng, 4);
        const auto b = random_curve(rng, 4);
        const double lo = std::max(a.min_psnr(), b.min_psnr());
        const double hi = std::min(a.max_psnr(), b.max_psnr());
        if (!(hi > lo)) continue;
        CHECK(std::abs(bd_rate(a, b) - trapezoid_oracle(a, b)) < 1e-9);
    }
}

TEST_CASE("bd_rate is invariant to a common scale and nearly antisymmetric") {
    Rng rng(5);
    const auto a = random_curve(rng, 5);
    const auto b = scaled(a, 0.93);
    CHECK(bd_rate(scaled(a, 3.0), scaled(b, 3.0)) == doctest::Approx(bd_rate(a, b)).epsilon(1e-12));
    const double ab = bd_rate(a, b) / 100.0, ba = bd_rate(b, a) / 100.0;
    // For scaled curves (1 + ab)(1 + ba) = 1, so ab + ba = -ab * ba.
    CHECK((1.0 + ab) * (1.0 + ba) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(ab + ba) <= std::max(ab * ab, ba * ba));
}

TEST_CASE("percentiles") {
    CHECK(median({3.0, 1.0, 2.0}) == 2.0);
    CHECK(median({1.0, 2.0, 3.0, 4.0}) == 2.5);
    CHECK(std::isnan(median({})));
    CHECK(median({NAN, 5.0}) == 5.0);
    CHECK(percentile({0.0, 10.0}, 0.1) == doctest::Approx(1.0));
}

TEST_CASE("summary against identical baseline is zero and unmatched ids fail") {
    simenc::EpisodeTrace lo, hi, mid;
    lo.video_id = hi.video_id = mid.video_id = "v";
    lo.bitrate_kbps = 300;
    lo.psnr_db = 33;
    hi.bitrate_kbps = 700;
    hi.psnr_db = 37;
    mid.bitrate_kbps = 500;
    mid.psnr_db = 35;
    lo.target_kbps = hi.target_kbps = mid.target_kbps = 500;
    const auto curves = curves_by_video({lo, mid, hi});
    const auto s = summarize_suite({mid}, curves);
    CHECK(s.median_proj_bitrate_diff_pct == 0.0);
    CHECK(s.median_proj_psnr_diff_db == 0.0);
    CHECK(s.accuracy.within == 1);

    auto other = mid;
    other.video_id = "w";
    CHECK_THROWS_AS(summarize_suite({other}, curves), Error);
}

TEST_CASE("comparison csv round trip") {
    VideoComparison c{"v", 512.0, 500.0, 35.0, -3.0, -0.6, 0.1};
    const auto back = comparisons_from_csv(comparisons_to_csv({c}));
    REQUIRE(back.size() == 1);
    CHECK(back[0].video_id == "v");
    CHECK(back[0].proj_bitrate_diff_pct == -0.6);
    io::CsvTable broken = comparisons_to_csv({c});
    broken.header[2] = "oops";
    CHECK_THROWS_AS(comparisons_from_csv(broken), Error);
}
