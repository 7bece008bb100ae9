#include "nrc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>

#include "nrc/error.hpp"

namespace nrc::metrics {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_curve(const std::vector<RDPoint>& pts) {
    if (pts.size() < 2) fail(ErrorKind::InvalidArgument, "RD curve needs at least two points");
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (!(pts[i].bitrate_kbps > 0.0) || !std::isfinite(pts[i].psnr_db))
            fail(ErrorKind::InvalidArgument, "RD point must have positive bitrate and finite PSNR");
        if (i > 0 && !(pts[i].bitrate_kbps > pts[i - 1].bitrate_kbps &&
                       pts[i].psnr_db > pts[i - 1].psnr_db))
            fail(ErrorKind::InvalidArgument,
                 "RD curve must be strictly increasing in bitrate and PSNR");
    }
}

// strtod rather than stod: subnormal values round-trip instead of throwing.
double parse_cell(const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size())
        fail(ErrorKind::SchemaMismatch, "non-numeric CSV cell: " + s);
    return v;
}

}  // namespace

RDCurve::RDCurve(std::vector<RDPoint> points) : points_(std::move(points)) { check_curve(points_); }

RDCurve RDCurve::from_unsorted(std::vector<RDPoint> points) {
    std::sort(points.begin(), points.end(),
              [](const RDPoint& a, const RDPoint& b) { return a.bitrate_kbps < b.bitrate_kbps; });
    return RDCurve(std::move(points));
}

double RDCurve::log_bitrate_at(double psnr) const {
    if (!(psnr >= min_psnr() && psnr <= max_psnr()))
        fail(ErrorKind::OutOfRange, "PSNR outside the reference curve span");
    for (std::size_t k = 0; k + 1 < points_.size(); ++k) {
        const RDPoint& a = points_[k];
        const RDPoint& b = points_[k + 1];
        if (psnr == a.psnr_db) return std::log(a.bitrate_kbps);
        if (psnr == b.psnr_db) return std::log(b.bitrate_kbps);
        if (psnr < b.psnr_db) {
            const double u = (psnr - a.psnr_db) / (b.psnr_db - a.psnr_db);
            const double la = std::log(a.bitrate_kbps);
            return la + u * (std::log(b.bitrate_kbps) - la);
        }
    }
    return std::log(points_.back().bitrate_kbps);
}

double RDCurve::bitrate_at(double psnr) const {
    for (const auto& p : points_)
        if (p.psnr_db == psnr) return p.bitrate_kbps;
    return std::exp(log_bitrate_at(psnr));
}

double RDCurve::psnr_at(double bitrate_kbps) const {
    if (!(bitrate_kbps >= min_bitrate() && bitrate_kbps <= max_bitrate()))
        fail(ErrorKind::OutOfRange, "bitrate outside the reference curve span");
    for (std::size_t k = 0; k + 1 < points_.size(); ++k) {
        const RDPoint& a = points_[k];
        const RDPoint& b = points_[k + 1];
        if (bitrate_kbps == a.bitrate_kbps) return a.psnr_db;
        if (bitrate_kbps == b.bitrate_kbps) return b.psnr_db;
        if (bitrate_kbps < b.bitrate_kbps) {
            const double la = std::log(a.bitrate_kbps);
            const double u = (std::log(bitrate_kbps) - la) / (std::log(b.bitrate_kbps) - la);
            return a.psnr_db + u * (b.psnr_db - a.psnr_db);
        }
    }
    return points_.back().psnr_db;
}

BitrateDiff projected_bitrate_diff(const RDPoint& point, const RDCurve& reference) {
    const double ref = reference.bitrate_at(point.psnr_db);
    const double diff = point.bitrate_kbps - ref;
    return {diff, 100.0 * diff / ref};
}

double projected_psnr_diff(const RDPoint& point, const RDCurve& reference) {
    return point.psnr_db - reference.psnr_at(point.bitrate_kbps);
}

double bd_rate(const RDCurve& a, const RDCurve& b) {
    const double lo = std::max(a.min_psnr(), b.min_psnr());
    const double hi = std::min(a.max_psnr(), b.max_psnr());
    if (!(hi > lo)) fail(ErrorKind::InvalidArgument, "RD curves do not overlap in PSNR");

    std::vector<double> knots = {lo, hi};
    for (const auto* c : {&a, &b})
        for (const auto& p : c->points())
            if (p.psnr_db > lo && p.psnr_db < hi) knots.push_back(p.psnr_db);
    std::sort(knots.begin(), knots.end());
    knots.erase(std::unique(knots.begin(), knots.end()), knots.end());

    // The log-rate difference is linear between knots, so trapezoids are exact.
    auto diff = [&](double p) { return b.log_bitrate_at(p) - a.log_bitrate_at(p); };
    double integral = 0.0;
    double prev = diff(knots.front());
    for (std::size_t i = 1; i < knots.size(); ++i) {
        const double cur = diff(knots[i]);
        integral += 0.5 * (prev + cur) * (knots[i] - knots[i - 1]);
        prev = cur;
    }
    return 100.0 * std::expm1(integral / (hi - lo));
}

// ---------------------------------------------------------------------------

double AccuracyBuckets::within_fraction() const {
    const int n = under + within + over;
    return n == 0 ? 0.0 : static_cast<double>(within) / n;
}

double percentile(std::vector<double> values, double q) {
    std::erase_if(values, [](double v) { return std::isnan(v); });
    if (values.empty()) return kNaN;
    std::sort(values.begin(), values.end());
    const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(values.size() - 1);
    const auto i = static_cast<std::size_t>(std::floor(pos));
    const double frac = pos - static_cast<double>(i);
    if (i + 1 >= values.size()) return values.back();
    return values[i] + frac * (values[i + 1] - values[i]);
}

double median(std::vector<double> values) { return percentile(std::move(values), 0.5); }

std::map<std::string, RDCurve> curves_by_video(const std::vector<simenc::EpisodeTrace>& traces) {
    std::map<std::string, std::vector<RDPoint>> grouped;
    for (const auto& t : traces) grouped[t.video_id].push_back({t.bitrate_kbps, t.psnr_db});
    std::map<std::string, RDCurve> out;
    for (auto& [id, pts] : grouped) {
        try {
            out.emplace(id, RDCurve::from_unsorted(std::move(pts)));
        } catch (const Error& e) {
            fail(ErrorKind::InvalidArgument, "degenerate reference curve for " + id + ": " + e.what());
        }
    }
    return out;
}

SuiteSummary summarize_suite(const std::vector<simenc::EpisodeTrace>& policy,
                             const std::map<std::string, RDCurve>& reference,
                             double accuracy_tolerance) {
    SuiteSummary summary;
    std::vector<double> bitrate_pct, psnr_db, abs_err;
    for (const auto& t : policy) {
        auto it = reference.find(t.video_id);
        if (it == reference.end())
            fail(ErrorKind::InvalidArgument, "no reference curve for video id " + t.video_id);
        const RDCurve& curve = it->second;
        VideoComparison row;
        row.video_id = t.video_id;
        row.target_kbps = t.target_kbps;
        row.bitrate_kbps = t.bitrate_kbps;
        row.psnr_db = t.psnr_db;
        const RDPoint pt{t.bitrate_kbps, t.psnr_db};
        bool in_span = true;
        if (pt.psnr_db >= curve.min_psnr() && pt.psnr_db <= curve.max_psnr()) {
            const auto d = projected_bitrate_diff(pt, curve);
            row.proj_bitrate_diff_kbps = d.kbps;
            row.proj_bitrate_diff_pct = d.percent;
        } else {
            row.proj_bitrate_diff_kbps = row.proj_bitrate_diff_pct = kNaN;
            in_span = false;
        }
        if (pt.bitrate_kbps >= curve.min_bitrate() && pt.bitrate_kbps <= curve.max_bitrate()) {
            row.proj_psnr_diff_db = projected_psnr_diff(pt, curve);
        } else {
            row.proj_psnr_diff_db = kNaN;
            in_span = false;
        }
        if (!in_span) ++summary.out_of_span;

        const double err = t.bitrate_kbps / t.target_kbps - 1.0;
        if (err < -accuracy_tolerance) ++summary.accuracy.under;
        else if (err > accuracy_tolerance) ++summary.accuracy.over;
        else ++summary.accuracy.within;

        bitrate_pct.push_back(row.proj_bitrate_diff_pct);
        psnr_db.push_back(row.proj_psnr_diff_db);
        abs_err.push_back(100.0 * std::abs(err));
        summary.videos.push_back(row);
    }
    summary.median_proj_bitrate_diff_pct = median(bitrate_pct);
    summary.p10_proj_bitrate_diff_pct = percentile(bitrate_pct, 0.1);
    summary.p90_proj_bitrate_diff_pct = percentile(bitrate_pct, 0.9);
    summary.median_proj_psnr_diff_db = median(psnr_db);
    summary.median_abs_bitrate_error_pct = median(abs_err);
    return summary;
}

io::CsvTable comparisons_to_csv(const std::vector<VideoComparison>& rows) {
    io::CsvTable table;
    table.header = comparison_columns();
    for (const auto& r : rows) {
        table.rows.push_back({r.video_id, io::format_double(r.target_kbps),
                              io::format_double(r.bitrate_kbps), io::format_double(r.psnr_db),
                              io::format_double(r.proj_bitrate_diff_kbps),
                              io::format_double(r.proj_bitrate_diff_pct),
                              io::format_double(r.proj_psnr_diff_db)});
    }
    return table;
}

std::vector<VideoComparison> comparisons_from_csv(const io::CsvTable& table) {
    std::vector<std::size_t> idx;
    for (const auto& name : comparison_columns()) idx.push_back(table.column(name));
    std::vector<VideoComparison> out;
    for (const auto& row : table.rows) {
        VideoComparison c;
        c.video_id = row[idx[0]];
        c.target_kbps = parse_cell(row[idx[1]]);
        c.bitrate_kbps = parse_cell(row[idx[2]]);
        c.psnr_db = parse_cell(row[idx[3]]);
        c.proj_bitrate_diff_kbps = parse_cell(row[idx[4]]);
        c.proj_bitrate_diff_pct = parse_cell(row[idx[5]]);
        c.proj_psnr_diff_db = parse_cell(row[idx[6]]);
        out.push_back(c);
    }
    return out;
}

}  // namespace nrc::metrics
