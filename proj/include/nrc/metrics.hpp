#pragma once

// Rate-distortion comparison metrics. Interpolation is piecewise linear in
// (psnr, log bitrate) and never extrapolates past a curve's span.

#include <map>
#include <string>
#include <vector>

#include "nrc/io.hpp"
#include "nrc/simenc.hpp"

namespace nrc::metrics {

struct RDPoint {
    double bitrate_kbps = 0.0;
    double psnr_db = 0.0;
};

/// Points strictly increasing in both bitrate and PSNR; at least two of them.
class RDCurve {
public:
    explicit RDCurve(std::vector<RDPoint> points);

    /// Sorts by bitrate first; still throws if the result is not monotone.
    static RDCurve from_unsorted(std::vector<RDPoint> points);

    const std::vector<RDPoint>& points() const { return points_; }
    double min_psnr() const { return points_.front().psnr_db; }
    double max_psnr() const { return points_.back().psnr_db; }
    double min_bitrate() const { return points_.front().bitrate_kbps; }
    double max_bitrate() const { return points_.back().bitrate_kbps; }

    /// Bitrate at `psnr` (log-linear); OutOfRange outside the PSNR span.
    double bitrate_at(double psnr) const;
    /// PSNR at `bitrate_kbps` (linear in log bitrate); OutOfRange outside the span.
    double psnr_at(double bitrate_kbps) const;
    /// Log bitrate at `psnr`; exact at knots.
    double log_bitrate_at(double psnr) const;

private:
    std::vector<RDPoint> points_;
};

struct BitrateDiff {
    double kbps = 0.0;
    double percent = 0.0;
};

/// point.bitrate minus the reference bitrate at the same PSNR.
BitrateDiff projected_bitrate_diff(const RDPoint& point, const RDCurve& reference);

/// point.psnr minus the reference PSNR at the same bitrate.
double projected_psnr_diff(const RDPoint& point, const RDCurve& reference);

/// Average bitrate difference of b relative to a over the overlapping PSNR
/// range, in percent; negative means b needs fewer bits.
double bd_rate(const RDCurve& a, const RDCurve& b);

// ---------------------------------------------------------------------------
// Suite summaries

struct VideoComparison {
    std::string video_id;
    double target_kbps = 0.0;
    double bitrate_kbps = 0.0;
    double psnr_db = 0.0;
    /// NaN when the point lies outside the reference curve's span.
    double proj_bitrate_diff_kbps = 0.0;
    double proj_bitrate_diff_pct = 0.0;
    double proj_psnr_diff_db = 0.0;
};

struct AccuracyBuckets {
    int under = 0;   ///< below target by more than the tolerance
    int within = 0;  ///< within +-tolerance of target
    int over = 0;
    double within_fraction() const;
};

struct SuiteSummary {
    std::vector<VideoComparison> videos;
    /// Count of videos whose projected diffs could not be computed.
    int out_of_span = 0;
    double median_proj_bitrate_diff_pct = 0.0;
    double p10_proj_bitrate_diff_pct = 0.0;
    double p90_proj_bitrate_diff_pct = 0.0;
    double median_proj_psnr_diff_db = 0.0;
    double median_abs_bitrate_error_pct = 0.0;
    AccuracyBuckets accuracy;
};

/// Builds an RD curve per video id from baseline traces at several targets.
std::map<std::string, RDCurve> curves_by_video(const std::vector<simenc::EpisodeTrace>& traces);

/// Compares each policy trace against its video's reference curve. Throws
/// InvalidArgument for an id missing from `reference`.
SuiteSummary summarize_suite(const std::vector<simenc::EpisodeTrace>& policy,
                             const std::map<std::string, RDCurve>& reference,
                             double accuracy_tolerance = 0.05);

/// Linear-interpolated percentile of `values` (NaNs skipped), q in [0,1].
double percentile(std::vector<double> values, double q);
double median(std::vector<double> values);

inline const std::vector<std::string>& comparison_columns() {
    static const std::vector<std::string> cols = {
        "video_id",       "target_kbps",           "bitrate_kbps",          "psnr_db",
        "proj_bitrate_diff_kbps", "proj_bitrate_diff_pct", "proj_psnr_diff_db"};
    return cols;
}

io::CsvTable comparisons_to_csv(const std::vector<VideoComparison>& rows);
std::vector<VideoComparison> comparisons_from_csv(const io::CsvTable& table);

}  // namespace nrc::metrics
