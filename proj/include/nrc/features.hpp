#pragma once

// Policy input features: standardization statistics fitted on a teacher
// corpus, log1p on count-like features, and the per-step input bundle.

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "nrc/io.hpp"
#include "nrc/simenc.hpp"

namespace nrc::teacher {
struct TeacherRecord;
}

namespace nrc::policy {

inline constexpr int kNumStatic = 7;
inline constexpr int kNumStep = 9;
/// Dense part of the per-step bundle; embeddings are appended by the network.
inline constexpr int kBundleDense = kNumStatic + kNumStep;
inline constexpr int kEmbedDim = 16;
inline constexpr double kVarianceFloor = 1e-6;

/// Dense feature names in bundle order (statics then step scalars).
const std::array<std::string_view, kBundleDense>& bundle_names();

struct Standardizer {
    Eigen::VectorXd mean;
    Eigen::VectorXd stddev;
    /// log1p is applied before standardization where set.
    std::vector<bool> log1p;
    /// Passed through unchanged where false.
    std::vector<bool> normalize;

    int size() const { return static_cast<int>(mean.size()); }
    double apply(int i, double v) const;
};

struct FeatureSpec {
    Standardizer first_pass;  // 25 first-pass columns
    Standardizer bundle;      // kBundleDense columns
    /// Label frame-bit statistics (kilobits) for the frame-size head.
    double bits_mean_kbit = 0.0;
    double bits_std_kbit = 1.0;
    bool fitted = false;

    int bundle_dim() const { return kBundleDense; }
    /// Index of a dense bundle feature; throws InvalidArgument for unknown names.
    static int bundle_index(std::string_view name);

    Eigen::MatrixXd normalize_first_pass(const Eigen::MatrixXd& raw) const;
};

/// Raw (unnormalized) dense bundle values for one step.
Eigen::VectorXd raw_bundle(const simenc::StaticFeatures& statics, const simenc::StepFeatures& step,
                           double prev_reward);

/// Fits a frozen spec on the records (first-pass rows, bundles and labels).
FeatureSpec fit_feature_spec(const std::vector<teacher::TeacherRecord>& records);

/// One step's policy input: normalized dense features plus embedding indices.
struct InputBundle {
    Eigen::VectorXd dense;
    int frame_type = 0;
    /// -1 before the first frame (zero embedding).
    int prev_qp = -1;
};

/// Throws InvalidArgument if the spec is unfitted or prev_qp is out of range.
InputBundle build_features(const simenc::StaticFeatures& statics, const simenc::StepFeatures& step,
                           const FeatureSpec& spec, int prev_qp, double prev_reward);

/// Bundles for every step of a record (teacher forcing).
std::vector<InputBundle> record_bundles(const teacher::TeacherRecord& record, const FeatureSpec& spec);

io::json spec_to_json(const FeatureSpec& spec);
FeatureSpec spec_from_json(const io::json& j);

}  // namespace nrc::policy
