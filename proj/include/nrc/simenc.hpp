#pragma once

// Surrogate two-pass encoder: synthetic videos with first-pass statistics and a
// deterministic QP -> (bits, MSE) environment.

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "nrc/io.hpp"

namespace nrc::simenc {

inline constexpr int kMinQp = 0;
inline constexpr int kMaxQp = 255;
inline constexpr int kNumQp = 256;
inline constexpr std::string_view kVideoSchema = "simenc.v1";
inline constexpr std::string_view kTraceSchema = "trace.v1";

// ---------------------------------------------------------------------------
// Videos

struct FrameLatent {
    double intra_energy = 0.0;    ///< I_t, MSE units
    double inter_fraction = 1.0;  ///< rho_t in (0, 1]
    double noise_energy = 0.0;    ///< n_t >= 0
    double rate_multiplier = 1.0; ///< w_t > 0
    double mv_row_mean = 0.0;
    double mv_row_abs = 0.0;
    double mv_row_var = 0.0;
    double mv_col_mean = 0.0;
    double mv_col_abs = 0.0;
    double mv_col_var = 0.0;
    int scene_id = 0;
};

enum class FirstPassField : int {
    FrameIndex, FrameWeight, IntraError, CodedError, SrCodedError, FrameNoiseEnergy,
    PcntInter, PcntMotion, PcntSecondRef, PcntNeutral, PcntIntraLow, PcntIntraHigh,
    IntraSkipPct, IntraSmoothPct, InactiveZoneRows, InactiveZoneCols, MvRow, MvRowAbs,
    MvCol, MvColAbs, MvRowVar, MvColVar, MvInOutCount, Duration, FrameCount,
};

inline constexpr int kNumFirstPassFeatures = 25;

/// Canonical feature names, indexed by FirstPassField.
const std::array<std::string_view, kNumFirstPassFeatures>& first_pass_names();

struct FirstPassFeatures {
    std::array<double, kNumFirstPassFeatures> values{};

    double operator[](FirstPassField f) const { return values[static_cast<int>(f)]; }
    double& operator[](FirstPassField f) { return values[static_cast<int>(f)]; }
};

struct SyntheticVideo {
    std::string video_id;
    int num_frames = 0;
    double frame_rate = 30.0;
    int width = 640;
    int height = 480;
    std::vector<FrameLatent> frames;
    std::vector<FirstPassFeatures> first_pass;
    std::uint64_t seed = 0;

    double duration() const { return num_frames / frame_rate; }
    int num_blocks() const { return ((width + 15) / 16) * ((height + 15) / 16); }
    /// T x 25 matrix of first-pass features, row per frame.
    Eigen::MatrixXd first_pass_matrix() const;
};

struct VideoConfig {
    int min_frames = 100;
    int max_frames = 150;
    int width = 640;
    int height = 480;
    double frame_rate = 30.0;
    /// Number of scenes; 0 draws scene cuts with the mean length below.
    int scene_count = 0;
    double mean_scene_length = 45.0;
    /// Scene-level intra energy drawn log-uniformly in this range.
    double intra_energy_min = 60.0;
    double intra_energy_max = 2400.0;
    /// Scene-level inter fraction range (motions scale it up).
    double inter_fraction_min = 0.02;
    double inter_fraction_max = 0.45;
    /// Noise energy as a fraction of the scene's inter residual.
    double noise_fraction_max = 0.3;
    /// Log-std of per-frame jitter around scene levels; 0 gives constant latents.
    double frame_jitter = 0.12;
    double rate_noise_sigma = 0.15;
    double rate_noise_min = 0.6;
    double rate_noise_max = 1.8;

    void validate() const;
};

SyntheticVideo generate_video(std::uint64_t seed, const VideoConfig& config,
                              std::string video_id = {});

/// Recomputes the first-pass table from latents; generate_video uses this.
std::vector<FirstPassFeatures> derive_first_pass(const std::vector<FrameLatent>& frames,
                                                 double frame_rate);

io::json video_to_json(const SyntheticVideo& video);
SyntheticVideo video_from_json(const io::json& j);
void write_videos(const std::string& path, const std::vector<SyntheticVideo>& videos);
std::vector<SyntheticVideo> read_videos(const std::string& path);

// ---------------------------------------------------------------------------
// GOP structure

enum class FrameType : int { Key = 0, AltRefHidden = 1, Inter = 2 };
inline constexpr int kNumFrameTypes = 3;

std::string_view frame_type_name(FrameType t);

struct GopPlan {
    std::vector<FrameType> types;
    std::vector<bool> show;
    /// Coding index of the frame held in the LAST / GOLDEN slot when frame t is
    /// coded; -1 for none (key frame).
    std::vector<int> last_ref;
    std::vector<int> golden_ref;

    int size() const { return static_cast<int>(types.size()); }
};

inline constexpr int kDefaultGopInterval = 16;

GopPlan plan_gop(const SyntheticVideo& video, int gop_interval = kDefaultGopInterval);
GopPlan plan_gop(int num_frames, int gop_interval);

// ---------------------------------------------------------------------------
// Rate-distortion model

/// Q(qp) = 0.25 * exp(0.03 * qp); throws OutOfRange outside 0..255.
double quantizer_step(int qp);

struct RdModel {
    /// Error-propagation gain on the reference distortion.
    double propagation_gain = 0.5;
    double last_weight = 0.7;
    double golden_weight = 0.3;
    /// Residual bits per block per unit of 1/2 log2(E/D).
    double bits_per_block = 20.0;
    /// Header bits at 1200 blocks (640x480); scaled linearly by block count.
    double header_key = 4000.0;
    double header_alt_ref = 2500.0;
    double header_inter = 300.0;
};

struct FrameRecord {
    int qp = 0;
    double bits = 0.0;
    double mse = 0.0;
};

struct EncodeState {
    int cursor = 0;
    double d_last = 0.0;
    double d_golden = 0.0;
    double cumulative_bits = 0.0;
    std::vector<FrameRecord> history;
};

struct FrameOutcome {
    double bits = 0.0;
    double mse = 0.0;
    double residual_energy = 0.0;
};

struct EncodeStep {
    double bits = 0.0;
    double mse = 0.0;
    EncodeState next;
};

/// Trial encode of frame `state.cursor` at `qp` without committing.
FrameOutcome evaluate_frame(const SyntheticVideo& video, const GopPlan& gop,
                            const EncodeState& state, int qp, const RdModel& model = {});

/// Encodes the current frame and returns the advanced state. Throws OutOfRange
/// past the end of the episode or for an invalid qp.
EncodeStep encode_frame(const SyntheticVideo& video, const GopPlan& gop, EncodeState state,
                        int qp, const RdModel& model = {});

// ---------------------------------------------------------------------------
// Episodes

inline constexpr double kDefaultLambda = 0.02;

struct RewardConfig {
    double lambda = kDefaultLambda;  ///< penalty per kbps of overshoot
    double bitrate_target_kbps = 512.0;
};

struct StaticFeatures {
    double width = 0, height = 0, num_frames = 0, duration = 0, frame_rate = 0;
    double target_kbps = 0;
    double encode_speed = 0;
};

/// Per-step observation scalars (what a policy sees about the encode so far).
struct StepFeatures {
    FrameType frame_type = FrameType::Inter;
    int frame_index = 0;
    int prev_qp = -1;  ///< -1 before the first frame
    double prev_bits = 0.0;
    double prev_mse = 0.0;
    double cumulative_bits = 0.0;
    double relative_cumulative_bits = 0.0;
};

struct Observation {
    StaticFeatures statics;
    /// Non-owning; valid for the duration of run_episode.
    const SyntheticVideo* video = nullptr;
    StepFeatures step;
    /// Reward of the previous step; zero until the episode ends.
    double prev_reward = 0.0;
};

struct EpisodeTrace {
    std::string video_id;
    double target_kbps = 0.0;
    int num_frames = 0;
    double duration = 0.0;
    std::vector<int> qps;
    std::vector<double> bits;
    std::vector<double> mse;
    std::vector<bool> show;
    double psnr_db = 0.0;
    double bitrate_kbps = 0.0;
    double reward = 0.0;

    int size() const { return static_cast<int>(qps.size()); }
    bool complete() const { return num_frames > 0 && size() == num_frames; }
};

/// Reward after `steps_done` frames: zero until the final frame is encoded.
double step_reward(int steps_done, const EpisodeTrace& trace, const RewardConfig& cfg);

/// PSNR - lambda * max(0, bitrate - target); throws InvalidArgument if the
/// trace is incomplete.
double episode_reward(const EpisodeTrace& trace, const RewardConfig& cfg);

/// 10 log10(255^2 / mean show-frame MSE).
double aggregate_psnr(const std::vector<double>& mse, const std::vector<bool>& show);

using PolicyCallback = std::function<int(const Observation&)>;

StaticFeatures static_features(const SyntheticVideo& video, double target_kbps);
StepFeatures step_features(const SyntheticVideo& video, const GopPlan& gop,
                           const EncodeState& state, double target_kbps);

EpisodeTrace run_episode(const SyntheticVideo& video, const GopPlan& gop, double target_kbps,
                         const PolicyCallback& policy, double lambda = kDefaultLambda,
                         const RdModel& model = {});

/// Replays a fixed QP sequence without building observations.
EpisodeTrace replay_qps(const SyntheticVideo& video, const GopPlan& gop, double target_kbps,
                        const std::vector<int>& qps, double lambda = kDefaultLambda,
                        const RdModel& model = {});

/// Observations seen when replaying `qps` (policy inputs under teacher forcing).
std::vector<StepFeatures> replay_observations(const SyntheticVideo& video, const GopPlan& gop,
                                              double target_kbps, const std::vector<int>& qps,
                                              const RdModel& model = {});

io::json trace_to_json(const EpisodeTrace& trace);
EpisodeTrace trace_from_json(const io::json& j);
void write_traces(const std::string& path, const std::vector<EpisodeTrace>& traces);
std::vector<EpisodeTrace> read_traces(const std::string& path);

}  // namespace nrc::simenc
