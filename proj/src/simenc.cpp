#include "nrc/simenc.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "nrc/error.hpp"
#include "nrc/rng.hpp"

namespace nrc::simenc {

namespace {

constexpr double kReferenceBlocks = 1200.0;  // 640x480 in 16x16 blocks
constexpr double kPeakSquared = 255.0 * 255.0;

double clamp_unit(double v) { return std::clamp(v, 0.0, 1.0); }

void check_qp(int qp) {
    if (qp < kMinQp || qp > kMaxQp)
        fail(ErrorKind::OutOfRange, "qp out of range [0,255]: " + std::to_string(qp));
}

double header_bits(FrameType type, double blocks, const RdModel& m) {
    const double scale = blocks / kReferenceBlocks;
    switch (type) {
        case FrameType::Key: return m.header_key * scale;
        case FrameType::AltRefHidden: return m.header_alt_ref * scale;
        case FrameType::Inter: return m.header_inter * scale;
    }
    return 0.0;
}

EncodeState commit(EncodeState state, FrameType type, int qp, const FrameOutcome& out) {
    state.history.push_back({qp, out.bits, out.mse});
    state.cumulative_bits += out.bits;
    state.d_last = out.mse;
    if (type != FrameType::Inter) state.d_golden = out.mse;
    ++state.cursor;
    return state;
}

void finalize(EpisodeTrace& trace, double lambda) {
    double total = 0.0;
    for (double b : trace.bits) total += b;
    trace.bitrate_kbps = total / trace.duration / 1000.0;
    trace.psnr_db = aggregate_psnr(trace.mse, trace.show);
    trace.reward = episode_reward(trace, RewardConfig{lambda, trace.target_kbps});
}

EpisodeTrace start_trace(const SyntheticVideo& video, const GopPlan& gop, double target_kbps) {
    require(gop.size() == video.num_frames, "GOP plan does not match the video length");
    require(target_kbps > 0.0, "target bitrate must be positive");
    EpisodeTrace trace;
    trace.video_id = video.video_id;
    trace.target_kbps = target_kbps;
    trace.num_frames = video.num_frames;
    trace.duration = video.duration();
    trace.qps.reserve(video.num_frames);
    trace.bits.reserve(video.num_frames);
    trace.mse.reserve(video.num_frames);
    trace.show = gop.show;
    return trace;
}

}  // namespace

// ---------------------------------------------------------------------------
// Videos

const std::array<std::string_view, kNumFirstPassFeatures>& first_pass_names() {
    static const std::array<std::string_view, kNumFirstPassFeatures> names = {
        "frame_index", "frame_weight", "intra_error", "coded_error", "sr_coded_error",
        "frame_noise_energy", "pcnt_inter", "pcnt_motion", "pcnt_second_ref", "pcnt_neutral",
        "pcnt_intra_low", "pcnt_intra_high", "intra_skip_pct", "intra_smooth_pct",
        "inactive_zone_rows", "inactive_zone_cols", "MVr", "mvr_abs", "MVc", "mvc_abs",
        "MVrv", "Mvcv", "mv_in_out_count", "duration", "frame_count"};
    return names;
}

Eigen::MatrixXd SyntheticVideo::first_pass_matrix() const {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(first_pass.size()), kNumFirstPassFeatures);
    for (std::size_t t = 0; t < first_pass.size(); ++t)
        for (int k = 0; k < kNumFirstPassFeatures; ++k)
            m(static_cast<Eigen::Index>(t), k) = first_pass[t].values[k];
    return m;
}

void VideoConfig::validate() const {
    require(min_frames >= 2, "min_frames must be >= 2");
    require(max_frames >= min_frames, "max_frames must be >= min_frames");
    require(width > 0 && height > 0, "resolution must be positive");
    require(frame_rate > 0.0, "frame_rate must be positive");
    require(scene_count >= 0, "scene_count must be >= 0");
    require(mean_scene_length >= 1.0, "mean_scene_length must be >= 1");
    require(intra_energy_min > 0.0 && intra_energy_max >= intra_energy_min,
            "intra energy range must be positive and ordered");
    require(inter_fraction_min > 0.0 && inter_fraction_max <= 1.0 &&
                inter_fraction_max >= inter_fraction_min,
            "inter fraction range must lie in (0,1]");
    require(noise_fraction_max >= 0.0, "noise fraction must be >= 0");
    require(frame_jitter >= 0.0 && rate_noise_sigma >= 0.0, "jitter must be >= 0");
    require(rate_noise_min > 0.0 && rate_noise_max >= rate_noise_min,
            "rate noise clamp must be positive and ordered");
}

SyntheticVideo generate_video(std::uint64_t seed, const VideoConfig& config, std::string video_id) {
    config.validate();
    Rng rng(seed);

    SyntheticVideo video;
    video.video_id = video_id.empty() ? "vid_" + std::to_string(seed) : std::move(video_id);
    video.seed = seed;
    video.frame_rate = config.frame_rate;
    video.width = config.width;
    video.height = config.height;
    const auto span = static_cast<std::uint64_t>(config.max_frames - config.min_frames + 1);
    video.num_frames = config.min_frames + static_cast<int>(rng.uniform_index(span));
    const int T = video.num_frames;

    // Scene boundaries.
    std::vector<int> scene_start;
    if (config.scene_count > 0) {
        const int n = std::min(config.scene_count, T);
        for (int s = 0; s < n; ++s) scene_start.push_back(s * T / n);
    } else {
        const double p_cut = 1.0 / config.mean_scene_length;
        constexpr int kMinSceneLength = 8;
        scene_start.push_back(0);
        int last = 0;
        for (int t = 1; t < T; ++t) {
            if (t - last >= kMinSceneLength && rng.uniform() < p_cut) {
                scene_start.push_back(t);
                last = t;
            }
        }
    }

    struct Scene {
        double intra, rho, noise, motion, mv_row, mv_col, spread;
    };
    std::vector<Scene> scenes;
    const double log_i_lo = std::log(config.intra_energy_min);
    const double log_i_hi = std::log(config.intra_energy_max);
    const double log_r_lo = std::log(config.inter_fraction_min);
    const double log_r_hi = std::log(config.inter_fraction_max);
    for (std::size_t s = 0; s < scene_start.size(); ++s) {
        Scene sc{};
        sc.intra = std::exp(rng.uniform(log_i_lo, log_i_hi));
        sc.motion = rng.uniform();
        const double mix = 0.6 * sc.motion + 0.4 * rng.uniform();
        sc.rho = std::exp(log_r_lo + (log_r_hi - log_r_lo) * mix);
        sc.noise = sc.rho * sc.intra * rng.uniform(0.0, config.noise_fraction_max);
        const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double speed = 12.0 * sc.motion;
        sc.mv_row = speed * std::sin(angle);
        sc.mv_col = speed * std::cos(angle);
        sc.spread = 0.5 + 4.0 * sc.motion;
        scenes.push_back(sc);
    }

    video.frames.resize(static_cast<std::size_t>(T));
    std::size_t scene = 0;
    const double jitter = config.frame_jitter;
    for (int t = 0; t < T; ++t) {
        if (scene + 1 < scene_start.size() && t == scene_start[scene + 1]) ++scene;
        const Scene& sc = scenes[scene];
        FrameLatent& f = video.frames[static_cast<std::size_t>(t)];
        f.scene_id = static_cast<int>(scene);
        f.intra_energy = sc.intra * std::exp(jitter * rng.normal());
        f.inter_fraction = std::clamp(sc.rho * std::exp(jitter * rng.normal()), 0.005, 1.0);
        // A scene cut has no usable temporal reference.
        if (t > 0 && t == scene_start[scene]) f.inter_fraction = 1.0;
        f.noise_energy = sc.noise * std::exp(jitter * rng.normal());
        f.rate_multiplier = std::clamp(std::exp(config.rate_noise_sigma * rng.normal()),
                                       config.rate_noise_min, config.rate_noise_max);
        f.mv_row_mean = sc.mv_row + jitter * sc.spread * rng.normal();
        f.mv_col_mean = sc.mv_col + jitter * sc.spread * rng.normal();
        f.mv_row_abs = std::abs(f.mv_row_mean) + 0.8 * sc.spread;
        f.mv_col_abs = std::abs(f.mv_col_mean) + 0.8 * sc.spread;
        f.mv_row_var = sc.spread * sc.spread;
        f.mv_col_var = sc.spread * sc.spread;
    }

    video.first_pass = derive_first_pass(video.frames, video.frame_rate);
    return video;
}

std::vector<FirstPassFeatures> derive_first_pass(const std::vector<FrameLatent>& frames,
                                                 double frame_rate) {
    using F = FirstPassField;
    std::vector<FirstPassFeatures> out(frames.size());
    constexpr double kWeightScale = 8.0;
    double weight_sum = 0.0;
    for (std::size_t t = 0; t < frames.size(); ++t) {
        const FrameLatent& f = frames[t];
        FirstPassFeatures& fp = out[t];
        const double intra = f.intra_energy;
        const double rho = t == 0 ? 1.0 : f.inter_fraction;
        const double coded = std::min(intra, rho * intra + f.noise_energy);
        const double rho_golden = std::min(1.0, 1.25 * rho);
        const double sr_coded = std::min(intra, rho_golden * intra + f.noise_energy);
        const double motion = std::hypot(f.mv_row_mean, f.mv_col_mean);
        const double pcnt_inter = t == 0 ? 0.0 : clamp_unit(1.0 - rho);
        const double pcnt_intra = 1.0 - pcnt_inter;
        const double low_share = std::exp(-intra / 400.0);

        fp[F::FrameIndex] = static_cast<double>(t);
        fp[F::IntraError] = intra;
        fp[F::CodedError] = coded;
        fp[F::SrCodedError] = sr_coded;
        fp[F::FrameNoiseEnergy] = f.noise_energy;
        fp[F::PcntInter] = pcnt_inter;
        fp[F::PcntMotion] = pcnt_inter * motion / (1.0 + motion);
        fp[F::PcntSecondRef] = pcnt_inter * clamp_unit(0.5 * (1.0 - rho_golden / std::max(rho, 1e-9)) + 0.2);
        fp[F::PcntNeutral] = clamp_unit(0.15 * std::exp(-std::abs(coded - intra) / (intra + 1e-9) * 4.0));
        fp[F::PcntIntraLow] = pcnt_intra * low_share;
        fp[F::PcntIntraHigh] = pcnt_intra * (1.0 - low_share);
        fp[F::IntraSkipPct] = clamp_unit(0.5 * std::exp(-intra / 100.0));
        fp[F::IntraSmoothPct] = clamp_unit(std::exp(-intra / 200.0));
        fp[F::InactiveZoneRows] = 0.0;
        fp[F::InactiveZoneCols] = 0.0;
        fp[F::MvRow] = f.mv_row_mean;
        fp[F::MvRowAbs] = f.mv_row_abs;
        fp[F::MvCol] = f.mv_col_mean;
        fp[F::MvColAbs] = f.mv_col_abs;
        fp[F::MvRowVar] = f.mv_row_var;
        fp[F::MvColVar] = f.mv_col_var;
        fp[F::MvInOutCount] = clamp_unit(std::sqrt(f.mv_row_var + f.mv_col_var) / 10.0);
        fp[F::Duration] = 1.0 / frame_rate;
        fp[F::FrameCount] = 1.0;
        weight_sum += std::log1p(coded / kWeightScale);
    }
    // Frame weight: log-compressed coded error relative to the video mean, a
    // proxy for the bits a frame needs at moderate distortion.
    const double mean_weight = frames.empty() ? 1.0 : weight_sum / static_cast<double>(frames.size());
    for (auto& fp : out) fp[F::FrameWeight] = std::log1p(fp[F::CodedError] / kWeightScale) / mean_weight;
    return out;
}

io::json video_to_json(const SyntheticVideo& video) {
    io::json frames = io::json::array();
    for (const auto& f : video.frames) {
        frames.push_back({{"intra_energy", f.intra_energy},
                          {"inter_fraction", f.inter_fraction},
                          {"noise_energy", f.noise_energy},
                          {"rate_multiplier", f.rate_multiplier},
                          {"mv_row_mean", f.mv_row_mean},
                          {"mv_row_abs", f.mv_row_abs},
                          {"mv_row_var", f.mv_row_var},
                          {"mv_col_mean", f.mv_col_mean},
                          {"mv_col_abs", f.mv_col_abs},
                          {"mv_col_var", f.mv_col_var},
                          {"scene_id", f.scene_id}});
    }
    io::json first_pass = io::json::array();
    for (const auto& fp : video.first_pass) first_pass.push_back(fp.values);
    return {{"schema", kVideoSchema},
            {"video_id", video.video_id},
            {"num_frames", video.num_frames},
            {"frame_rate", video.frame_rate},
            {"width", video.width},
            {"height", video.height},
            {"seed", video.seed},
            {"frames", frames},
            {"first_pass_names", first_pass_names()},
            {"first_pass", first_pass}};
}

SyntheticVideo video_from_json(const io::json& j) {
    io::require_schema(j, kVideoSchema);
    SyntheticVideo v;
    try {
        v.video_id = j.at("video_id").get<std::string>();
        v.num_frames = j.at("num_frames").get<int>();
        v.frame_rate = j.at("frame_rate").get<double>();
        v.width = j.at("width").get<int>();
        v.height = j.at("height").get<int>();
        v.seed = j.at("seed").get<std::uint64_t>();
        for (const auto& f : j.at("frames")) {
            FrameLatent l;
            l.intra_energy = f.at("intra_energy").get<double>();
            l.inter_fraction = f.at("inter_fraction").get<double>();
            l.noise_energy = f.at("noise_energy").get<double>();
            l.rate_multiplier = f.at("rate_multiplier").get<double>();
            l.mv_row_mean = f.at("mv_row_mean").get<double>();
            l.mv_row_abs = f.at("mv_row_abs").get<double>();
            l.mv_row_var = f.at("mv_row_var").get<double>();
            l.mv_col_mean = f.at("mv_col_mean").get<double>();
            l.mv_col_abs = f.at("mv_col_abs").get<double>();
            l.mv_col_var = f.at("mv_col_var").get<double>();
            l.scene_id = f.at("scene_id").get<int>();
            v.frames.push_back(l);
        }
        for (const auto& row : j.at("first_pass")) {
            FirstPassFeatures fp;
            fp.values = row.get<std::array<double, kNumFirstPassFeatures>>();
            v.first_pass.push_back(fp);
        }
    } catch (const io::json::exception& e) {
        fail(ErrorKind::SchemaMismatch, std::string("malformed video record: ") + e.what());
    }
    if (static_cast<int>(v.frames.size()) != v.num_frames ||
        static_cast<int>(v.first_pass.size()) != v.num_frames)
        fail(ErrorKind::SchemaMismatch, "video " + v.video_id + ": frame count mismatch");
    return v;
}

void write_videos(const std::string& path, const std::vector<SyntheticVideo>& videos) {
    std::vector<io::json> rows;
    rows.reserve(videos.size());
    for (const auto& v : videos) rows.push_back(video_to_json(v));
    io::write_jsonl(path, rows);
}

std::vector<SyntheticVideo> read_videos(const std::string& path) {
    std::vector<SyntheticVideo> out;
    for (const auto& row : io::read_jsonl(path)) out.push_back(video_from_json(row));
    return out;
}

// ---------------------------------------------------------------------------
// GOP

std::string_view frame_type_name(FrameType t) {
    switch (t) {
        case FrameType::Key: return "KEY";
        case FrameType::AltRefHidden: return "ALT_REF_HIDDEN";
        case FrameType::Inter: return "INTER";
    }
    return "?";
}

GopPlan plan_gop(int num_frames, int gop_interval) {
    require(num_frames >= 1, "plan_gop needs at least one frame");
    require(gop_interval >= 2, "gop_interval must be >= 2");
    GopPlan plan;
    const auto n = static_cast<std::size_t>(num_frames);
    plan.types.resize(n);
    plan.show.resize(n);
    plan.last_ref.resize(n);
    plan.golden_ref.resize(n);
    int golden = -1;
    for (int t = 0; t < num_frames; ++t) {
        const auto i = static_cast<std::size_t>(t);
        FrameType type = FrameType::Inter;
        if (t == 0) type = FrameType::Key;
        else if (t % gop_interval == 0) type = FrameType::AltRefHidden;
        plan.types[i] = type;
        plan.show[i] = type != FrameType::AltRefHidden;
        plan.last_ref[i] = t - 1;
        plan.golden_ref[i] = golden;
        if (type != FrameType::Inter) golden = t;
    }
    return plan;
}

GopPlan plan_gop(const SyntheticVideo& video, int gop_interval) {
    return plan_gop(video.num_frames, gop_interval);
}

// ---------------------------------------------------------------------------
// Rate-distortion model

double quantizer_step(int qp) {
    check_qp(qp);
    return 0.25 * std::exp(0.03 * qp);
}

FrameOutcome evaluate_frame(const SyntheticVideo& video, const GopPlan& gop,
                            const EncodeState& state, int qp, const RdModel& model) {
    if (state.cursor < 0 || state.cursor >= video.num_frames)
        fail(ErrorKind::OutOfRange, "encode past the end of the episode");
    check_qp(qp);
    const auto t = static_cast<std::size_t>(state.cursor);
    const FrameLatent& f = video.frames[t];
    const FrameType type = gop.types[t];

    double energy = 0.0;
    if (type == FrameType::Key) {
        energy = f.intra_energy + f.noise_energy;
    } else {
        const double d_ref = model.last_weight * state.d_last + model.golden_weight * state.d_golden;
        energy = f.inter_fraction * f.intra_energy + f.noise_energy + model.propagation_gain * d_ref;
    }
    const double q = quantizer_step(qp);
    const double mse = std::min(energy, q * q / 12.0);
    const double blocks = video.num_blocks();
    const double residual =
        model.bits_per_block * blocks * f.rate_multiplier * std::max(0.0, 0.5 * std::log2(energy / mse));
    return {header_bits(type, blocks, model) + residual, mse, energy};
}

EncodeStep encode_frame(const SyntheticVideo& video, const GopPlan& gop, EncodeState state,
                        int qp, const RdModel& model) {
    const FrameOutcome out = evaluate_frame(video, gop, state, qp, model);
    const FrameType type = gop.types[static_cast<std::size_t>(state.cursor)];
    return {out.bits, out.mse, commit(std::move(state), type, qp, out)};
}

// ---------------------------------------------------------------------------
// Episodes

double aggregate_psnr(const std::vector<double>& mse, const std::vector<bool>& show) {
    require(mse.size() == show.size(), "mse/show length mismatch");
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < mse.size(); ++i) {
        if (!show[i]) continue;
        sum += mse[i];
        ++n;
    }
    require(n > 0, "no show frames to aggregate");
    return 10.0 * std::log10(kPeakSquared / (sum / static_cast<double>(n)));
}

double episode_reward(const EpisodeTrace& trace, const RewardConfig& cfg) {
    require(cfg.lambda > 0.0, "lambda must be positive");
    if (!trace.complete()) fail(ErrorKind::InvalidArgument, "episode_reward on an incomplete trace");
    return trace.psnr_db - cfg.lambda * std::max(0.0, trace.bitrate_kbps - cfg.bitrate_target_kbps);
}

double step_reward(int steps_done, const EpisodeTrace& trace, const RewardConfig& cfg) {
    if (steps_done < trace.num_frames) return 0.0;
    return episode_reward(trace, cfg);
}

StaticFeatures static_features(const SyntheticVideo& video, double target_kbps) {
    StaticFeatures s;
    s.width = video.width;
    s.height = video.height;
    s.num_frames = video.num_frames;
    s.duration = video.duration();
    s.frame_rate = video.frame_rate;
    s.target_kbps = target_kbps;
    s.encode_speed = 0.0;
    return s;
}

StepFeatures step_features(const SyntheticVideo& video, const GopPlan& gop,
                           const EncodeState& state, double target_kbps) {
    StepFeatures s;
    s.frame_index = state.cursor;
    s.frame_type = gop.types[static_cast<std::size_t>(state.cursor)];
    if (!state.history.empty()) {
        const FrameRecord& prev = state.history.back();
        s.prev_qp = prev.qp;
        s.prev_bits = prev.bits;
        s.prev_mse = prev.mse;
    }
    s.cumulative_bits = state.cumulative_bits;
    s.relative_cumulative_bits = state.cumulative_bits / (target_kbps * 1000.0 * video.duration());
    return s;
}

EpisodeTrace run_episode(const SyntheticVideo& video, const GopPlan& gop, double target_kbps,
                         const PolicyCallback& policy, double lambda, const RdModel& model) {
    EpisodeTrace trace = start_trace(video, gop, target_kbps);
    Observation obs;
    obs.statics = static_features(video, target_kbps);
    obs.video = &video;
    EncodeState state;
    for (int t = 0; t < video.num_frames; ++t) {
        obs.step = step_features(video, gop, state, target_kbps);
        obs.prev_reward = 0.0;
        const int qp = policy(obs);
        EncodeStep step = encode_frame(video, gop, std::move(state), qp, model);
        state = std::move(step.next);
        trace.qps.push_back(qp);
        trace.bits.push_back(step.bits);
        trace.mse.push_back(step.mse);
    }
    finalize(trace, lambda);
    return trace;
}

EpisodeTrace replay_qps(const SyntheticVideo& video, const GopPlan& gop, double target_kbps,
                        const std::vector<int>& qps, double lambda, const RdModel& model) {
    require(static_cast<int>(qps.size()) == video.num_frames, "QP sequence length mismatch");
    EpisodeTrace trace = start_trace(video, gop, target_kbps);
    // History is not needed here, so the state is advanced without records.
    EncodeState state;
    for (int t = 0; t < video.num_frames; ++t) {
        const int qp = qps[static_cast<std::size_t>(t)];
        const FrameOutcome out = evaluate_frame(video, gop, state, qp, model);
        state.cumulative_bits += out.bits;
        state.d_last = out.mse;
        if (gop.types[static_cast<std::size_t>(t)] != FrameType::Inter) state.d_golden = out.mse;
        ++state.cursor;
        trace.qps.push_back(qp);
        trace.bits.push_back(out.bits);
        trace.mse.push_back(out.mse);
    }
    finalize(trace, lambda);
    return trace;
}

std::vector<StepFeatures> replay_observations(const SyntheticVideo& video, const GopPlan& gop,
                                              double target_kbps, const std::vector<int>& qps,
                                              const RdModel& model) {
    std::vector<StepFeatures> steps;
    steps.reserve(qps.size());
    std::size_t t = 0;
    run_episode(
        video, gop, target_kbps,
        [&](const Observation& obs) {
            steps.push_back(obs.step);
            return qps.at(t++);
        },
        kDefaultLambda, model);
    return steps;
}

io::json trace_to_json(const EpisodeTrace& trace) {
    std::vector<int> show(trace.show.begin(), trace.show.end());
    return {{"schema", kTraceSchema},
            {"video_id", trace.video_id},
            {"target_kbps", trace.target_kbps},
            {"num_frames", trace.num_frames},
            {"duration", trace.duration},
            {"qps", trace.qps},
            {"bits", trace.bits},
            {"mse", trace.mse},
            {"show", show},
            {"psnr_db", trace.psnr_db},
            {"bitrate_kbps", trace.bitrate_kbps},
            {"reward", trace.reward}};
}

EpisodeTrace trace_from_json(const io::json& j) {
    io::require_schema(j, kTraceSchema);
    EpisodeTrace t;
    try {
        t.video_id = j.at("video_id").get<std::string>();
        t.target_kbps = j.at("target_kbps").get<double>();
        t.num_frames = j.at("num_frames").get<int>();
        t.duration = j.at("duration").get<double>();
        t.qps = j.at("qps").get<std::vector<int>>();
        t.bits = j.at("bits").get<std::vector<double>>();
        t.mse = j.at("mse").get<std::vector<double>>();
        for (int s : j.at("show").get<std::vector<int>>()) t.show.push_back(s != 0);
        t.psnr_db = j.at("psnr_db").get<double>();
        t.bitrate_kbps = j.at("bitrate_kbps").get<double>();
        t.reward = j.at("reward").get<double>();
    } catch (const io::json::exception& e) {
        fail(ErrorKind::SchemaMismatch, std::string("malformed trace record: ") + e.what());
    }
    return t;
}

void write_traces(const std::string& path, const std::vector<EpisodeTrace>& traces) {
    std::vector<io::json> rows;
    rows.reserve(traces.size());
    for (const auto& t : traces) rows.push_back(trace_to_json(t));
    io::write_jsonl(path, rows);
}

std::vector<EpisodeTrace> read_traces(const std::string& path) {
    std::vector<EpisodeTrace> out;
    for (const auto& row : io::read_jsonl(path)) out.push_back(trace_from_json(row));
    return out;
}

}  // namespace nrc::simenc
