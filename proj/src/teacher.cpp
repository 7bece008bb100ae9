#include "nrc/teacher.hpp"

#include <algorithm>
#include <cmath>

#include "nrc/error.hpp"
#include "nrc/parallel.hpp"

namespace nrc::teacher {

using simenc::FrameType;

void EsConfig::validate() const {
    require(sigma > 0.0, "ES sigma must be positive");
    require(batch >= 1, "ES batch must be >= 1");
    require(learning_rate > 0.0, "ES learning rate must be positive");
    require(decay_rate > 0.0 && decay_rate <= 1.0, "ES decay rate must be in (0, 1]");
    require(decay_steps >= 1, "ES decay steps must be >= 1");
    require(max_steps >= 0, "ES max steps must be >= 0");
    require(lambda > 0.0, "lambda must be positive");
}

double EsConfig::learning_rate_at(int step) const {
    return learning_rate * std::pow(decay_rate, static_cast<double>(step) / decay_steps);
}

std::vector<int> to_qps(const Eigen::VectorXd& theta) {
    std::vector<int> qps(static_cast<std::size_t>(theta.size()));
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        const double v = std::clamp(std::round(theta[i]), double(simenc::kMinQp), double(simenc::kMaxQp));
        qps[static_cast<std::size_t>(i)] = static_cast<int>(v);
    }
    return qps;
}

EsState es_step(EsState state, const EsConfig& config, const RewardFn& reward,
                const Eigen::MatrixXd& noise) {
    config.validate();
    require(noise.rows() == state.theta.size() && noise.cols() >= 1, "ES noise shape mismatch");
    const Eigen::Index n = noise.cols();
    Eigen::VectorXd update = Eigen::VectorXd::Zero(state.theta.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        const std::vector<int> cand = to_qps(state.theta + config.sigma * noise.col(i));
        const double f = reward(cand);
        if (!std::isfinite(f)) fail(ErrorKind::Divergence, "non-finite ES reward");
        // Strict comparison keeps the earliest candidate among ties.
        if (f > state.best_reward) {
            state.best_reward = f;
            state.best_qps = cand;
        }
        update += f * noise.col(i);
    }
    const double lr = config.learning_rate_at(state.step);
    state.theta += lr / (static_cast<double>(n) * config.sigma) * update;
    state.theta = state.theta.cwiseMax(double(simenc::kMinQp)).cwiseMin(double(simenc::kMaxQp));
    if (config.evaluate_mean) {
        const std::vector<int> mean = to_qps(state.theta);
        const double f = reward(mean);
        if (f > state.best_reward) {
            state.best_reward = f;
            state.best_qps = mean;
        }
    }
    ++state.step;
    return state;
}

Eigen::MatrixXd draw_noise(int dims, const EsConfig& config, Rng& rng) {
    Eigen::MatrixXd eps(dims, config.batch);
    int col = 0;
    while (col < config.batch) {
        for (int r = 0; r < dims; ++r) eps(r, col) = rng.normal();
        ++col;
        if (config.antithetic && col < config.batch) {
            eps.col(col) = -eps.col(col - 1);
            ++col;
        }
    }
    return eps;
}

EsResult run_es(const simenc::SyntheticVideo& video, const simenc::GopPlan& gop,
                double target_kbps, const EsConfig& config,
                const baseline::BaselineConfig& baseline_config) {
    config.validate();
    EsResult result;
    result.baseline_trace = baseline::run_baseline(video, gop, target_kbps, baseline_config, config.lambda);

    auto reward = [&](const std::vector<int>& qps) {
        return simenc::replay_qps(video, gop, target_kbps, qps, config.lambda).reward;
    };

    EsState state;
    state.theta = Eigen::Map<const Eigen::VectorXi>(result.baseline_trace.qps.data(),
                                                    video.num_frames)
                      .cast<double>();
    state.best_qps = result.baseline_trace.qps;
    state.best_reward = result.baseline_trace.reward;
    result.best_reward_history.push_back(state.best_reward);

    Rng rng(config.seed);
    for (int s = 0; s < config.max_steps; ++s) {
        const Eigen::MatrixXd noise = draw_noise(video.num_frames, config, rng);
        state = es_step(std::move(state), config, reward, noise);
        result.best_reward_history.push_back(state.best_reward);
    }
    result.best_qps = state.best_qps;
    result.trace = simenc::replay_qps(video, gop, target_kbps, result.best_qps, config.lambda);
    return result;
}

// ---------------------------------------------------------------------------

TeacherRecord make_record(const simenc::SyntheticVideo& video, const simenc::GopPlan& gop,
                          const simenc::EpisodeTrace& trace, Provenance provenance, double lambda) {
    require(trace.complete() && trace.video_id == video.video_id, "trace does not match video");
    TeacherRecord r;
    r.video_id = video.video_id;
    r.target_kbps = trace.target_kbps;
    r.statics = simenc::static_features(video, trace.target_kbps);
    r.first_pass = video.first_pass_matrix();
    r.steps = simenc::replay_observations(video, gop, trace.target_kbps, trace.qps);
    const auto replay = simenc::replay_qps(video, gop, trace.target_kbps, trace.qps, lambda);
    if (replay.bits != trace.bits)
        fail(ErrorKind::ReplayMismatch, "replayed bits differ from trace for " + video.video_id);
    r.label_qps = trace.qps;
    r.label_bits = trace.bits;
    r.psnr_db = replay.psnr_db;
    r.bitrate_kbps = replay.bitrate_kbps;
    r.reward = replay.reward;
    r.provenance = provenance;
    return r;
}

simenc::EpisodeTrace record_trace(const TeacherRecord& r) {
    simenc::EpisodeTrace t;
    t.video_id = r.video_id;
    t.target_kbps = r.target_kbps;
    t.num_frames = r.num_frames();
    t.duration = r.statics.duration;
    t.qps = r.label_qps;
    t.bits = r.label_bits;
    t.psnr_db = r.psnr_db;
    t.bitrate_kbps = r.bitrate_kbps;
    t.reward = r.reward;
    return t;
}

bool replay_matches(const TeacherRecord& record, const simenc::SyntheticVideo& video,
                    int gop_interval) {
    if (record.video_id != video.video_id || record.num_frames() != video.num_frames) return false;
    const auto gop = simenc::plan_gop(video, gop_interval);
    const auto replay = simenc::replay_qps(video, gop, record.target_kbps, record.label_qps);
    return replay.bits == record.label_bits;
}

std::vector<double> sample_targets(const DatasetConfig& config, std::size_t index) {
    require(config.bitrates_per_video >= 1, "bitrates_per_video must be >= 1");
    require(config.min_kbps > 0.0 && config.max_kbps >= config.min_kbps, "invalid bitrate range");
    Rng rng(derive_seed(config.seed, index));
    std::vector<double> out;
    for (int k = 0; k < config.bitrates_per_video; ++k)
        out.push_back(rng.uniform(config.min_kbps, config.max_kbps));
    return out;
}

std::vector<TeacherRecord> build_teacher_dataset(const std::vector<simenc::SyntheticVideo>& videos,
                                                 const DatasetConfig& dataset,
                                                 const EsConfig& es) {
    es.validate();
    struct Task {
        std::size_t video;
        double kbps;
    };
    std::vector<Task> tasks;
    for (std::size_t v = 0; v < videos.size(); ++v)
        for (double k : sample_targets(dataset, v)) tasks.push_back({v, k});

    std::vector<TeacherRecord> records(tasks.size());
    parallel_for(tasks.size(), dataset.workers, [&](std::size_t i) {
        const auto& video = videos[tasks[i].video];
        const auto gop = simenc::plan_gop(video, dataset.gop_interval);
        EsConfig cfg = es;
        cfg.seed = derive_seed(es.seed, i);
        const EsResult res = run_es(video, gop, tasks[i].kbps, cfg);
        TeacherRecord rec = make_record(video, gop, res.trace, Provenance::Es, es.lambda);
        double drift = 0.0;
        for (std::size_t t = 0; t < res.best_qps.size(); ++t)
            drift += std::abs(res.best_qps[t] - res.baseline_trace.qps[t]);
        rec.baseline_drift = drift / static_cast<double>(res.best_qps.size());
        if (rec.baseline_drift > dataset.max_baseline_drift)
            fail(ErrorKind::InvalidArgument,
                 "teacher drifted too far from the baseline on " + video.video_id);
        records[i] = std::move(rec);
    });
    return records;
}

// ---------------------------------------------------------------------------

namespace {

std::string provenance_name(Provenance p) { return p == Provenance::Es ? "ES" : "HER"; }

Provenance provenance_from(const std::string& s) {
    if (s == "ES") return Provenance::Es;
    if (s == "HER") return Provenance::Her;
    fail(ErrorKind::SchemaMismatch, "unknown provenance: " + s);
}

}  // namespace

io::json record_to_json(const TeacherRecord& r) {
    io::json steps = io::json::object();
    std::vector<int> type, index, prev_qp;
    std::vector<double> prev_bits, prev_mse, cum, rel;
    for (const auto& s : r.steps) {
        type.push_back(static_cast<int>(s.frame_type));
        index.push_back(s.frame_index);
        prev_qp.push_back(s.prev_qp);
        prev_bits.push_back(s.prev_bits);
        prev_mse.push_back(s.prev_mse);
        cum.push_back(s.cumulative_bits);
        rel.push_back(s.relative_cumulative_bits);
    }
    steps["frame_type"] = type;
    steps["frame_index"] = index;
    steps["prev_qp"] = prev_qp;
    steps["prev_bits"] = prev_bits;
    steps["prev_mse"] = prev_mse;
    steps["cumulative_bits"] = cum;
    steps["relative_cumulative_bits"] = rel;
    const auto& st = r.statics;
    return {{"schema", kTeacherSchema},
            {"video_id", r.video_id},
            {"target_kbps", r.target_kbps},
            {"statics",
             {{"width", st.width},
              {"height", st.height},
              {"num_frames", st.num_frames},
              {"duration", st.duration},
              {"frame_rate", st.frame_rate},
              {"target_kbps", st.target_kbps},
              {"encode_speed", st.encode_speed}}},
            {"first_pass", io::matrix_to_json(r.first_pass)},
            {"steps", steps},
            {"label_qps", r.label_qps},
            {"label_bits", r.label_bits},
            {"psnr_db", r.psnr_db},
            {"bitrate_kbps", r.bitrate_kbps},
            {"reward", r.reward},
            {"provenance", provenance_name(r.provenance)},
            {"baseline_drift", r.baseline_drift}};
}

TeacherRecord record_from_json(const io::json& j) {
    io::require_schema(j, kTeacherSchema);
    TeacherRecord r;
    try {
        r.video_id = j.at("video_id").get<std::string>();
        r.target_kbps = j.at("target_kbps").get<double>();
        const auto& st = j.at("statics");
        r.statics.width = st.at("width").get<double>();
        r.statics.height = st.at("height").get<double>();
        r.statics.num_frames = st.at("num_frames").get<double>();
        r.statics.duration = st.at("duration").get<double>();
        r.statics.frame_rate = st.at("frame_rate").get<double>();
        r.statics.target_kbps = st.at("target_kbps").get<double>();
        r.statics.encode_speed = st.at("encode_speed").get<double>();
        r.first_pass = io::matrix_from_json(j.at("first_pass"));
        const auto& s = j.at("steps");
        const auto type = s.at("frame_type").get<std::vector<int>>();
        const auto index = s.at("frame_index").get<std::vector<int>>();
        const auto prev_qp = s.at("prev_qp").get<std::vector<int>>();
        const auto prev_bits = s.at("prev_bits").get<std::vector<double>>();
        const auto prev_mse = s.at("prev_mse").get<std::vector<double>>();
        const auto cum = s.at("cumulative_bits").get<std::vector<double>>();
        const auto rel = s.at("relative_cumulative_bits").get<std::vector<double>>();
        const std::size_t n = type.size();
        if (index.size() != n || prev_qp.size() != n || prev_bits.size() != n ||
            prev_mse.size() != n || cum.size() != n || rel.size() != n)
            fail(ErrorKind::SchemaMismatch, "teacher record step columns differ in length");
        for (std::size_t t = 0; t < n; ++t) {
            if (type[t] < 0 || type[t] >= simenc::kNumFrameTypes)
                fail(ErrorKind::SchemaMismatch, "invalid frame type in teacher record");
            r.steps.push_back({static_cast<FrameType>(type[t]), index[t], prev_qp[t], prev_bits[t],
                               prev_mse[t], cum[t], rel[t]});
        }
        r.label_qps = j.at("label_qps").get<std::vector<int>>();
        r.label_bits = j.at("label_bits").get<std::vector<double>>();
        r.psnr_db = j.at("psnr_db").get<double>();
        r.bitrate_kbps = j.at("bitrate_kbps").get<double>();
        r.reward = j.at("reward").get<double>();
        r.provenance = provenance_from(j.at("provenance").get<std::string>());
        r.baseline_drift = j.at("baseline_drift").get<double>();
    } catch (const io::json::exception& e) {
        fail(ErrorKind::SchemaMismatch, std::string("malformed teacher record: ") + e.what());
    }
    if (r.label_qps.size() != r.steps.size() || r.label_bits.size() != r.steps.size() ||
        r.first_pass.rows() != static_cast<Eigen::Index>(r.steps.size()) ||
        r.first_pass.cols() != simenc::kNumFirstPassFeatures)
        fail(ErrorKind::SchemaMismatch, "teacher record arrays have inconsistent lengths");
    for (int q : r.label_qps)
        if (q < simenc::kMinQp || q > simenc::kMaxQp)
            fail(ErrorKind::SchemaMismatch, "teacher label QP out of range");
    return r;
}

void write_dataset(const std::string& path, const std::vector<TeacherRecord>& records) {
    std::vector<io::json> rows;
    rows.reserve(records.size());
    for (const auto& r : records) rows.push_back(record_to_json(r));
    io::write_jsonl(path, rows);
}

std::vector<TeacherRecord> read_dataset(const std::string& path) {
    std::vector<TeacherRecord> out;
    for (const auto& row : io::read_jsonl(path)) out.push_back(record_from_json(row));
    return out;
}

}  // namespace nrc::teacher
