#include "tcomplete/model.hpp"

#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "tcomplete/errors.hpp"
#include "tcomplete/io.hpp"

namespace tcomplete::model {

namespace {

constexpr char kCheckpointMagic[4] = {'T', 'C', 'K', 'P'};
constexpr std::uint32_t kCheckpointVersion = 1;
constexpr char kSessionMagic[4] = {'T', 'S', 'E', 'S'};
constexpr std::uint32_t kSessionVersion = 1;

const ModelConfig& validated(const ModelConfig& cfg) {
    cfg.validate();
    return cfg;
}

void expect_magic(std::istream& in, const char (&magic)[4], const char* what) {
    char got[4];
    in.read(got, 4);
    if (!in || std::memcmp(got, magic, 4) != 0)
        throw IoError(std::string(what) + ": bad magic");
}

void write_config_section(std::ostream& out, const ConfigMap& map) {
    bin::write_u32(out, static_cast<std::uint32_t>(map.entries().size()));
    for (const auto& [key, value] : map.entries()) {
        bin::write_string(out, key);
        bin::write_string(out, value);
    }
}

ConfigMap read_config_section(std::istream& in, const char* what) {
    ConfigMap map;
    const std::uint32_t n = bin::read_u32(in, what);
    for (std::uint32_t i = 0; i < n; ++i) {
        const std::string key = bin::read_string(in, what);
        map.set(key, bin::read_string(in, what));
    }
    return map;
}

}  // namespace

CompletionModel::CompletionModel(const ModelConfig& cfg, std::uint64_t init_seed,
                                 stage1::InitMode mode)
    : cfg_(validated(cfg)),
      init_rng_(init_seed),
      stage1_(store_, cfg_.encoder, init_rng_, mode),
      gru_(store_, "gru", cfg_.temporal, init_rng_, cfg_.encoder.d_s),
      fuser_(store_, "fuser", cfg_.temporal, init_rng_),
      gcn_(store_, "gcn", 3 + cfg_.temporal.fused_channels(), cfg_.refine, init_rng_) {}

CompletionModel::FrameResult CompletionModel::process_frame(ad::Tape& tape,
                                                            const PointCloud& frame,
                                                            temporal::TemporalState& state,
                                                            std::int64_t frame_index,
                                                            bool use_recurrence) {
    FrameResult r;
    r.s1 = stage1_.encode(tape, store_, frame);
    if (use_recurrence) {
        const int fused = gru_.update_state(tape, store_, r.s1.shape_code_node, state);
        r.s1.shape_code_node = fused;
        r.s1.shape_code = tape.value(fused).row(0).transpose();
        r.used_recurrence = true;
    }
    stage1_.decode_into(tape, store_, r.s1);
    temporal::window_push(state, r.s1.aligned[0], frame_index, cfg_.temporal);
    r.s2 = refine::stage2_forward(tape, store_, r.s1, state, fuser_, gcn_, cfg_.refine);
    return r;
}

stage1::Stage1Output CompletionModel::stage1_forward(ad::Tape& tape, const PointCloud& frame) {
    return stage1_.forward(tape, store_, frame);
}

temporal::TemporalState CompletionModel::make_state() const {
    return temporal::make_temporal_state(cfg_.temporal);
}

void save_checkpoint(const std::filesystem::path& path, const CompletionModel& model,
                     std::int64_t adam_steps, const ConfigMap& meta) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for write: " + path.string());
    out.write(kCheckpointMagic, 4);
    bin::write_u32(out, kCheckpointVersion);

    ConfigMap cfg_map;
    model_config_to(model.config(), cfg_map);
    write_config_section(out, cfg_map);
    write_config_section(out, meta);
    bin::write_i64(out, adam_steps);

    const auto& params = model.params().all();
    bin::write_u32(out, static_cast<std::uint32_t>(params.size()));
    for (const auto& p : params) {
        bin::write_string(out, p.name);
        bin::write_matrix(out, p.value);
        bin::write_matrix(out, p.adam_m);
        bin::write_matrix(out, p.adam_v);
    }
    if (!out) throw IoError("checkpoint: write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    expect_magic(in, kCheckpointMagic, "checkpoint");
    const std::uint32_t version = bin::read_u32(in, "checkpoint version");
    if (version != kCheckpointVersion)
        throw IoError("checkpoint: unsupported version " + std::to_string(version));

    const ConfigMap cfg_map = read_config_section(in, "checkpoint config");
    Checkpoint ck;
    ck.meta = read_config_section(in, "checkpoint meta");
    ck.adam_steps = bin::read_i64(in, "checkpoint optimizer steps");

    const ModelConfig cfg = model_config_from(cfg_map, full_profile());
    ck.model = std::make_unique<CompletionModel>(cfg, /*init_seed=*/0);

    auto& store = ck.model->params();
    const std::uint32_t count = bin::read_u32(in, "checkpoint parameter count");
    if (count != store.size())
        throw IoError("checkpoint: expected " + std::to_string(store.size()) +
                      " parameters, file has " + std::to_string(count));
    std::vector<bool> seen(store.size(), false);
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::string name = bin::read_string(in, "checkpoint parameter name");
        const Eigen::MatrixXd value = bin::read_matrix(in, "checkpoint parameter value");
        const Eigen::MatrixXd m = bin::read_matrix(in, "checkpoint first moment");
        const Eigen::MatrixXd v = bin::read_matrix(in, "checkpoint second moment");
        const int id = store.find(name);
        if (id < 0) throw IoError("checkpoint: unknown parameter " + name);
        if (seen[static_cast<std::size_t>(id)])
            throw IoError("checkpoint: duplicate parameter " + name);
        auto& p = store.param(id);
        const auto same_shape = [&](const Eigen::MatrixXd& a) {
            return a.rows() == p.value.rows() && a.cols() == p.value.cols();
        };
        if (!same_shape(value) || !same_shape(m) || !same_shape(v))
            throw IoError("checkpoint: shape mismatch for " + name);
        p.value = value;
        p.adam_m = m;
        p.adam_v = v;
        seen[static_cast<std::size_t>(id)] = true;
    }
    return ck;
}

void save_session(const std::filesystem::path& path, const temporal::TemporalState& state) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for write: " + path.string());
    out.write(kSessionMagic, 4);
    bin::write_u32(out, kSessionVersion);

    const auto layers = static_cast<std::uint32_t>(state.hidden.size());
    const std::uint32_t dim =
        state.hidden.empty() ? 0 : static_cast<std::uint32_t>(state.hidden.front().size());
    bin::write_u32(out, layers);
    bin::write_u32(out, dim);
    for (const auto& h : state.hidden) bin::write_matrix(out, h);

    bin::write_u32(out, static_cast<std::uint32_t>(state.window.size()));
    for (const auto& entry : state.window) {
        bin::write_i64(out, entry.frame);
        bin::write_matrix(out, entry.cloud.pts);
    }
    if (!out) throw IoError("session: write failed: " + path.string());
}

temporal::TemporalState load_session(const std::filesystem::path& path,
                                     const TemporalConfig& cfg) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    expect_magic(in, kSessionMagic, "session");
    const std::uint32_t version = bin::read_u32(in, "session version");
    if (version != kSessionVersion)
        throw IoError("session: unsupported version " + std::to_string(version));

    const std::uint32_t layers = bin::read_u32(in, "session layer count");
    const std::uint32_t dim = bin::read_u32(in, "session hidden size");
    if (static_cast<int>(layers) != cfg.gru_layers || static_cast<int>(dim) != cfg.hidden)
        throw PreconditionError("session state does not match the model configuration (" +
                                std::to_string(layers) + "x" + std::to_string(dim) +
                                " hidden vs configured " + std::to_string(cfg.gru_layers) + "x" +
                                std::to_string(cfg.hidden) + ")");

    temporal::TemporalState state = temporal::make_temporal_state(cfg);
    for (std::uint32_t l = 0; l < layers; ++l) {
        const Eigen::MatrixXd h = bin::read_matrix(in, "session hidden state");
        if (h.rows() != cfg.hidden || h.cols() != 1)
            throw IoError("session: bad hidden-state shape");
        state.hidden[l] = h.col(0);
    }
    if (!state.hidden_finite()) throw IoError("session: non-finite hidden state");

    const std::uint32_t entries = bin::read_u32(in, "session window count");
    if (static_cast<int>(entries) > cfg.window)
        throw PreconditionError("session window holds " + std::to_string(entries) +
                                " frames but the model configuration allows " +
                                std::to_string(cfg.window));
    std::int64_t prev_frame = -1;
    bool first = true;
    for (std::uint32_t i = 0; i < entries; ++i) {
        const std::int64_t frame = bin::read_i64(in, "session frame index");
        const Eigen::MatrixXd pts = bin::read_matrix(in, "session window cloud");
        if (pts.cols() != 3 || pts.rows() == 0) throw IoError("session: bad window cloud");
        if (!pts.allFinite()) throw IoError("session: non-finite window cloud");
        if (!first && frame <= prev_frame)
            throw IoError("session: window frame indices must be strictly increasing");
        first = false;
        prev_frame = frame;
        temporal::TemporalState::WindowEntry entry;
        entry.frame = frame;
        entry.cloud = PointCloud(PointMatrix(pts));
        state.window.push_back(std::move(entry));
    }
    return state;
}

}  // namespace tcomplete::model
