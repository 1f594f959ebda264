#include "tcomplete/temporal.hpp"

#include <cmath>

#include "tcomplete/errors.hpp"

namespace tcomplete::temporal {

using ad::Mat;

// ---------------------------------------------------------------------------
// TemporalState
// ---------------------------------------------------------------------------

bool TemporalState::hidden_finite() const {
    for (const Eigen::VectorXd& h : hidden)
        if (!h.allFinite()) return false;
    return true;
}

TemporalState make_temporal_state(const TemporalConfig& cfg) {
    cfg.validate();
    TemporalState state;
    state.hidden.assign(static_cast<std::size_t>(cfg.gru_layers),
                        Eigen::VectorXd::Zero(cfg.hidden));
    return state;
}

void window_push(TemporalState& state, PointCloud aligned, std::int64_t frame,
                 const TemporalConfig& cfg) {
    if (frame <= state.last_frame())
        throw OrderingError("window_push: frame " + std::to_string(frame) +
                            " not after " + std::to_string(state.last_frame()));
    if (aligned.empty()) throw EmptyInputError("window_push: empty cloud");
    state.window.push_back({frame, std::move(aligned)});
    while (static_cast<int>(state.window.size()) > cfg.window)
        state.window.erase(state.window.begin());
}

// ---------------------------------------------------------------------------
// GruStack
// ---------------------------------------------------------------------------

namespace {

Mat uniform_mat(Rng& rng, int rows, int cols, double bound) {
    Mat m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = (rng.uniform() * 2.0 - 1.0) * bound;
    return m;
}

}  // namespace

GruStack::GruStack(nn::ParameterStore& store, const std::string& name,
                   const TemporalConfig& cfg, Rng& rng, int input_dim)
    : hidden_dim_(cfg.hidden) {
    cfg.validate();
    if (input_dim <= 0) throw PreconditionError("GruStack: input_dim must be positive");
    const int h = cfg.hidden;
    const double bound = 1.0 / std::sqrt(static_cast<double>(h));
    int in = input_dim;
    for (int l = 0; l < cfg.gru_layers; ++l) {
        const std::string base = name + ".l" + std::to_string(l) + ".";
        Cell cell;
        cell.in = in;
        // Gate biases start at zero: a zero code with zero hidden stays zero.
        cell.wz = store.add(base + "wz", uniform_mat(rng, in, h, bound));
        cell.uz = store.add(base + "uz", uniform_mat(rng, h, h, bound));
        cell.bz = store.add(base + "bz", Mat::Zero(1, h));
        cell.wr = store.add(base + "wr", uniform_mat(rng, in, h, bound));
        cell.ur = store.add(base + "ur", uniform_mat(rng, h, h, bound));
        cell.br = store.add(base + "br", Mat::Zero(1, h));
        cell.wn = store.add(base + "wn", uniform_mat(rng, in, h, bound));
        cell.un = store.add(base + "un", uniform_mat(rng, h, h, bound));
        cell.bn = store.add(base + "bn", Mat::Zero(1, h));
        cells_.push_back(cell);
        in = h;
    }
}

GruStack::Step GruStack::step(ad::Tape& tape, nn::ParameterStore& store, int x,
                              const std::vector<int>& hidden) const {
    if (hidden.size() != cells_.size())
        throw SizeError("GruStack: got " + std::to_string(hidden.size()) +
                        " hidden layers, expected " + std::to_string(cells_.size()));
    Step out;
    int input = x;
    for (std::size_t l = 0; l < cells_.size(); ++l) {
        const Cell& c = cells_[l];
        if (tape.rows(input) != 1 || tape.cols(input) != c.in)
            throw SizeError("GruStack layer " + std::to_string(l) + ": input must be (1," +
                            std::to_string(c.in) + ")");
        const int h = hidden[l];
        if (tape.rows(h) != 1 || tape.cols(h) != hidden_dim_)
            throw SizeError("GruStack layer " + std::to_string(l) + ": hidden must be (1," +
                            std::to_string(hidden_dim_) + ")");

        const int wz = store.use(tape, c.wz), uz = store.use(tape, c.uz);
        const int wr = store.use(tape, c.wr), ur = store.use(tape, c.ur);
        const int wn = store.use(tape, c.wn), un = store.use(tape, c.un);
        const int bz = store.use(tape, c.bz), br = store.use(tape, c.br);
        const int bn = store.use(tape, c.bn);

        const int z = tape.sigmoid(
            tape.add(tape.add(tape.matmul(input, wz), tape.matmul(h, uz)), bz));
        const int r = tape.sigmoid(
            tape.add(tape.add(tape.matmul(input, wr), tape.matmul(h, ur)), br));
        const int n = tape.tanh_op(tape.add(
            tape.add(tape.matmul(input, wn), tape.matmul(tape.hadamard(r, h), un)), bn));
        // h' = (1 - z) (.) h + z (.) n
        const int h_new =
            tape.add(tape.sub(h, tape.hadamard(z, h)), tape.hadamard(z, n));

        out.hidden.push_back(h_new);
        input = h_new;
    }
    out.out = out.hidden.back();
    return out;
}

int GruStack::update_state(ad::Tape& tape, nn::ParameterStore& store, int x,
                           TemporalState& state) const {
    if (state.hidden.size() != cells_.size())
        throw SizeError("GruStack: state has " + std::to_string(state.hidden.size()) +
                        " hidden layers, expected " + std::to_string(cells_.size()));
    std::vector<int> nodes;
    nodes.reserve(state.hidden.size());
    for (const Eigen::VectorXd& h : state.hidden)
        nodes.push_back(tape.leaf(h.transpose()));
    const Step step_out = step(tape, store, x, nodes);
    for (std::size_t l = 0; l < state.hidden.size(); ++l)
        state.hidden[l] = tape.value(step_out.hidden[l]).row(0).transpose();
    return step_out.out;
}

// ---------------------------------------------------------------------------
// WindowFuser
// ---------------------------------------------------------------------------

WindowFuser::WindowFuser(nn::ParameterStore& store, const std::string& name,
                         const TemporalConfig& cfg, Rng& rng)
    : fe_(store, name + ".fe", 4, cfg.fe_widths, rng),
      fuse_(store, name + ".fuse", cfg.window * cfg.fe_widths.back(), cfg.fuse_widths,
            rng, nn::Mlp::Final::Linear),
      se_squeeze_(store, name + ".se1", cfg.fuse_widths.back(),
                  cfg.fuse_widths.back() / cfg.se_reduction, rng),
      se_excite_(store, name + ".se2", cfg.fuse_widths.back() / cfg.se_reduction,
                 cfg.fuse_widths.back(), rng),
      window_(cfg.window) {
    cfg.validate();
    if (cfg.fuse_widths.back() % cfg.se_reduction != 0)
        throw ConfigError("WindowFuser: fused channels must divide by the SE reduction");
}

int WindowFuser::extract(ad::Tape& tape, nn::ParameterStore& store,
                         const PointCloud& p_in, int p_in_node, const PointCloud& cloud,
                         int cloud_node, const GroupingSpec& spec,
                         const std::vector<int>* prefer) const {
    const std::vector<std::vector<int>> balls =
        prefer ? ball_query_preferring(p_in, cloud, spec.radius, spec.cap, *prefer)
               : ball_query(p_in, cloud, spec.radius, spec.cap);

    const int n = p_in.size();
    std::vector<int> neighbor_idx;
    std::vector<int> center_idx;
    neighbor_idx.reserve(static_cast<std::size_t>(n) * spec.cap);
    center_idx.reserve(static_cast<std::size_t>(n) * spec.cap);
    for (int i = 0; i < n; ++i) {
        const std::vector<int>& ball = balls[static_cast<std::size_t>(i)];
        // Pad short balls by repeating the nearest member; max-pooling over
        // the block ignores duplicates.
        for (int k = 0; k < spec.cap; ++k) {
            const int pick = k < static_cast<int>(ball.size()) ? ball[k] : ball.front();
            neighbor_idx.push_back(pick);
            center_idx.push_back(i);
        }
    }

    const int src = cloud_node >= 0 ? cloud_node : tape.leaf(cloud.pts);
    const int nb = tape.gather_rows(src, neighbor_idx);
    const int ctr = tape.gather_rows(p_in_node, center_idx);
    const int rel = tape.sub(ctr, nb);
    const int feats_in = tape.concat_cols(rel, tape.rowwise_norm(rel));
    const int fe_out = fe_.forward(tape, store, feats_in);
    return tape.rowblock_max(fe_out, spec.cap);
}

int WindowFuser::fuse(ad::Tape& tape, nn::ParameterStore& store, const PointCloud& p_in,
                      int p_in_node, const TemporalState& state, int current_node,
                      const GroupingSpec& spec,
                      const std::vector<int>* prefer_current) const {
    if (state.window.empty())
        throw PreconditionError("WindowFuser: the window has no frames");
    if (p_in.empty()) throw EmptyInputError("WindowFuser: empty query cloud");
    if (tape.rows(p_in_node) != p_in.size() || tape.cols(p_in_node) != 3)
        throw SizeError("WindowFuser: query node shape mismatch");
    if (spec.cap < 1 || spec.radius <= 0.0)
        throw PreconditionError("WindowFuser: invalid grouping spec");

    // Slot 0 is frame t (the newest entry); slot i is frame t-i. Missing past
    // frames replicate the current one so channel counts stay fixed.
    const int have = static_cast<int>(state.window.size());
    int cat = -1;
    for (int slot = 0; slot < window_; ++slot) {
        const int entry = std::max(have - 1 - slot, 0);
        const TemporalState::WindowEntry& w =
            state.window[static_cast<std::size_t>(entry)];
        const bool is_current = entry == have - 1;
        const int node = is_current ? current_node : -1;
        const std::vector<int>* prefer = is_current ? prefer_current : nullptr;
        const int feats =
            extract(tape, store, p_in, p_in_node, w.cloud, node, spec, prefer);
        cat = (cat < 0) ? feats : tape.concat_cols(cat, feats);
    }

    const int f_align = fuse_.forward(tape, store, cat);
    if (force_identity_gates_) return f_align;

    const int squeeze = tape.colwise_mean(f_align);
    const int bottleneck = tape.relu(se_squeeze_.forward(tape, store, squeeze));
    const int gates = tape.sigmoid(se_excite_.forward(tape, store, bottleneck));
    return tape.hadamard(f_align, tape.tile_rows(gates, p_in.size()));
}

}  // namespace tcomplete::temporal
