#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tcomplete/ad.hpp"
#include "tcomplete/config.hpp"
#include "tcomplete/geom.hpp"
#include "tcomplete/nn.hpp"
#include "tcomplete/rng.hpp"

namespace tcomplete::temporal {

// Per-stream memory: stacked recurrent hidden vectors plus a sliding window
// of recently aligned clouds. Owned by the caller; streams never share state.
struct TemporalState {
    struct WindowEntry {
        std::int64_t frame = -1;
        PointCloud cloud;
    };

    std::vector<Eigen::VectorXd> hidden;  // gru_layers x H, zero at stream start
    std::vector<WindowEntry> window;      // oldest..newest, at most W entries

    std::int64_t last_frame() const { return window.empty() ? -1 : window.back().frame; }
    bool hidden_finite() const;
};

// Zero-initialized state sized for the given config.
TemporalState make_temporal_state(const TemporalConfig& cfg);

// Appends an aligned cloud at a strictly increasing frame index, evicting the
// oldest entry beyond the window size.
void window_push(TemporalState& state, PointCloud aligned, std::int64_t frame,
                 const TemporalConfig& cfg);

// Stacked gated recurrent layers over shape codes. Hidden states are passed
// as tape nodes so multi-frame unrolls backpropagate through time.
class GruStack {
public:
    GruStack() = default;
    GruStack(nn::ParameterStore& store, const std::string& name,
             const TemporalConfig& cfg, Rng& rng, int input_dim);

    struct Step {
        int out = -1;             // new top-layer hidden (1,H): the fused code
        std::vector<int> hidden;  // new hidden per layer
    };

    // x: (1,input_dim) node; hidden: one (1,H) node per layer.
    Step step(ad::Tape& tape, nn::ParameterStore& store, int x,
              const std::vector<int>& hidden) const;

    // Convenience: seeds hidden nodes from a concrete state, steps once, and
    // writes the new hidden values back. Returns the fused-code node.
    int update_state(ad::Tape& tape, nn::ParameterStore& store, int x,
                     TemporalState& state) const;

    int layers() const { return static_cast<int>(cells_.size()); }
    int hidden_dim() const { return hidden_dim_; }

private:
    struct Cell {
        int wz, uz, bz;
        int wr, ur, br;
        int wn, un, bn;
        int in = 0;
    };

    std::vector<Cell> cells_;
    int hidden_dim_ = 0;
};

// Ball-grouping parameters for window feature extraction.
struct GroupingSpec {
    double radius = 0.1;
    int cap = 16;
};

// Sliding-window local fusion: a shared per-point feature extractor over each
// window cloud, channel concatenation, stacked linear reduction, and
// squeeze-excitation channel gating.
class WindowFuser {
public:
    WindowFuser() = default;
    WindowFuser(nn::ParameterStore& store, const std::string& name,
                const TemporalConfig& cfg, Rng& rng);

    // p_in: (N_out,3) cloud with its tape node. The newest window entry is
    // frame t and may carry a live node (current_node >= 0) so gradients reach
    // the current aligned cloud; older entries enter as constants. Windows
    // shorter than W replicate the current frame into the missing past slots.
    // prefer_current: indices into the newest cloud (controlling points) that
    // win ball-membership ties on the current frame.
    int fuse(ad::Tape& tape, nn::ParameterStore& store, const PointCloud& p_in,
             int p_in_node, const TemporalState& state, int current_node,
             const GroupingSpec& spec,
             const std::vector<int>* prefer_current = nullptr) const;

    int fused_channels() const { return fuse_.out(); }

    // Test hook: bypass the gate multiply so f_refine equals f_align exactly.
    void set_force_identity_gates(bool v) { force_identity_gates_ = v; }

private:
    // FE + per-ball max pool over one window cloud -> (N_out, C_fe).
    int extract(ad::Tape& tape, nn::ParameterStore& store, const PointCloud& p_in,
                int p_in_node, const PointCloud& cloud, int cloud_node,
                const GroupingSpec& spec, const std::vector<int>* prefer) const;

    nn::Mlp fe_;
    nn::Mlp fuse_;
    nn::Linear se_squeeze_;
    nn::Linear se_excite_;
    int window_ = 3;
    bool force_identity_gates_ = false;
};

}  // namespace tcomplete::temporal
