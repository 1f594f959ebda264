#pragma once

#include <string>
#include <vector>

#include "tcomplete/ad.hpp"
#include "tcomplete/config.hpp"
#include "tcomplete/geom.hpp"
#include "tcomplete/nn.hpp"
#include "tcomplete/rng.hpp"
#include "tcomplete/stage1.hpp"
#include "tcomplete/temporal.hpp"

namespace tcomplete::refine {

// Stage-2 working set: the combined cloud to deform, its neighbourhood
// graph, provenance of every point, and the controlling-point subset.
struct RefineInput {
    PointCloud p_in;               // N_out points
    int p_in_node = -1;            // tape handle (gradients reach both sources)
    AdjacencyGraph graph;          // symmetrized k-NN over p_in
    std::vector<bool> from_aligned;  // true: sampled from the aligned input,
                                     // false: from the coarse completion
    std::vector<int> controlling;  // indices into the aligned input cloud
};

// Samples N_out/2 points from the aligned input and the coarse output each
// (farthest-point order, centroid-nearest seed), concatenates them, builds
// the k-NN graph, and selects the controlling points.
RefineInput build_refine_input(ad::Tape& tape, const PointCloud& aligned0,
                               int aligned0_node, const PointCloud& coarse,
                               int coarse_node, const RefineConfig& cfg);

// Graph-convolutional deformation head. Each layer mixes a per-node linear
// map with a neighbour-mean aggregation; equal-width layers carry residual
// skips. The final layer is zero-initialized, so at init the predicted
// residual is zero and the output equals the input cloud exactly.
class GcnDeformer {
public:
    GcnDeformer() = default;
    GcnDeformer(nn::ParameterStore& store, const std::string& name, int in_channels,
                const RefineConfig& cfg, Rng& rng);

    // f_refine: (N_out, in_channels-3) node. Returns the (N_out,3) node of
    // P_f = P_in + delta. Coordinates enter centered on their mean, so the
    // residual is translation-invariant and P_f is translation-equivariant.
    int deform(ad::Tape& tape, nn::ParameterStore& store, const RefineInput& input,
               int f_refine) const;

    int in_channels() const { return in_channels_; }
    int layer_count() const { return static_cast<int>(layers_.size()); }

private:
    struct Layer {
        int w_self = -1;
        int w_nbr = -1;
        int b = -1;
        int in = 0;
        int out = 0;
    };

    std::vector<Layer> layers_;
    int in_channels_ = 0;
};

// Full stage-2 pass: build the combined cloud, fuse window features around
// it, and deform. The temporal window must already contain the current
// frame's aligned cloud as its newest entry.
struct Stage2Output {
    RefineInput input;
    int f_refine_node = -1;
    int p_f_node = -1;
    PointCloud p_f;
};

Stage2Output stage2_forward(ad::Tape& tape, nn::ParameterStore& store,
                            const stage1::Stage1Output& s1,
                            const temporal::TemporalState& state,
                            const temporal::WindowFuser& fuser, const GcnDeformer& gcn,
                            const RefineConfig& cfg);

}  // namespace tcomplete::refine
