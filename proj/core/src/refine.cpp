#include "tcomplete/refine.hpp"

#include <cmath>

#include "tcomplete/errors.hpp"

namespace tcomplete::refine {

using ad::Mat;

RefineInput build_refine_input(ad::Tape& tape, const PointCloud& aligned0,
                               int aligned0_node, const PointCloud& coarse,
                               int coarse_node, const RefineConfig& cfg) {
    cfg.validate();
    const int half = cfg.n_out / 2;
    if (aligned0.size() < half)
        throw SizeError("build_refine_input: aligned input has " +
                        std::to_string(aligned0.size()) + " points, needs " +
                        std::to_string(half));
    if (coarse.size() < half)
        throw SizeError("build_refine_input: coarse cloud has " +
                        std::to_string(coarse.size()) + " points, needs " +
                        std::to_string(half));
    if (aligned0.size() < cfg.controlling)
        throw SizeError("build_refine_input: aligned input has " +
                        std::to_string(aligned0.size()) + " points, needs " +
                        std::to_string(cfg.controlling) + " controlling points");

    std::vector<int> idx_a =
        farthest_point_sample(aligned0, half, centroid_nearest_index(aligned0));
    std::vector<int> idx_c =
        farthest_point_sample(coarse, half, centroid_nearest_index(coarse));

    RefineInput input;
    input.p_in_node = tape.concat_rows(tape.gather_rows(aligned0_node, idx_a),
                                       tape.gather_rows(coarse_node, idx_c));
    input.p_in = PointCloud(tape.value(input.p_in_node));
    input.from_aligned.assign(static_cast<std::size_t>(cfg.n_out), false);
    for (int i = 0; i < half; ++i) input.from_aligned[static_cast<std::size_t>(i)] = true;
    input.graph = knn_adjacency(input.p_in, cfg.knn_k);
    input.controlling = farthest_point_sample(aligned0, cfg.controlling,
                                              centroid_nearest_index(aligned0));
    return input;
}

namespace {

Mat uniform_mat(Rng& rng, int rows, int cols, double bound) {
    Mat m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = (rng.uniform() * 2.0 - 1.0) * bound;
    return m;
}

}  // namespace

GcnDeformer::GcnDeformer(nn::ParameterStore& store, const std::string& name,
                         int in_channels, const RefineConfig& cfg, Rng& rng)
    : in_channels_(in_channels) {
    cfg.validate();
    if (in_channels <= 3)
        throw PreconditionError("GcnDeformer: input must carry features beyond xyz");
    int in = in_channels;
    for (std::size_t l = 0; l < cfg.gcn_widths.size(); ++l) {
        const int out = cfg.gcn_widths[l];
        const bool last = (l + 1 == cfg.gcn_widths.size());
        const std::string base = name + ".l" + std::to_string(l) + ".";
        Layer layer;
        layer.in = in;
        layer.out = out;
        if (last) {
            // Zero residual head: the network starts as the identity map.
            layer.w_self = store.add(base + "ws", Mat::Zero(in, out));
            layer.w_nbr = store.add(base + "wn", Mat::Zero(in, out));
            layer.b = store.add(base + "b", Mat::Zero(1, out));
        } else {
            const double bound = 1.0 / std::sqrt(static_cast<double>(2 * in));
            layer.w_self = store.add(base + "ws", uniform_mat(rng, in, out, bound));
            layer.w_nbr = store.add(base + "wn", uniform_mat(rng, in, out, bound));
            layer.b = store.add(base + "b", uniform_mat(rng, 1, out, bound));
        }
        layers_.push_back(layer);
        in = out;
    }
}

int GcnDeformer::deform(ad::Tape& tape, nn::ParameterStore& store,
                        const RefineInput& input, int f_refine) const {
    const int n = input.p_in.size();
    if (tape.rows(input.p_in_node) != n || tape.cols(input.p_in_node) != 3)
        throw SizeError("GcnDeformer: cloud node shape mismatch");
    if (tape.rows(f_refine) != n)
        throw SizeError("GcnDeformer: feature rows do not match the cloud");
    if (3 + tape.cols(f_refine) != in_channels_)
        throw SizeError("GcnDeformer: expected " + std::to_string(in_channels_ - 3) +
                        " feature channels, got " + std::to_string(tape.cols(f_refine)));
    if (input.graph.node_count != n)
        throw SizeError("GcnDeformer: graph size does not match the cloud");

    // Center coordinates on the (differentiable) mean so the residual depends
    // only on shape, making the output translate with its input.
    const int mean = tape.colwise_mean(input.p_in_node);
    const int centered = tape.sub(input.p_in_node, tape.tile_rows(mean, n));
    int x = tape.concat_cols(centered, f_refine);

    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const Layer& layer = layers_[l];
        const bool last = (l + 1 == layers_.size());
        const int ws = store.use(tape, layer.w_self);
        const int wn = store.use(tape, layer.w_nbr);
        const int b = store.use(tape, layer.b);
        const int agg = tape.graph_mean(x, input.graph);
        int h = tape.add_rowvec(
            tape.add(tape.matmul(x, ws), tape.matmul(agg, wn)), b);
        if (!last) {
            h = tape.relu(h);
            if (layer.in == layer.out) h = tape.add(h, x);
        }
        x = h;
    }
    return tape.add(input.p_in_node, x);
}

Stage2Output stage2_forward(ad::Tape& tape, nn::ParameterStore& store,
                            const stage1::Stage1Output& s1,
                            const temporal::TemporalState& state,
                            const temporal::WindowFuser& fuser, const GcnDeformer& gcn,
                            const RefineConfig& cfg) {
    if (s1.coarse_node < 0)
        throw PreconditionError("stage2_forward: stage-1 output has no coarse cloud");
    if (state.window.empty())
        throw PreconditionError("stage2_forward: temporal window is empty");
    const PointCloud& newest = state.window.back().cloud;
    if (newest.size() != s1.aligned[0].size() ||
        (newest.pts - s1.aligned[0].pts).cwiseAbs().maxCoeff() != 0.0)
        throw PreconditionError(
            "stage2_forward: newest window entry is not the current aligned cloud");

    Stage2Output out;
    out.input = build_refine_input(tape, s1.aligned[0], s1.aligned_nodes[0], s1.coarse,
                                   s1.coarse_node, cfg);
    const temporal::GroupingSpec spec{cfg.ball_radius, cfg.ball_cap};
    out.f_refine_node =
        fuser.fuse(tape, store, out.input.p_in, out.input.p_in_node, state,
                   s1.aligned_nodes[0], spec, &out.input.controlling);
    out.p_f_node = gcn.deform(tape, store, out.input, out.f_refine_node);
    out.p_f = PointCloud(tape.value(out.p_f_node));
    return out;
}

}  // namespace tcomplete::refine
