#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "tcomplete/ad.hpp"
#include "tcomplete/config.hpp"
#include "tcomplete/geom.hpp"
#include "tcomplete/nn.hpp"
#include "tcomplete/rng.hpp"

namespace tcomplete::stage1 {

// Result of one stage-1 pass. Concrete values are always filled; the *_node
// fields are handles into the tape the pass ran on, so losses can be attached
// for training. After encode() the coarse cloud is empty until decode runs.
struct Stage1Output {
    std::array<PointCloud, 3> aligned;   // sizes N, N/2, N/4
    std::array<Vec3, 3> translations;
    std::array<Mat3, 3> rotations;
    Eigen::VectorXd shape_code;          // D_s
    PointCloud coarse;                   // N_coarse once decoded

    // Farthest-point order over the input; the three resolutions are its
    // prefixes of length N, N/2, N/4 (seeded at the centroid-nearest point).
    std::vector<int> fps_order;

    std::array<int, 3> aligned_nodes = {-1, -1, -1};
    std::array<int, 3> translation_nodes = {-1, -1, -1};
    int shape_code_node = -1;
    int coarse_node = -1;
    // Sum of ||M M^T - I||_F^2 over the three feature-transform applications.
    int orth_penalty_node = -1;
};

enum class InitMode {
    Identity,    // transform heads start at the identity pose / matrix
    FullRandom,  // every layer fan-in uniform (gradient-flow diagnostics)
};

// Predicts a 9-vector (6D rotation basis, translation) from a cloud.
class InputTNet {
public:
    InputTNet() = default;
    InputTNet(nn::ParameterStore& store, const std::string& name,
              const EncoderConfig& cfg, Rng& rng, InitMode mode);

    // pts: (n,3) node; returns a (1,9) node.
    int forward(ad::Tape& tape, nn::ParameterStore& store, int pts) const;

private:
    nn::Mlp point_mlp_;
    nn::Mlp trunk_;
    nn::Linear head_;
};

// Predicts a CxC feature-space transform from per-point features.
class FeatureTNet {
public:
    FeatureTNet() = default;
    FeatureTNet(nn::ParameterStore& store, const std::string& name,
                const EncoderConfig& cfg, Rng& rng, InitMode mode);

    // feats: (n,C) node; returns a (C,C) node.
    int forward(ad::Tape& tape, nn::ParameterStore& store, int feats) const;

private:
    nn::Mlp point_mlp_;
    nn::Mlp trunk_;
    nn::Linear head_;
    int channels_ = 0;
};

// Stage-1 network: per-resolution input transforms, a shared multi-resolution
// encoder producing the shape code, and a fully connected coarse decoder.
class Stage1Net {
public:
    Stage1Net(nn::ParameterStore& store, const EncoderConfig& cfg, Rng& rng,
              InitMode mode = InitMode::Identity);

    // Samples three resolutions, aligns each with its own predicted pose, and
    // encodes to the reduced shape code. Leaves `coarse` empty.
    Stage1Output encode(ad::Tape& tape, nn::ParameterStore& store,
                        const PointCloud& cloud) const;

    // Decodes a (1,D_s) code node into a (N_coarse,3) cloud node.
    int decode(ad::Tape& tape, nn::ParameterStore& store, int code) const;

    // Fills out.coarse / out.coarse_node from out.shape_code_node.
    void decode_into(ad::Tape& tape, nn::ParameterStore& store,
                     Stage1Output& out) const;

    // encode + decode.
    Stage1Output forward(ad::Tape& tape, nn::ParameterStore& store,
                         const PointCloud& cloud) const;

    const EncoderConfig& config() const { return cfg_; }

    // Times a degenerate 6D prediction was nudged to a valid rotation.
    std::int64_t degenerate_clamps() const { return degenerate_clamps_; }
    void reset_degenerate_clamps() { degenerate_clamps_ = 0; }

private:
    // Builds (1,3) rotation-basis rows and translation from a (1,9) node,
    // clamping degenerate 6D outputs. Returns the node of R^T (3,3) and the
    // translation node (1,3).
    std::pair<int, int> pose_from_head(ad::Tape& tape, int head9) const;

    EncoderConfig cfg_;
    std::array<InputTNet, 3> tnets_;
    FeatureTNet ftnet_;
    nn::Mlp enc_pre_;
    nn::Mlp enc_post_;
    nn::Mlp reduce_;
    nn::Mlp decoder_;
    mutable std::int64_t degenerate_clamps_ = 0;
};

}  // namespace tcomplete::stage1
