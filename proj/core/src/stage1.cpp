#include "tcomplete/stage1.hpp"

#include <cmath>
#include <string>

#include "tcomplete/errors.hpp"

namespace tcomplete::stage1 {

using ad::Mat;

namespace {

// Bias that makes a zero-weight pose head emit the identity transform:
// 6D basis (1,0,0),(0,1,0) plus zero translation.
Mat identity_pose_bias() {
    Mat b = Mat::Zero(1, 9);
    b(0, 0) = 1.0;
    b(0, 4) = 1.0;
    return b;
}

Mat identity_flat(int c) {
    Mat b = Mat::Zero(1, c * c);
    for (int i = 0; i < c; ++i) b(0, i * c + i) = 1.0;
    return b;
}

nn::Init head_init(InitMode mode) {
    return mode == InitMode::Identity ? nn::Init::Zero : nn::Init::FanInUniform;
}

}  // namespace

// ---------------------------------------------------------------------------
// InputTNet
// ---------------------------------------------------------------------------

InputTNet::InputTNet(nn::ParameterStore& store, const std::string& name,
                     const EncoderConfig& cfg, Rng& rng, InitMode mode)
    : point_mlp_(store, name + ".pt", 3, cfg.tnet_point_widths, rng),
      trunk_(store, name + ".fc", cfg.tnet_point_widths.back(), cfg.tnet_fc_widths, rng),
      head_(store, name + ".head", cfg.tnet_fc_widths.back(), 9, rng, head_init(mode)) {
    if (mode == InitMode::Identity)
        store.param(head_.bias_id()).value = identity_pose_bias();
}

int InputTNet::forward(ad::Tape& tape, nn::ParameterStore& store, int pts) const {
    const int per_point = point_mlp_.forward(tape, store, pts);
    const int pooled = tape.colwise_max(per_point);
    const int trunk = trunk_.forward(tape, store, pooled);
    return head_.forward(tape, store, trunk);
}

// ---------------------------------------------------------------------------
// FeatureTNet
// ---------------------------------------------------------------------------

FeatureTNet::FeatureTNet(nn::ParameterStore& store, const std::string& name,
                         const EncoderConfig& cfg, Rng& rng, InitMode mode)
    : point_mlp_(store, name + ".pt", cfg.feature_channels(),
                 cfg.feat_tnet_point_widths, rng),
      trunk_(store, name + ".fc", cfg.feat_tnet_point_widths.back(),
             cfg.feat_tnet_fc_widths, rng),
      head_(store, name + ".head", cfg.feat_tnet_fc_widths.back(),
            cfg.feature_channels() * cfg.feature_channels(), rng, head_init(mode)),
      channels_(cfg.feature_channels()) {
    if (mode == InitMode::Identity)
        store.param(head_.bias_id()).value = identity_flat(channels_);
}

int FeatureTNet::forward(ad::Tape& tape, nn::ParameterStore& store, int feats) const {
    if (tape.cols(feats) != channels_)
        throw SizeError("FeatureTNet: got " + std::to_string(tape.cols(feats)) +
                        " channels, expected " + std::to_string(channels_));
    const int per_point = point_mlp_.forward(tape, store, feats);
    const int pooled = tape.colwise_max(per_point);
    const int trunk = trunk_.forward(tape, store, pooled);
    const int flat = head_.forward(tape, store, trunk);
    return tape.rows_from_flat(flat, channels_);
}

// ---------------------------------------------------------------------------
// Stage1Net
// ---------------------------------------------------------------------------

Stage1Net::Stage1Net(nn::ParameterStore& store, const EncoderConfig& cfg, Rng& rng,
                     InitMode mode)
    : cfg_([&cfg] {
          cfg.validate();
          return cfg;
      }()),
      tnets_{InputTNet(store, "s1.tnet0", cfg, rng, mode),
             InputTNet(store, "s1.tnet1", cfg, rng, mode),
             InputTNet(store, "s1.tnet2", cfg, rng, mode)},
      ftnet_(store, "s1.ftnet", cfg, rng, mode),
      enc_pre_(store, "s1.enc.pre", 3, cfg.enc_pre_widths, rng),
      enc_post_(store, "s1.enc.post", cfg.feature_channels(), cfg.enc_post_widths, rng,
                nn::Mlp::Final::Linear),
      reduce_(store, "s1.reduce", 3 * cfg.d_s, cfg.reduction_widths, rng,
              nn::Mlp::Final::Linear),
      decoder_(store, "s1.dec", cfg.d_s, [&] {
          std::vector<int> widths = cfg.decoder_widths;
          widths.push_back(3 * cfg.n_coarse);
          return widths;
      }(), rng, nn::Mlp::Final::Linear) {
    if (cfg.enc_post_widths.back() != cfg.d_s)
        throw ConfigError("stage1: encoder output width must equal the shape-code width");
    if (cfg.reduction_widths.back() != cfg.d_s)
        throw ConfigError("stage1: reduction output width must equal the shape-code width");
}

std::pair<int, int> Stage1Net::pose_from_head(ad::Tape& tape, int head9) const {
    int v1 = tape.slice_cols(head9, 0, 3);
    int v2 = tape.slice_cols(head9, 3, 3);
    const int tr = tape.slice_cols(head9, 6, 3);

    // Degeneracy checks mirror rotation_6d_to_matrix; a failing prediction is
    // nudged by a constant so training continues with gradients intact.
    const Vec3 a = tape.value(v1).row(0).transpose();
    const Vec3 b = tape.value(v2).row(0).transpose();
    bool clamped = false;
    Vec3 a_fixed = a;
    if (a.norm() < 1e-12) {
        a_fixed = a + Vec3(1e-6, 0, 0);
        Mat da = Mat::Zero(1, 3);
        da(0, 0) = 1e-6;
        v1 = tape.add(v1, tape.leaf(da));
        clamped = true;
    }
    const Vec3 a_hat = a_fixed / a_fixed.norm();
    const double sin_angle =
        b.norm() < 1e-12 ? 0.0 : a_hat.cross(b).norm() / b.norm();
    if (sin_angle <= 1e-6) {
        // Perturb the second vector along the axis least aligned with a_hat,
        // projected orthogonal to it.
        int axis = 0;
        a_hat.cwiseAbs().minCoeff(&axis);
        Vec3 ortho = Vec3::Unit(axis) - a_hat(axis) * a_hat;
        ortho /= ortho.norm();
        Mat db = Mat::Zero(1, 3);
        db.row(0) = 1e-6 * ortho.transpose();
        v2 = tape.add(v2, tape.leaf(db));
        clamped = true;
    }
    if (clamped) ++degenerate_clamps_;

    // Gram-Schmidt on the tape; rows r1,r2,r3 are the basis vectors, so the
    // stacked matrix is R^T and clouds align as pts * R^T + T.
    const int r1 = tape.scale_by(v1, tape.pow_scalar(tape.rowwise_norm(v1), -1.0));
    const int proj = tape.scale_by(r1, tape.dot(v2, r1));
    const int u2 = tape.sub(v2, proj);
    const int r2 = tape.scale_by(u2, tape.pow_scalar(tape.rowwise_norm(u2), -1.0));
    const int r3 = tape.cross3(r1, r2);
    const int rt = tape.concat_rows(tape.concat_rows(r1, r2), r3);
    return {rt, tr};
}

Stage1Output Stage1Net::encode(ad::Tape& tape, nn::ParameterStore& store,
                               const PointCloud& cloud) const {
    if (cloud.size() != cfg_.n)
        throw SizeError("stage1: input has " + std::to_string(cloud.size()) +
                        " points, expected " + std::to_string(cfg_.n));

    Stage1Output out;
    out.fps_order = farthest_point_sample(cloud, cfg_.n, centroid_nearest_index(cloud));

    std::array<int, 3> code_nodes = {-1, -1, -1};
    int orth = -1;
    for (int res = 0; res < 3; ++res) {
        const int n_res = cfg_.n >> res;
        const std::vector<int> idx(out.fps_order.begin(), out.fps_order.begin() + n_res);
        const PointCloud sample = cloud.gather(idx);
        const int pts = tape.leaf(sample.pts);

        const int head9 = tnets_[res].forward(tape, store, pts);
        const auto [rt, tr] = pose_from_head(tape, head9);
        const int aligned = tape.add_rowvec(tape.matmul(pts, rt), tr);

        out.aligned[res] = PointCloud(tape.value(aligned));
        out.aligned_nodes[res] = aligned;
        out.translation_nodes[res] = tr;
        out.translations[res] = tape.value(tr).row(0).transpose();
        out.rotations[res] = tape.value(rt).transpose();

        const int pre = enc_pre_.forward(tape, store, aligned);
        const int m = ftnet_.forward(tape, store, pre);
        const int transformed = tape.matmul(pre, m);
        const int post = enc_post_.forward(tape, store, transformed);
        code_nodes[res] = tape.colwise_max(post);

        // || M M^T - I ||_F^2
        const int mmt = tape.matmul(m, tape.transpose(m));
        const int dev = tape.sub(mmt, tape.leaf(Mat::Identity(tape.rows(m), tape.rows(m))));
        const int pen = tape.sum(tape.hadamard(dev, dev));
        orth = (orth < 0) ? pen : tape.add(orth, pen);
    }

    const int cat = tape.concat_cols(tape.concat_cols(code_nodes[0], code_nodes[1]),
                                     code_nodes[2]);
    out.shape_code_node = reduce_.forward(tape, store, cat);
    out.shape_code = tape.value(out.shape_code_node).row(0).transpose();
    out.orth_penalty_node = orth;
    return out;
}

int Stage1Net::decode(ad::Tape& tape, nn::ParameterStore& store, int code) const {
    if (tape.rows(code) != 1 || tape.cols(code) != cfg_.d_s)
        throw SizeError("stage1 decode: code must be (1," + std::to_string(cfg_.d_s) + ")");
    const int flat = decoder_.forward(tape, store, code);
    return tape.rows_from_flat(flat, 3);
}

void Stage1Net::decode_into(ad::Tape& tape, nn::ParameterStore& store,
                            Stage1Output& out) const {
    out.coarse_node = decode(tape, store, out.shape_code_node);
    out.coarse = PointCloud(tape.value(out.coarse_node));
    out.shape_code = tape.value(out.shape_code_node).row(0).transpose();
}

Stage1Output Stage1Net::forward(ad::Tape& tape, nn::ParameterStore& store,
                                const PointCloud& cloud) const {
    Stage1Output out = encode(tape, store, cloud);
    decode_into(tape, store, out);
    return out;
}

}  // namespace tcomplete::stage1
