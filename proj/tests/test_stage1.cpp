#include "doctest.h"

#include <cmath>
#include <functional>

#include "helpers.hpp"
#include "tcomplete/errors.hpp"
#include "tcomplete/stage1.hpp"

using namespace tcomplete;
using ad::Mat;

namespace {

EncoderConfig tiny_cfg() {
  EncoderConfig c;
  c.n = 16;
  c.n_coarse = 12;
  c.d_s = 8;
  c.tnet_point_widths = {8, 8};
  c.tnet_fc_widths = {8};
  c.enc_pre_widths = {6};
  c.enc_post_widths = {8};
  c.feat_tnet_point_widths = {8};
  c.feat_tnet_fc_widths = {8};
  c.reduction_widths = {8};
  c.decoder_widths = {8};
  return c;
}

// Central-difference check of d(loss)/d(param) for a loss rebuilt from the
// store's current values on a fresh tape.
void check_param_gradient(nn::ParameterStore& store, int id,
                          const std::function<int(ad::Tape&)>& build,
                          double tol = 1e-5) {
  ad::Tape tape;
  store.begin_step(tape);
  tape.backward(build(tape));
  store.zero_grads();
  store.accumulate(tape);
  const Mat analytic = store.param(id).grad;

  Mat& value = store.param(id).value;
  const double h = 1e-5;
  double max_rel = 0.0;
  for (int r = 0; r < value.rows(); ++r) {
    for (int c = 0; c < value.cols(); ++c) {
      const double keep = value(r, c);
      value(r, c) = keep + h;
      ad::Tape tp;
      store.begin_step(tp);
      const double fp = tp.value(build(tp))(0, 0);
      value(r, c) = keep - h;
      ad::Tape tm;
      store.begin_step(tm);
      const double fm = tm.value(build(tm))(0, 0);
      value(r, c) = keep;
      const double fd = (fp - fm) / (2.0 * h);
      const double scale = std::max({std::abs(fd), std::abs(analytic(r, c)), 1e-6});
      max_rel = std::max(max_rel, std::abs(fd - analytic(r, c)) / scale);
    }
  }
  CHECK(max_rel < tol);
}

double max_pairwise_distance_drift(const PointCloud& a, const PointCloud& b) {
  double worst = 0.0;
  for (int i = 0; i < a.size(); ++i)
    for (int j = i + 1; j < a.size(); ++j) {
      const double da = (a.pts.row(i) - a.pts.row(j)).norm();
      const double db = (b.pts.row(i) - b.pts.row(j)).norm();
      worst = std::max(worst, std::abs(da - db));
    }
  return worst;
}

}  // namespace

TEST_SUITE("stage1") {

TEST_CASE("shape contract at desk scale: resolutions, code, coarse") {
  Rng rng(1);
  nn::ParameterStore store;
  const EncoderConfig cfg = desk_profile().encoder;
  stage1::Stage1Net net(store, cfg, rng);
  const PointCloud cloud = testing::random_cloud(rng, cfg.n);

  ad::Tape tape;
  store.begin_step(tape);
  const stage1::Stage1Output out = net.forward(tape, store, cloud);
  CHECK(out.aligned[0].size() == cfg.n);
  CHECK(out.aligned[1].size() == cfg.n / 2);
  CHECK(out.aligned[2].size() == cfg.n / 4);
  CHECK(out.shape_code.size() == cfg.d_s);
  CHECK(out.coarse.size() == cfg.n_coarse);
  CHECK(static_cast<int>(out.fps_order.size()) == cfg.n);
  CHECK(out.fps_order[0] == centroid_nearest_index(cloud));
  for (int res = 0; res < 3; ++res) {
    CHECK(out.aligned_nodes[res] >= 0);
    CHECK(out.translation_nodes[res] >= 0);
  }
  CHECK(out.coarse_node >= 0);
  CHECK(out.orth_penalty_node >= 0);
  // Identity initialization => zero orthogonality penalty.
  CHECK(tape.value(out.orth_penalty_node)(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("wrong input size is rejected") {
  Rng rng(2);
  nn::ParameterStore store;
  stage1::Stage1Net net(store, tiny_cfg(), rng);
  ad::Tape tape;
  store.begin_step(tape);
  const PointCloud small = testing::random_cloud(rng, 8);
  CHECK_THROWS_AS(net.encode(tape, store, small), SizeError);
}

TEST_CASE("freshly initialized transforms are exactly the identity") {
  Rng rng(3);
  nn::ParameterStore store;
  const EncoderConfig cfg = tiny_cfg();
  stage1::Stage1Net net(store, cfg, rng);
  const PointCloud cloud = testing::random_cloud(rng, cfg.n);

  ad::Tape tape;
  store.begin_step(tape);
  const stage1::Stage1Output out = net.encode(tape, store, cloud);
  for (int res = 0; res < 3; ++res) {
    const int n_res = cfg.n >> res;
    const std::vector<int> idx(out.fps_order.begin(), out.fps_order.begin() + n_res);
    const PointCloud sample = cloud.gather(idx);
    CHECK((out.aligned[res].pts - sample.pts).cwiseAbs().maxCoeff() == 0.0);
    CHECK((out.rotations[res] - Mat3::Identity()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(out.translations[res].cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK(net.degenerate_clamps() == 0);
}

TEST_CASE("aligned clouds reconstruct from pose and keep pairwise distances") {
  Rng rng(4);
  nn::ParameterStore store;
  const EncoderConfig cfg = tiny_cfg();
  stage1::Stage1Net net(store, cfg, rng, stage1::InitMode::FullRandom);
  const PointCloud cloud = testing::random_cloud(rng, cfg.n);

  ad::Tape tape;
  store.begin_step(tape);
  const stage1::Stage1Output out = net.encode(tape, store, cloud);
  for (int res = 0; res < 3; ++res) {
    const int n_res = cfg.n >> res;
    const std::vector<int> idx(out.fps_order.begin(), out.fps_order.begin() + n_res);
    const PointCloud sample = cloud.gather(idx);

    RigidPose pose;
    pose.rotation = out.rotations[res];
    pose.translation = out.translations[res];
    CHECK(pose.valid());
    // Alignment acts on raw points: same pose, same points.
    const PointCloud redo = apply_pose(sample, pose);
    CHECK((redo.pts - out.aligned[res].pts).cwiseAbs().maxCoeff() < 1e-12);
    // Rigid maps preserve the metric.
    CHECK(max_pairwise_distance_drift(sample, out.aligned[res]) < 1e-6);
    // A real random pose, not the identity.
    CHECK((out.rotations[res] - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-6);
  }
}

TEST_CASE("pose heads emit (1,9) and the feature transform is CxC identity at init") {
  Rng rng(5);
  nn::ParameterStore store;
  const EncoderConfig cfg = tiny_cfg();
  stage1::InputTNet tnet(store, "t", cfg, rng, stage1::InitMode::Identity);
  stage1::FeatureTNet ftnet(store, "f", cfg, rng, stage1::InitMode::Identity);

  ad::Tape tape;
  store.begin_step(tape);
  const int pts = tape.leaf(testing::random_cloud(rng, 10).pts);
  const int head = tnet.forward(tape, store, pts);
  CHECK(tape.rows(head) == 1);
  CHECK(tape.cols(head) == 9);

  const int c = cfg.feature_channels();
  Mat feats(10, c);
  for (int r = 0; r < 10; ++r)
    for (int k = 0; k < c; ++k) feats(r, k) = rng.normal();
  const int m = ftnet.forward(tape, store, tape.leaf(feats));
  CHECK(tape.rows(m) == c);
  CHECK(tape.cols(m) == c);
  CHECK((tape.value(m) - Mat::Identity(c, c)).cwiseAbs().maxCoeff() == 0.0);

  const int bad = tape.leaf(Mat::Zero(10, c + 1));
  CHECK_THROWS_AS(ftnet.forward(tape, store, bad), SizeError);
}

TEST_CASE("degenerate pose predictions are clamped to valid rotations") {
  Rng rng(6);
  const EncoderConfig cfg = tiny_cfg();
  const PointCloud cloud = testing::random_cloud(rng, cfg.n);

  // Parallel second vector.
  {
    nn::ParameterStore store;
    stage1::Stage1Net net(store, cfg, rng);
    Mat bias = Mat::Zero(1, 9);
    bias(0, 0) = 1.0;  // v1 = (1,0,0)
    bias(0, 3) = 2.0;  // v2 = (2,0,0): parallel
    for (int res = 0; res < 3; ++res)
      store.param(store.find("s1.tnet" + std::to_string(res) + ".head.b")).value = bias;
    ad::Tape tape;
    store.begin_step(tape);
    const stage1::Stage1Output out = net.encode(tape, store, cloud);
    CHECK(net.degenerate_clamps() == 3);
    for (int res = 0; res < 3; ++res) {
      RigidPose pose;
      pose.rotation = out.rotations[res];
      CHECK(pose.valid());
    }
  }

  // Zero head output entirely (both vectors zero).
  {
    nn::ParameterStore store;
    stage1::Stage1Net net(store, cfg, rng);
    for (int res = 0; res < 3; ++res)
      store.param(store.find("s1.tnet" + std::to_string(res) + ".head.b")).value =
          Mat::Zero(1, 9);
    ad::Tape tape;
    store.begin_step(tape);
    const stage1::Stage1Output out = net.encode(tape, store, cloud);
    CHECK(net.degenerate_clamps() == 3);
    for (int res = 0; res < 3; ++res) {
      RigidPose pose;
      pose.rotation = out.rotations[res];
      CHECK(pose.valid());
    }
    net.reset_degenerate_clamps();
    CHECK(net.degenerate_clamps() == 0);
  }
}

TEST_CASE("permuting the input leaves the shape code unchanged") {
  Rng rng(7);
  nn::ParameterStore store;
  const EncoderConfig cfg = tiny_cfg();
  stage1::Stage1Net net(store, cfg, rng, stage1::InitMode::FullRandom);
  const PointCloud cloud = testing::random_cloud(rng, cfg.n);
  const PointCloud shuffled =
      testing::permuted(cloud, testing::random_permutation(rng, cfg.n));

  ad::Tape t1, t2;
  store.begin_step(t1);
  const Eigen::VectorXd code_a = net.encode(t1, store, cloud).shape_code;
  store.begin_step(t2);
  const Eigen::VectorXd code_b = net.encode(t2, store, shuffled).shape_code;
  CHECK((code_a - code_b).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("identical inputs produce identical outputs") {
  Rng rng(8);
  nn::ParameterStore store;
  const EncoderConfig cfg = tiny_cfg();
  stage1::Stage1Net net(store, cfg, rng, stage1::InitMode::FullRandom);
  const PointCloud cloud = testing::random_cloud(rng, cfg.n);

  ad::Tape t1, t2;
  store.begin_step(t1);
  const stage1::Stage1Output a = net.forward(t1, store, cloud);
  store.begin_step(t2);
  const stage1::Stage1Output b = net.forward(t2, store, cloud);
  CHECK((a.shape_code - b.shape_code).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.coarse.pts - b.coarse.pts).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.fps_order == b.fps_order);
}

TEST_CASE("decoder emits the configured size for any code and is deterministic") {
  Rng rng(9);
  nn::ParameterStore store;
  const EncoderConfig cfg = tiny_cfg();
  stage1::Stage1Net net(store, cfg, rng);

  ad::Tape tape;
  store.begin_step(tape);
  Mat code(1, cfg.d_s);
  for (int i = 0; i < cfg.d_s; ++i) code(0, i) = rng.normal();
  const int cloud_a = net.decode(tape, store, tape.leaf(code));
  CHECK(tape.rows(cloud_a) == cfg.n_coarse);
  CHECK(tape.cols(cloud_a) == 3);

  const int zero_a = net.decode(tape, store, tape.leaf(Mat::Zero(1, cfg.d_s)));
  const int zero_b = net.decode(tape, store, tape.leaf(Mat::Zero(1, cfg.d_s)));
  CHECK((tape.value(zero_a) - tape.value(zero_b)).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(net.decode(tape, store, tape.leaf(Mat::Zero(1, cfg.d_s + 1))),
                  SizeError);
}

TEST_CASE("every parameter receives gradient on a random batch") {
  Rng rng(10);
  nn::ParameterStore store;
  const EncoderConfig cfg = tiny_cfg();
  stage1::Stage1Net net(store, cfg, rng, stage1::InitMode::FullRandom);
  const PointCloud cloud = testing::random_cloud(rng, cfg.n);

  ad::Tape tape;
  store.begin_step(tape);
  const stage1::Stage1Output out = net.forward(tape, store, cloud);
  // Touch the coarse output and the regularizer, as training does.
  int loss = tape.sum(tape.hadamard(out.coarse_node, out.coarse_node));
  loss = tape.add(loss, out.orth_penalty_node);
  for (int res = 0; res < 3; ++res)
    loss = tape.add(loss, tape.sum(tape.hadamard(out.aligned_nodes[res],
                                                 out.aligned_nodes[res])));
  tape.backward(loss);
  store.zero_grads();
  store.accumulate(tape);
  CHECK(net.degenerate_clamps() == 0);
  for (const nn::Parameter& p : store.all()) {
    INFO("parameter ", p.name);
    CHECK(p.grad.cwiseAbs().maxCoeff() > 0.0);
  }
}

TEST_CASE("end-to-end parameter gradients match finite differences") {
  Rng rng(12);
  nn::ParameterStore store;
  const EncoderConfig cfg = tiny_cfg();
  stage1::Stage1Net net(store, cfg, rng, stage1::InitMode::FullRandom);
  const PointCloud cloud = testing::random_cloud(rng, cfg.n);

  auto build = [&](ad::Tape& t) {
    const stage1::Stage1Output out = net.forward(t, store, cloud);
    int loss = t.sum(t.hadamard(out.coarse_node, out.coarse_node));
    loss = t.add(loss, t.scale(out.orth_penalty_node, 0.5));
    loss = t.add(loss, t.sum(t.hadamard(out.aligned_nodes[1], out.aligned_nodes[1])));
    return loss;
  };
  REQUIRE(net.degenerate_clamps() == 0);
  for (const char* name :
       {"s1.tnet0.head.b", "s1.tnet1.pt.l0.w", "s1.ftnet.head.b", "s1.enc.pre.l0.w",
        "s1.reduce.l0.b", "s1.dec.l1.b"}) {
    const int id = store.find(name);
    REQUIRE(id >= 0);
    check_param_gradient(store, id, build, 2e-5);
  }
}

}  // TEST_SUITE
