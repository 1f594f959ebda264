#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "helpers.hpp"
#include "tcomplete/errors.hpp"
#include "tcomplete/losses.hpp"

using namespace tcomplete;
using tcomplete::testing::permuted;
using tcomplete::testing::random_cloud;
using tcomplete::testing::random_permutation;
using tcomplete::testing::translated;

namespace {

// Independent oracle: minimum mean matching cost over every bijection.
double emd_brute_force(const PointCloud& x, const PointCloud& y) {
    std::vector<int> sigma(x.size());
    std::iota(sigma.begin(), sigma.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double total = 0.0;
        for (int i = 0; i < x.size(); ++i) total += (x.point(i) - y.point(sigma[i])).norm();
        best = std::min(best, total);
    } while (std::next_permutation(sigma.begin(), sigma.end()));
    return best / x.size();
}

PointCloud cloud_of(std::initializer_list<Vec3> pts) {
    PointMatrix m(static_cast<int>(pts.size()), 3);
    int i = 0;
    for (const Vec3& p : pts) m.row(i++) = p.transpose();
    return PointCloud(std::move(m));
}

// Central finite difference of a scalar cloud functional.
template <typename F>
PointMatrix fd_cloud_gradient(const PointCloud& p, F&& f, double h = 1e-5) {
    PointMatrix g(p.size(), 3);
    PointCloud probe = p;
    for (int i = 0; i < p.size(); ++i)
        for (int c = 0; c < 3; ++c) {
            const double saved = probe.pts(i, c);
            probe.pts(i, c) = saved + h;
            const double up = f(probe);
            probe.pts(i, c) = saved - h;
            const double down = f(probe);
            probe.pts(i, c) = saved;
            g(i, c) = (up - down) / (2.0 * h);
        }
    return g;
}

double rel_error(const PointMatrix& a, const PointMatrix& b) {
    const double denom = std::max(a.norm(), 1e-12);
    return (a - b).norm() / denom;
}

}  // namespace

TEST_SUITE_BEGIN("losses");

TEST_CASE("chamfer matches hand-computed values") {
    const PointCloud a = cloud_of({Vec3(0, 0, 0)});
    const PointCloud b = cloud_of({Vec3(1, 0, 0)});
    CHECK(chamfer(a, a) == 0.0);
    CHECK(chamfer(a, b) == doctest::Approx(2.0).epsilon(1e-12));

    const PointCloud two = cloud_of({Vec3(0, 0, 0), Vec3(1, 0, 0)});
    CHECK(chamfer(two, a) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("chamfer is symmetric and non-negative") {
    Rng rng(101);
    for (int trial = 0; trial < 10; ++trial) {
        const PointCloud x = random_cloud(rng, 20);
        const PointCloud y = random_cloud(rng, 35);
        const double xy = chamfer(x, y);
        CHECK(xy >= 0.0);
        CHECK(xy == chamfer(y, x));
    }
    CHECK_THROWS_AS(chamfer(PointCloud{}, random_cloud(rng, 3)), EmptyInputError);
}

TEST_CASE("chamfer gradient matches finite differences") {
    Rng rng(103);
    for (int trial = 0; trial < 10; ++trial) {
        const PointCloud x = random_cloud(rng, 12);
        const PointCloud y = random_cloud(rng, 9);
        PointMatrix gx, gy;
        chamfer_grad(x, y, gx, gy);
        const auto fd_x = fd_cloud_gradient(x, [&](const PointCloud& p) { return chamfer(p, y); });
        const auto fd_y = fd_cloud_gradient(y, [&](const PointCloud& p) { return chamfer(x, p); });
        CHECK(rel_error(fd_x, gx) < 1e-4);
        CHECK(rel_error(fd_y, gy) < 1e-4);
    }
}

TEST_CASE("emd matches hand-computed values") {
    const PointCloud x = cloud_of({Vec3(0, 0, 0), Vec3(2, 0, 0)});
    const PointCloud y = cloud_of({Vec3(1, 0, 0), Vec3(3, 0, 0)});
    CHECK(emd(x, y) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(emd(x, x) == 0.0);
}

TEST_CASE("emd is zero exactly on permutations") {
    Rng rng(107);
    for (int trial = 0; trial < 10; ++trial) {
        const PointCloud x = random_cloud(rng, 14);
        const PointCloud y = permuted(x, random_permutation(rng, 14));
        CHECK(emd(x, y, EmdMode::Exact) <= 1e-12);
        CHECK(emd(x, y, EmdMode::Approximate) <= 1e-12);
    }
}

TEST_CASE("emd is permutation-invariant in both arguments") {
    Rng rng(109);
    const PointCloud x = random_cloud(rng, 10);
    const PointCloud y = random_cloud(rng, 10);
    const double base = emd(x, y, EmdMode::Exact);
    for (int trial = 0; trial < 5; ++trial) {
        const PointCloud xp = permuted(x, random_permutation(rng, 10));
        const PointCloud yp = permuted(y, random_permutation(rng, 10));
        CHECK(emd(xp, yp, EmdMode::Exact) == doctest::Approx(base).epsilon(1e-12));
    }
}

TEST_CASE("emd exact solver matches the brute-force oracle") {
    Rng rng(113);
    for (int trial = 0; trial < 40; ++trial) {
        const int n = 2 + static_cast<int>(rng.uniform_int(0, 5));  // up to 7 points
        const PointCloud x = random_cloud(rng, n);
        const PointCloud y = random_cloud(rng, n);
        const double oracle = emd_brute_force(x, y);
        CHECK(emd(x, y, EmdMode::Exact) == doctest::Approx(oracle).epsilon(1e-9));
    }
}

TEST_CASE("emd approximate solver stays within its documented tolerance") {
    Rng rng(127);
    for (int trial = 0; trial < 40; ++trial) {
        const int n = 4 + static_cast<int>(rng.uniform_int(0, 4));
        const PointCloud x = random_cloud(rng, n);
        const PointCloud y = random_cloud(rng, n);
        const double oracle = emd_brute_force(x, y);
        const double approx = emd(x, y, EmdMode::Approximate);
        CHECK(approx >= oracle - 1e-12);
        CHECK(approx <= oracle * (1.0 + kEmdApproxRelTol) + 1e-12);
    }
}

TEST_CASE("emd satisfies the triangle inequality on random triples") {
    Rng rng(131);
    for (int trial = 0; trial < 20; ++trial) {
        const PointCloud x = random_cloud(rng, 8);
        const PointCloud y = random_cloud(rng, 8);
        const PointCloud z = random_cloud(rng, 8);
        CHECK(emd(x, z, EmdMode::Exact) <=
              emd(x, y, EmdMode::Exact) + emd(y, z, EmdMode::Exact) + 1e-9);
    }
}

TEST_CASE("emd rejects unequal sizes") {
    Rng rng(137);
    CHECK_THROWS_AS(emd(random_cloud(rng, 3), random_cloud(rng, 4)), SizeError);
    CHECK_THROWS_AS(emd(PointCloud{}, PointCloud{}), EmptyInputError);
}

TEST_CASE("emd gradient matches finite differences away from ties") {
    Rng rng(139);
    for (int trial = 0; trial < 10; ++trial) {
        const PointCloud x = random_cloud(rng, 10);
        const PointCloud y = random_cloud(rng, 10);
        PointMatrix gx, gy;
        emd_grad(x, y, gx, gy, EmdMode::Exact);
        const auto fd_x = fd_cloud_gradient(
            x, [&](const PointCloud& p) { return emd(p, y, EmdMode::Exact); });
        const auto fd_y = fd_cloud_gradient(
            y, [&](const PointCloud& p) { return emd(x, p, EmdMode::Exact); });
        CHECK(rel_error(fd_x, gx) < 1e-4);
        CHECK(rel_error(fd_y, gy) < 1e-4);
    }
}

TEST_CASE("alignment loss weights the full resolution three-fold") {
    Rng rng(149);
    // Spread-out points so a small displacement keeps the identity matching.
    PointCloud base = random_cloud(rng, 8, 10.0);
    std::array<PointCloud, 3> aligned{base, base.prefix(4), base.prefix(2)};
    std::array<PointCloud, 3> gt = aligned;
    LossWeights w;

    CHECK(alignment_loss(aligned, gt, w) == 0.0);

    const Vec3 d(0.01, 0, 0);
    std::array<PointCloud, 3> res1_moved{base, translated(base.prefix(4), d), base.prefix(2)};
    CHECK(alignment_loss(res1_moved, gt, w) == doctest::Approx(0.01 / 3.0));
    std::array<PointCloud, 3> res0_moved{translated(base, d), base.prefix(4), base.prefix(2)};
    CHECK(alignment_loss(res0_moved, gt, w) == doctest::Approx(0.01));

    std::array<PointCloud, 3> bad{base, base.prefix(3), base.prefix(2)};
    CHECK_THROWS_AS(alignment_loss(bad, gt, w), SizeError);
}

TEST_CASE("huber translation covers both branches") {
    const Vec3 gt = Vec3::Zero();
    CHECK(huber_translation({gt, gt, gt}, gt) == 0.0);
    CHECK(huber_translation({Vec3(1, 0, 0)}, gt) == doctest::Approx(0.5));
    CHECK(huber_translation({Vec3(3, 0, 0)}, gt) == doctest::Approx(4.0));
    CHECK(huber_translation({Vec3(1, 0, 0), Vec3(3, 0, 0)}, gt) == doctest::Approx(4.5));
}

TEST_CASE("huber translation gradient matches finite differences") {
    Rng rng(151);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<Vec3> t = {Vec3(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3)),
                               Vec3(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3)),
                               Vec3(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3))};
        const Vec3 gt(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
        std::vector<Vec3> grads;
        huber_translation_grad(t, gt, grads);
        const double h = 1e-6;
        for (std::size_t i = 0; i < t.size(); ++i)
            for (int c = 0; c < 3; ++c) {
                std::vector<Vec3> probe = t;
                probe[i](c) += h;
                const double up = huber_translation(probe, gt);
                probe[i](c) -= 2 * h;
                const double down = huber_translation(probe, gt);
                const double fd = (up - down) / (2 * h);
                CHECK(grads[i](c) == doctest::Approx(fd).epsilon(1e-4));
            }
    }
}

TEST_CASE("laplacian loss matches the two-point value") {
    const PointCloud p = cloud_of({Vec3(0, 0, 0), Vec3(1, 0, 0)});
    AdjacencyGraph g;
    g.node_count = 2;
    g.neighbors = {{1}, {0}};
    CHECK(laplacian_loss(p, g) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("laplacian loss vanishes on symmetric neighbourhoods") {
    const PointCloud p = cloud_of({Vec3(0, 0, 0), Vec3(-1, 0, 0), Vec3(1, 0, 0)});
    AdjacencyGraph g;
    g.node_count = 3;
    g.neighbors = {{1, 2}, {0}, {0}};
    // Point 0's contributions cancel; points 1 and 2 each contribute.
    const double e = 4.0;
    const double expect = 0.0 + 2.0 / e + 2.0 / e;
    CHECK(laplacian_loss(p, g) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("laplacian loss is rigid-invariant and inversely scale-equivariant") {
    Rng rng(157);
    const PointCloud p = random_cloud(rng, 30);
    const AdjacencyGraph g = knn_adjacency(p, 4);
    const double base = laplacian_loss(p, g);

    RigidPose pose;
    pose.rotation = euler_xyz_to_matrix(0.4, -0.8, 1.1);
    pose.translation = Vec3(3, -2, 5);
    CHECK(laplacian_loss(apply_pose(p, pose), g) == doctest::Approx(base).epsilon(1e-9));

    for (double s : {0.5, 2.0, 7.5}) {
        PointCloud scaled = p;
        scaled.pts *= s;
        CHECK(s * laplacian_loss(scaled, g) == doctest::Approx(base).epsilon(1e-9));
    }
}

TEST_CASE("laplacian loss gradient matches finite differences") {
    Rng rng(163);
    for (int trial = 0; trial < 5; ++trial) {
        const PointCloud p = random_cloud(rng, 16);
        const AdjacencyGraph g = knn_adjacency(p, 3);
        PointMatrix grad;
        laplacian_loss_grad(p, g, grad);
        const auto fd =
            fd_cloud_gradient(p, [&](const PointCloud& q) { return laplacian_loss(q, g); });
        CHECK(rel_error(fd, grad) < 1e-4);
    }
}

TEST_CASE("laplacian loss rejects coincident neighbours") {
    const PointCloud p = cloud_of({Vec3(0, 0, 0), Vec3(0, 0, 0)});
    AdjacencyGraph g;
    g.node_count = 2;
    g.neighbors = {{1}, {0}};
    CHECK_THROWS_AS(laplacian_loss(p, g), DegeneracyError);
}

TEST_CASE("total loss combines parts with the configured weights") {
    LossWeights unit;
    unit.alpha = unit.beta = unit.gamma = 1.0;
    const LossReport r = total_loss(1, 1, 1, 1, 1, unit);
    CHECK(r.total == doctest::Approx(5.0));

    LossWeights doubled = unit;
    doubled.beta = 2.0;
    const LossReport r2 = total_loss(1, 1, 1, 1, 1, doubled);
    CHECK(r2.total - r.total == doctest::Approx(2.0));

    LossWeights defaults;
    const LossReport r3 = total_loss(0.2, 0.3, 0.01, 0.02, 0.5, defaults);
    CHECK(r3.total ==
          doctest::Approx(1.0 * 0.2 + 0.3 + 100.0 * (0.01 + 0.02) + 0.1 * 0.5).epsilon(1e-12));
    CHECK(r3.cd_coarse == 0.01);
    CHECK(r3.cd_final == 0.02);
}

TEST_CASE("sequence consistency over groups of five") {
    Rng rng(167);
    const PointCloud a = random_cloud(rng, 12);
    const PointCloud b = random_cloud(rng, 12);

    const auto zeros = sequence_consistency({a, a, a, a, a});
    REQUIRE(zeros.size() == 1);
    CHECK(zeros[0] == std::vector<double>{0, 0, 0, 0});

    const auto alternating = sequence_consistency({a, b, a, b, a});
    const double ab = chamfer(a, b);
    REQUIRE(alternating[0].size() == 4);
    for (double v : alternating[0]) CHECK(v == doctest::Approx(ab).epsilon(1e-12));

    // 12 frames -> two full groups, trailing two frames ignored.
    const std::vector<PointCloud> twelve(12, a);
    CHECK(sequence_consistency(twelve).size() == 2);

    CHECK_THROWS_AS(sequence_consistency({a, b, a}), SizeError);
}

TEST_SUITE_END();
