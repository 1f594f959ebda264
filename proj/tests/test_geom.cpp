#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "tcomplete/errors.hpp"
#include "tcomplete/geom.hpp"

using namespace tcomplete;
using tcomplete::testing::random_cloud;
using tcomplete::testing::random_permutation;

namespace {

PointCloud colinear_x(std::initializer_list<double> xs) {
    PointMatrix pts(static_cast<int>(xs.size()), 3);
    int i = 0;
    for (double x : xs) pts.row(i++) << x, 0.0, 0.0;
    return PointCloud(std::move(pts));
}

// Euler angles back out of an xyz-composed rotation (valid for |b| < 90 deg).
Vec3 euler_xyz_from_matrix(const Mat3& r) {
    const double b = std::asin(-r(2, 0));
    const double a = std::atan2(r(2, 1), r(2, 2));
    const double c = std::atan2(r(1, 0), r(0, 0));
    return {a, b, c};
}

}  // namespace

TEST_SUITE_BEGIN("geom");

TEST_CASE("fps returns the seed alone for m=1") {
    const PointCloud cloud = colinear_x({0.0, 1.0, 10.0});
    CHECK(farthest_point_sample(cloud, 1, 2) == std::vector<int>{2});
}

TEST_CASE("fps picks the farthest point on a line") {
    const PointCloud cloud = colinear_x({0.0, 1.0, 10.0});
    CHECK(farthest_point_sample(cloud, 2, 0) == std::vector<int>{0, 2});
}

TEST_CASE("fps with m=N is a permutation of all indices") {
    Rng rng(7);
    const PointCloud cloud = random_cloud(rng, 23);
    const auto idx = farthest_point_sample(cloud, 23, 0);
    std::set<int> unique(idx.begin(), idx.end());
    CHECK(unique.size() == 23);
    CHECK(*unique.begin() == 0);
    CHECK(*unique.rbegin() == 22);
}

TEST_CASE("fps has the prefix property") {
    Rng rng(11);
    const PointCloud cloud = random_cloud(rng, 40);
    const auto full = farthest_point_sample(cloud, 20, 3);
    const auto half = farthest_point_sample(cloud, 10, 3);
    CHECK(std::equal(half.begin(), half.end(), full.begin()));
}

TEST_CASE("fps is independent of storage order given the same seed point") {
    Rng rng(13);
    const PointCloud cloud = random_cloud(rng, 30);
    const auto perm = random_permutation(rng, 30);  // perm[new] = old
    const PointCloud shuffled = cloud.gather(perm);

    std::vector<int> old_of_new(30);
    for (int i = 0; i < 30; ++i) old_of_new[i] = perm[i];
    std::vector<int> new_of_old(30);
    for (int i = 0; i < 30; ++i) new_of_old[perm[i]] = i;

    const auto base = farthest_point_sample(cloud, 12, 5);
    const auto moved = farthest_point_sample(shuffled, 12, new_of_old[5]);
    for (std::size_t i = 0; i < base.size(); ++i) CHECK(base[i] == old_of_new[moved[i]]);
}

TEST_CASE("fps rejects bad sizes") {
    const PointCloud cloud = colinear_x({0.0, 1.0});
    CHECK_THROWS_AS(farthest_point_sample(cloud, 3, 0), SizeError);
    CHECK_THROWS_AS(farthest_point_sample(PointCloud{}, 1, 0), EmptyInputError);
}

TEST_CASE("centroid-nearest index is stable under permutation") {
    Rng rng(17);
    const PointCloud cloud = random_cloud(rng, 25);
    const int base = centroid_nearest_index(cloud);
    const auto perm = random_permutation(rng, 25);
    const PointCloud shuffled = cloud.gather(perm);
    CHECK(perm[centroid_nearest_index(shuffled)] == base);
}

TEST_CASE("ball query includes a coincident source point") {
    const PointCloud center = colinear_x({0.0});
    const PointCloud source = colinear_x({0.0, 5.0});
    const auto lists = ball_query(center, source, 0.5, 4);
    REQUIRE(lists.size() == 1);
    CHECK(lists[0] == std::vector<int>{0});
}

TEST_CASE("ball query keeps only in-radius points, nearest first") {
    const PointCloud center = colinear_x({0.0});
    PointMatrix src(2, 3);
    src.row(0) << 0.1, 0.0, 0.0;
    src.row(1) << 0.5, 0.0, 0.0;
    const auto lists = ball_query(center, PointCloud(src), 0.2, 4);
    CHECK(lists[0] == std::vector<int>{0});
}

TEST_CASE("ball query falls back to the single nearest point") {
    const PointCloud center = colinear_x({0.0});
    const PointCloud source = colinear_x({3.0, 2.0, 4.0});
    const auto lists = ball_query(center, source, 0.5, 4);
    CHECK(lists[0] == std::vector<int>{1});
}

TEST_CASE("ball query respects the cap and sorts nearest-first") {
    Rng rng(19);
    const PointCloud centers = random_cloud(rng, 8, 0.3);
    const PointCloud source = random_cloud(rng, 100, 0.5);
    const auto lists = ball_query(centers, source, 0.4, 5);
    for (std::size_t c = 0; c < lists.size(); ++c) {
        CHECK(lists[c].size() <= 5);
        CHECK(!lists[c].empty());
        double prev = -1.0;
        for (int j : lists[c]) {
            const double d = (source.point(j) - centers.point(static_cast<int>(c))).norm();
            CHECK(d >= prev);
            prev = d;
        }
    }
    CHECK_THROWS_AS(ball_query(centers, PointCloud{}, 0.4, 5), EmptyInputError);
}

TEST_CASE("ball query preference promotes chosen indices within the ball") {
    const PointCloud center = colinear_x({0.0});
    const PointCloud source = colinear_x({0.1, 0.2, 0.3, 0.4});
    // Cap 2 without preference keeps the two nearest.
    CHECK(ball_query(center, source, 1.0, 2)[0] == std::vector<int>{0, 1});
    // Preferring indices 2,3 fills the cap with them first.
    const auto lists = ball_query_preferring(center, source, 1.0, 2, {2, 3});
    CHECK(lists[0] == std::vector<int>{2, 3});
}

TEST_CASE("knn adjacency on two points is one mutual edge") {
    const PointCloud cloud = colinear_x({0.0, 1.0});
    const AdjacencyGraph g = knn_adjacency(cloud, 1);
    CHECK(g.neighbors[0] == std::vector<int>{1});
    CHECK(g.neighbors[1] == std::vector<int>{0});
}

TEST_CASE("knn adjacency symmetrizes one-way neighbours") {
    const PointCloud cloud = colinear_x({0.0, 1.0, 3.0});
    const AdjacencyGraph g = knn_adjacency(cloud, 1);
    CHECK(g.neighbors[0] == std::vector<int>{1});
    CHECK(g.neighbors[1] == std::vector<int>{0, 2});
    CHECK(g.neighbors[2] == std::vector<int>{1});
}

TEST_CASE("knn adjacency on a grid gives interior nodes full degree") {
    PointMatrix pts(16, 3);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) pts.row(4 * i + j) << i, j, 0.0;
    const AdjacencyGraph g = knn_adjacency(PointCloud(pts), 3);
    CHECK(g.is_symmetric());
    CHECK(!g.has_self_loops());
    for (int i = 1; i <= 2; ++i)
        for (int j = 1; j <= 2; ++j) CHECK(g.neighbors[4 * i + j].size() >= 3);
}

TEST_CASE("knn adjacency is symmetric and self-loop-free on random clouds") {
    Rng rng(23);
    for (int trial = 0; trial < 5; ++trial) {
        const PointCloud cloud = random_cloud(rng, 60);
        const AdjacencyGraph g = knn_adjacency(cloud, 4);
        CHECK(g.is_symmetric());
        CHECK(!g.has_self_loops());
        for (const auto& lst : g.neighbors) CHECK(!lst.empty());
    }
    CHECK_THROWS_AS(knn_adjacency(colinear_x({0.0, 1.0}), 2), SizeError);
}

TEST_CASE("rotation 6d canonical basis gives identity") {
    const Rotation6D r(Vec3(1, 0, 0), Vec3(0, 1, 0));
    CHECK((rotation_6d_to_matrix(r) - Mat3::Identity()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("rotation 6d gram-schmidt example") {
    const Rotation6D r(Vec3(0, 1, 0), Vec3(0, 0, 1));
    const Mat3 m = rotation_6d_to_matrix(r);
    Mat3 expect;
    expect.col(0) = Vec3(0, 1, 0);
    expect.col(1) = Vec3(0, 0, 1);
    expect.col(2) = Vec3(1, 0, 0);
    CHECK((m - expect).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(m.determinant() == doctest::Approx(1.0));
}

TEST_CASE("rotation 6d is invariant under positive rescaling") {
    Rng rng(29);
    for (int trial = 0; trial < 50; ++trial) {
        Eigen::Matrix<double, 6, 1> v;
        for (int i = 0; i < 6; ++i) v(i) = rng.uniform(-1.0, 1.0);
        Rotation6D r(v);
        Eigen::Matrix<double, 6, 1> scaled = v;
        scaled.head<3>() *= rng.uniform(0.1, 10.0);
        scaled.tail<3>() *= rng.uniform(0.1, 10.0);
        const Mat3 a = rotation_6d_to_matrix(r);
        const Mat3 b = rotation_6d_to_matrix(Rotation6D(scaled));
        CHECK((a - b).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("rotation 6d outputs proper rotations on random inputs") {
    Rng rng(31);
    for (int trial = 0; trial < 1000; ++trial) {
        Eigen::Matrix<double, 6, 1> v;
        for (int i = 0; i < 6; ++i) v(i) = rng.uniform(-1.0, 1.0);
        const Mat3 m = rotation_6d_to_matrix(Rotation6D(v));
        CHECK((m.transpose() * m - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-5);
        CHECK(std::abs(m.determinant() - 1.0) < 1e-5);
    }
}

TEST_CASE("rotation 6d rejects degenerate input") {
    CHECK_THROWS_AS(rotation_6d_to_matrix(Rotation6D(Vec3::Zero(), Vec3(0, 1, 0))),
                    DegeneracyError);
    CHECK_THROWS_AS(rotation_6d_to_matrix(Rotation6D(Vec3(1, 0, 0), Vec3(2, 0, 0))),
                    DegeneracyError);
    CHECK_THROWS_AS(rotation_6d_to_matrix(Rotation6D(Vec3(1, 0, 0), Vec3(-3, 0, 0))),
                    DegeneracyError);
}

TEST_CASE("apply pose identity and inverse round-trip") {
    Rng rng(37);
    const PointCloud cloud = random_cloud(rng, 20);
    CHECK((apply_pose(cloud, RigidPose{}).pts - cloud.pts).cwiseAbs().maxCoeff() == 0.0);

    RigidPose pose;
    pose.rotation = euler_xyz_to_matrix(0.3, -0.2, 0.9);
    pose.translation = Vec3(0.5, -1.0, 2.0);
    const PointCloud back = apply_pose(apply_pose(cloud, pose), pose.inverse());
    CHECK((back.pts - cloud.pts).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("apply pose preserves pairwise distances") {
    Rng rng(41);
    const PointCloud cloud = random_cloud(rng, 15);
    RigidPose pose;
    pose.rotation = euler_xyz_to_matrix(-0.7, 0.1, 0.4);
    pose.translation = Vec3(1, 2, 3);
    const PointCloud moved = apply_pose(cloud, pose);
    for (int i = 0; i < cloud.size(); ++i)
        for (int j = i + 1; j < cloud.size(); ++j) {
            const double before = (cloud.point(i) - cloud.point(j)).norm();
            const double after = (moved.point(i) - moved.point(j)).norm();
            CHECK(std::abs(before - after) < 1e-9);
        }
}

TEST_CASE("apply pose rejects non-rigid poses") {
    RigidPose bad;
    bad.rotation << 2, 0, 0, 0, 1, 0, 0, 0, 1;
    CHECK(!bad.valid());
    CHECK_THROWS_AS(apply_pose(colinear_x({0.0}), bad), PreconditionError);
}

TEST_CASE("disturbance sampling respects limits and determinism") {
    DisturbanceLimits zero;
    zero.max_rot_deg.setZero();
    zero.max_trans_m.setZero();
    Rng rng_a(43);
    const RigidPose identity_pose = sample_disturbance(rng_a, zero);
    CHECK((identity_pose.rotation - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(identity_pose.translation.cwiseAbs().maxCoeff() == 0.0);

    Rng rng_b(44), rng_c(44);
    const RigidPose p1 = sample_disturbance(rng_b, DisturbanceLimits{});
    const RigidPose p2 = sample_disturbance(rng_c, DisturbanceLimits{});
    CHECK((p1.rotation - p2.rotation).cwiseAbs().maxCoeff() == 0.0);
    CHECK((p1.translation - p2.translation).cwiseAbs().maxCoeff() == 0.0);

    Rng rng(45);
    const double limit_rad = 20.0 * M_PI / 180.0;
    for (int i = 0; i < 1000; ++i) {
        const RigidPose pose = sample_disturbance(rng, DisturbanceLimits{});
        CHECK(pose.valid());
        const Vec3 angles = euler_xyz_from_matrix(pose.rotation);
        for (int c = 0; c < 3; ++c) {
            CHECK(std::abs(angles(c)) <= limit_rad + 1e-9);
            CHECK(std::abs(pose.translation(c)) <= 0.1);
        }
    }
}

TEST_CASE("euler composition order is x then y then z") {
    const double a = 0.2, b = -0.35, c = 0.5;
    Mat3 rx, ry, rz;
    rx << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
    ry << std::cos(b), 0, std::sin(b), 0, 1, 0, -std::sin(b), 0, std::cos(b);
    rz << std::cos(c), -std::sin(c), 0, std::sin(c), std::cos(c), 0, 0, 0, 1;
    const Mat3 expect = rz * ry * rx;
    CHECK((euler_xyz_to_matrix(a, b, c) - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("point cloud prefix and gather") {
    Rng rng(47);
    const PointCloud cloud = random_cloud(rng, 10);
    const PointCloud head = cloud.prefix(4);
    CHECK(head.size() == 4);
    CHECK((head.pts - cloud.pts.topRows(4)).cwiseAbs().maxCoeff() == 0.0);
    const PointCloud picked = cloud.gather({9, 0, 3});
    CHECK(picked.size() == 3);
    CHECK((picked.point(0) - cloud.point(9)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((picked.point(2) - cloud.point(3)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_SUITE_END();
