#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <vector>

#include "tcomplete/rng.hpp"

namespace tcomplete {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
// One point per row, in meters.
using PointMatrix = Eigen::Matrix<double, Eigen::Dynamic, 3>;

struct PointCloud {
    PointMatrix pts;

    PointCloud() = default;
    explicit PointCloud(PointMatrix p) : pts(std::move(p)) {}

    int size() const { return static_cast<int>(pts.rows()); }
    bool empty() const { return pts.rows() == 0; }
    Vec3 point(int i) const { return pts.row(i).transpose(); }
    Vec3 centroid() const;
    bool all_finite() const { return pts.allFinite(); }
    double max_radius_from(const Vec3& c) const;

    PointCloud prefix(int n) const;
    PointCloud gather(const std::vector<int>& idx) const;
};

struct RigidPose {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    RigidPose inverse() const;
    // rotation'*rotation = I and det = 1, both within tol (max-abs entry).
    bool valid(double tol = 1e-5) const;
};

// Two unnormalized 3-vectors; the first two target column directions of the
// rotation matrix they parameterize.
struct Rotation6D {
    Eigen::Matrix<double, 6, 1> r;

    Rotation6D() { r.setZero(); }
    explicit Rotation6D(const Eigen::Matrix<double, 6, 1>& v) : r(v) {}
    Rotation6D(const Vec3& a, const Vec3& b) { r << a, b; }
    Vec3 first() const { return r.head<3>(); }
    Vec3 second() const { return r.tail<3>(); }
};

// Symmetrized k-NN graph. No self-loops; y in neighbors[x] iff x in
// neighbors[y]; every node has at least one neighbor.
struct AdjacencyGraph {
    int node_count = 0;
    std::vector<std::vector<int>> neighbors;

    std::size_t directed_edge_count() const;
    bool is_symmetric() const;
    bool has_self_loops() const;
};

struct DisturbanceLimits {
    Vec3 max_rot_deg = Vec3(20.0, 20.0, 20.0);
    Vec3 max_trans_m = Vec3(0.1, 0.1, 0.1);

    bool valid() const {
        return (max_rot_deg.array() >= 0).all() && (max_trans_m.array() >= 0).all();
    }
};

// --------------------------------------------------------------------------
// Operations
// --------------------------------------------------------------------------

// Greedy farthest point sampling. First index is seed_index; each subsequent
// index maximizes the min distance to the already-selected set, ties broken
// by lowest index. Results have the prefix property: the first m' entries of
// an m-sample equal the m'-sample.
std::vector<int> farthest_point_sample(const PointCloud& cloud, int m, int seed_index);

// Canonical FPS seed: index of the point nearest the centroid (lowest index
// on ties). Stable under permutations of storage order.
int centroid_nearest_index(const PointCloud& cloud);

// Per-center lists of source indices within radius, nearest-first, at most
// cap entries. An empty ball falls back to the single nearest source point.
std::vector<std::vector<int>> ball_query(const PointCloud& centers, const PointCloud& source,
                                         double radius, int cap);

// Like ball_query but points whose index appears in `preferred` win ties with
// non-preferred points: preferred in-ball points are taken nearest-first
// before the rest fill the remaining cap slots.
std::vector<std::vector<int>> ball_query_preferring(const PointCloud& centers,
                                                    const PointCloud& source, double radius,
                                                    int cap, const std::vector<int>& preferred);

AdjacencyGraph knn_adjacency(const PointCloud& cloud, int k);

// Gram-Schmidt: b1 = normalize(v1), b2 = normalize(v2 - (v2.b1) b1),
// b3 = b1 x b2; columns (b1, b2, b3). Degenerate inputs (zero first vector,
// parallel vectors) raise DegeneracyError; they are never silently patched.
Mat3 rotation_6d_to_matrix(const Rotation6D& r);

// p' = R p + t for every point, order preserved.
PointCloud apply_pose(const PointCloud& cloud, const RigidPose& pose);

// Per-axis Euler angles and translations drawn uniformly within limits.
// Composition order: rotate about x, then y, then z, then translate.
RigidPose sample_disturbance(Rng& rng, const DisturbanceLimits& limits);

Mat3 euler_xyz_to_matrix(double rx_rad, double ry_rad, double rz_rad);

}  // namespace tcomplete
