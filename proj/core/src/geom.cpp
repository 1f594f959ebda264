#include "tcomplete/geom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_set>

#include "tcomplete/errors.hpp"

namespace tcomplete {

Vec3 PointCloud::centroid() const {
    if (empty()) throw EmptyInputError("centroid of empty cloud");
    return pts.colwise().mean().transpose();
}

double PointCloud::max_radius_from(const Vec3& c) const {
    if (empty()) return 0.0;
    return (pts.rowwise() - c.transpose()).rowwise().norm().maxCoeff();
}

PointCloud PointCloud::prefix(int n) const {
    if (n < 0 || n > size()) throw SizeError("prefix size out of range");
    return PointCloud(pts.topRows(n));
}

PointCloud PointCloud::gather(const std::vector<int>& idx) const {
    PointMatrix out(static_cast<int>(idx.size()), 3);
    for (int i = 0; i < static_cast<int>(idx.size()); ++i) {
        if (idx[i] < 0 || idx[i] >= size()) throw SizeError("gather index out of range");
        out.row(i) = pts.row(idx[i]);
    }
    return PointCloud(std::move(out));
}

RigidPose RigidPose::inverse() const {
    RigidPose inv;
    inv.rotation = rotation.transpose();
    inv.translation = -(rotation.transpose() * translation);
    return inv;
}

bool RigidPose::valid(double tol) const {
    const Mat3 gram = rotation.transpose() * rotation;
    const double ortho = (gram - Mat3::Identity()).cwiseAbs().maxCoeff();
    const double det = rotation.determinant();
    return ortho < tol && std::abs(det - 1.0) < tol && translation.allFinite();
}

std::size_t AdjacencyGraph::directed_edge_count() const {
    std::size_t n = 0;
    for (const auto& nb : neighbors) n += nb.size();
    return n;
}

bool AdjacencyGraph::is_symmetric() const {
    for (int x = 0; x < node_count; ++x)
        for (int y : neighbors[x])
            if (std::find(neighbors[y].begin(), neighbors[y].end(), x) == neighbors[y].end())
                return false;
    return true;
}

bool AdjacencyGraph::has_self_loops() const {
    for (int x = 0; x < node_count; ++x)
        if (std::find(neighbors[x].begin(), neighbors[x].end(), x) != neighbors[x].end())
            return true;
    return false;
}

std::vector<int> farthest_point_sample(const PointCloud& cloud, int m, int seed_index) {
    const int n = cloud.size();
    if (n == 0) throw EmptyInputError("farthest_point_sample: empty cloud");
    if (m < 1 || m > n) throw SizeError("farthest_point_sample: m out of [1, N]");
    if (seed_index < 0 || seed_index >= n) throw SizeError("farthest_point_sample: bad seed index");

    std::vector<int> picked;
    picked.reserve(m);
    picked.push_back(seed_index);

    std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());
    int last = seed_index;
    for (int step = 1; step < m; ++step) {
        const Eigen::RowVector3d p = cloud.pts.row(last);
        int best = -1;
        double best_d2 = -1.0;
        for (int k = 0; k < n; ++k) {
            const double d2 = (cloud.pts.row(k) - p).squaredNorm();
            if (d2 < min_d2[k]) min_d2[k] = d2;
            if (min_d2[k] > best_d2) {  // strict ">" keeps the lowest index on ties
                best_d2 = min_d2[k];
                best = k;
            }
        }
        picked.push_back(best);
        last = best;
    }
    return picked;
}

int centroid_nearest_index(const PointCloud& cloud) {
    if (cloud.empty()) throw EmptyInputError("centroid_nearest_index: empty cloud");
    const Vec3 c = cloud.centroid();
    int best = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (int i = 0; i < cloud.size(); ++i) {
        const double d2 = (cloud.pts.row(i).transpose() - c).squaredNorm();
        if (d2 < best_d2) {
            best_d2 = d2;
            best = i;
        }
    }
    return best;
}

namespace {

std::vector<std::vector<int>> ball_query_impl(const PointCloud& centers, const PointCloud& source,
                                              double radius, int cap,
                                              const std::unordered_set<int>* preferred) {
    if (source.empty()) throw EmptyInputError("ball_query: empty source");
    if (radius <= 0.0) throw PreconditionError("ball_query: radius must be positive");
    if (cap < 1) throw PreconditionError("ball_query: cap must be >= 1");

    const double r2 = radius * radius;
    std::vector<std::vector<int>> out(centers.size());
    std::vector<std::pair<double, int>> in_ball;
    for (int c = 0; c < centers.size(); ++c) {
        const Eigen::RowVector3d p = centers.pts.row(c);
        in_ball.clear();
        int nearest = 0;
        double nearest_d2 = std::numeric_limits<double>::infinity();
        for (int s = 0; s < source.size(); ++s) {
            const double d2 = (source.pts.row(s) - p).squaredNorm();
            if (d2 < nearest_d2) {
                nearest_d2 = d2;
                nearest = s;
            }
            if (d2 <= r2) in_ball.emplace_back(d2, s);
        }
        if (in_ball.empty()) {
            out[c] = {nearest};  // fallback: downstream grouping never sees an empty set
            continue;
        }
        std::sort(in_ball.begin(), in_ball.end());
        auto& list = out[c];
        if (preferred != nullptr && static_cast<int>(in_ball.size()) > cap) {
            for (const auto& [d2, s] : in_ball) {
                if (static_cast<int>(list.size()) >= cap) break;
                if (preferred->count(s)) list.push_back(s);
            }
            for (const auto& [d2, s] : in_ball) {
                if (static_cast<int>(list.size()) >= cap) break;
                if (!preferred->count(s)) list.push_back(s);
            }
        } else {
            for (const auto& [d2, s] : in_ball) {
                if (static_cast<int>(list.size()) >= cap) break;
                list.push_back(s);
            }
        }
    }
    return out;
}

}  // namespace

std::vector<std::vector<int>> ball_query(const PointCloud& centers, const PointCloud& source,
                                         double radius, int cap) {
    return ball_query_impl(centers, source, radius, cap, nullptr);
}

std::vector<std::vector<int>> ball_query_preferring(const PointCloud& centers,
                                                    const PointCloud& source, double radius,
                                                    int cap, const std::vector<int>& preferred) {
    const std::unordered_set<int> pref(preferred.begin(), preferred.end());
    return ball_query_impl(centers, source, radius, cap, &pref);
}

AdjacencyGraph knn_adjacency(const PointCloud& cloud, int k) {
    const int n = cloud.size();
    if (n == 0) throw EmptyInputError("knn_adjacency: empty cloud");
    if (k < 1 || k >= n) throw SizeError("knn_adjacency: need 1 <= k < N");

    std::vector<std::unordered_set<int>> adj(n);
    std::vector<std::pair<double, int>> dists(n);
    for (int i = 0; i < n; ++i) {
        const Eigen::RowVector3d p = cloud.pts.row(i);
        for (int j = 0; j < n; ++j)
            dists[j] = {(cloud.pts.row(j) - p).squaredNorm(), j};
        dists[i].first = std::numeric_limits<double>::infinity();  // no self-loop
        std::partial_sort(dists.begin(), dists.begin() + k, dists.end());
        for (int t = 0; t < k; ++t) {
            const int j = dists[t].second;
            adj[i].insert(j);
            adj[j].insert(i);  // symmetrize
        }
    }

    AdjacencyGraph g;
    g.node_count = n;
    g.neighbors.resize(n);
    for (int i = 0; i < n; ++i) {
        g.neighbors[i].assign(adj[i].begin(), adj[i].end());
        std::sort(g.neighbors[i].begin(), g.neighbors[i].end());
    }
    return g;
}

Mat3 rotation_6d_to_matrix(const Rotation6D& r) {
    const Vec3 v1 = r.first();
    const Vec3 v2 = r.second();
    const double n1 = v1.norm();
    if (n1 < 1e-12) throw DegeneracyError("rotation_6d_to_matrix: first vector is zero", 0);
    const double n2 = v2.norm();
    if (n2 < 1e-12) throw DegeneracyError("rotation_6d_to_matrix: second vector is zero", 1);
    // angle between v1 and v2 must exceed 1e-6 rad (also rejects anti-parallel)
    const double sin_angle = v1.cross(v2).norm() / (n1 * n2);
    if (sin_angle <= 1e-6)
        throw DegeneracyError("rotation_6d_to_matrix: vectors are parallel", 1);

    const Vec3 b1 = v1 / n1;
    const Vec3 u2 = v2 - v2.dot(b1) * b1;
    const Vec3 b2 = u2 / u2.norm();
    const Vec3 b3 = b1.cross(b2);
    Mat3 out;
    out.col(0) = b1;
    out.col(1) = b2;
    out.col(2) = b3;
    return out;
}

PointCloud apply_pose(const PointCloud& cloud, const RigidPose& pose) {
    if (!pose.valid()) throw PreconditionError("apply_pose: pose violates rigidity invariants");
    PointCloud out;
    out.pts = cloud.pts * pose.rotation.transpose();
    out.pts.rowwise() += pose.translation.transpose();
    return out;
}

Mat3 euler_xyz_to_matrix(double rx, double ry, double rz) {
    const Mat3 mx = Eigen::AngleAxisd(rx, Vec3::UnitX()).toRotationMatrix();
    const Mat3 my = Eigen::AngleAxisd(ry, Vec3::UnitY()).toRotationMatrix();
    const Mat3 mz = Eigen::AngleAxisd(rz, Vec3::UnitZ()).toRotationMatrix();
    return mz * my * mx;  // rotate about x, then y, then z
}

RigidPose sample_disturbance(Rng& rng, const DisturbanceLimits& limits) {
    if (!limits.valid()) throw PreconditionError("sample_disturbance: negative limits");
    const double deg2rad = M_PI / 180.0;
    Vec3 angles, trans;
    for (int a = 0; a < 3; ++a)
        angles[a] = rng.uniform(-limits.max_rot_deg[a], limits.max_rot_deg[a]) * deg2rad;
    for (int a = 0; a < 3; ++a)
        trans[a] = rng.uniform(-limits.max_trans_m[a], limits.max_trans_m[a]);
    RigidPose pose;
    pose.rotation = euler_xyz_to_matrix(angles[0], angles[1], angles[2]);
    pose.translation = trans;
    return pose;
}

}  // namespace tcomplete
