#pragma once

#include "tcomplete/geom.hpp"
#include "tcomplete/rng.hpp"

namespace tcomplete::testing {

inline PointCloud random_cloud(Rng& rng, int n, double half_extent = 1.0) {
    PointMatrix pts(n, 3);
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < 3; ++c) pts(i, c) = rng.uniform(-half_extent, half_extent);
    return PointCloud(std::move(pts));
}

inline PointCloud translated(const PointCloud& cloud, const Vec3& offset) {
    PointCloud out = cloud;
    out.pts.rowwise() += offset.transpose();
    return out;
}

inline std::vector<int> random_permutation(Rng& rng, int n) {
    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = i;
    for (int i = n - 1; i > 0; --i)
        std::swap(perm[i], perm[static_cast<int>(rng.uniform_int(0, i))]);
    return perm;
}

inline PointCloud permuted(const PointCloud& cloud, const std::vector<int>& perm) {
    return cloud.gather(perm);
}

}  // namespace tcomplete::testing
