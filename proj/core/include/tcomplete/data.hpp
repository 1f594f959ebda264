#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tcomplete/config.hpp"
#include "tcomplete/geom.hpp"
#include "tcomplete/rng.hpp"

namespace tcomplete::data {

// ---------------------------------------------------------------------------
// Parametric shapes: unions of axis-aligned primitives with analytic
// surfaces, sampled densely with outward normals.
// ---------------------------------------------------------------------------

struct Primitive {
    enum class Kind { Box, Ellipsoid, Cylinder };

    Kind kind = Kind::Box;
    Vec3 center = Vec3::Zero();
    Vec3 size = Vec3::Ones();  // box: half extents; ellipsoid: radii
    double radius = 0.0;       // cylinder only
    double half_len = 0.0;     // cylinder only
    int axis = 2;              // cylinder axis (0=x, 1=y, 2=z)

    double area() const;
    // Draws a surface point with its outward unit normal.
    void sample_surface(Rng& rng, Vec3& point, Vec3& normal) const;
    // True when the point lies strictly inside the primitive shrunk by eps.
    bool contains(const Vec3& point, double eps) const;
    // Signed distance (negative inside). Exact for boxes, cylinders, and
    // spheres; a scaled implicit-surface bound for general ellipsoids.
    double signed_distance(const Vec3& point) const;
};

// A dense surface sampling of one shape. Points lie exactly on the surface
// of the primitive union (which is stored in the same normalized frame), the
// sample centroid is the origin, and the farthest sample is at radius 0.5.
struct SurfaceShape {
    std::string family;
    PointMatrix pts;      // (n >= kMinSurfacePoints, 3)
    PointMatrix normals;  // unit outward, row-matched to pts
    std::vector<Primitive> primitives;

    int size() const { return static_cast<int>(pts.rows()); }
    // Distance from a point to the union surface (min |sdf| over primitives).
    double surface_distance(const Vec3& p) const;
};

inline constexpr int kMinSurfacePoints = 20000;

// The eight built-in families.
const std::vector<std::string>& shape_families();

// Builds one randomized shape of the family. Unknown family -> ConfigError.
SurfaceShape generate_shape(Rng& rng, const std::string& family);

// ---------------------------------------------------------------------------
// Partial-view rendering
// ---------------------------------------------------------------------------

// Evenly spread viewpoints (golden-angle spiral) at the given radius.
std::vector<Vec3> fibonacci_viewpoints(int count, double radius = 2.0);

struct RenderStats {
    std::int64_t rendered_frames = 0;
    std::int64_t upsampled_frames = 0;  // fewer visible points than requested
};

// Visible-surface sampling from one viewpoint: front-facing normal test plus
// a depth buffer on a virtual image plane, then a random draw of `target`
// visible points (duplicated when fewer are visible; counted in stats).
// The viewpoint must lie outside the shape.
PointCloud render_partial(const SurfaceShape& shape, const Vec3& viewpoint, Rng& rng,
                          int target = 2048, RenderStats* stats = nullptr);

// ---------------------------------------------------------------------------
// Sequences
// ---------------------------------------------------------------------------

// One training sequence: K disturbed partial frames of a shape with exact
// ground truth. All stored clouds are float32-snapped so binary files
// round-trip bit-exactly; derived fields are recomputed identically on load.
struct TrainingSequence {
    std::string shape_id;
    std::string category;  // family name

    std::vector<PointCloud> frames;      // K disturbed partials
    std::vector<RigidPose> gt_poses;     // disturbance applied to frame k
    PointCloud gt_complete;              // uniform surface draw, 0.5 ball

    // Per frame, the frame mapped back by the exact inverse pose, reordered
    // into the frame's farthest-point order and truncated to N, N/2, N/4.
    // Row i of resolution 0 corresponds to row fps_order[i] of the frame, so
    // [1] and [2] are prefixes of [0].
    std::vector<std::array<PointCloud, 3>> gt_aligned_partials;

    int frame_count() const { return static_cast<int>(frames.size()); }
    void validate() const;  // size/shape coherence -> SizeError
};

// Renders K frames from spread viewpoints and disturbs each independently
// within the limits. `points` is the per-frame (and ground-truth) cloud size.
TrainingSequence make_sequence(const SurfaceShape& shape, const std::string& shape_id,
                               int frames, const DisturbanceLimits& limits, Rng& rng,
                               int points = 2048, RenderStats* stats = nullptr);

// Recomputes gt_aligned_partials from frames + poses (used after load).
void rebuild_aligned_partials(TrainingSequence& seq);

// ---------------------------------------------------------------------------
// On-disk layout and manifests
// ---------------------------------------------------------------------------
//
//   root/<split>/manifest.txt
//   root/<split>/<shape_id>/frame_<k>.pcb
//   root/<split>/<shape_id>/gt_complete.pcb
//   root/<split>/<shape_id>/poses.txt

struct ManifestEntry {
    std::string id;
    std::string category;
    int frames = 0;
    std::uint64_t seed = 0;  // per-shape generator seed, for regeneration
};

struct DatasetManifest {
    int version = 1;
    std::string split;
    std::uint64_t seed = 0;  // dataset-level seed
    std::vector<ManifestEntry> entries;
    std::filesystem::path root;  // the split directory

    std::filesystem::path shape_dir(const std::string& id) const { return root / id; }
    const ManifestEntry& entry(const std::string& id) const;  // ConfigError if absent
};

void save_sequence(const std::filesystem::path& dir, const TrainingSequence& seq);
TrainingSequence load_sequence(const DatasetManifest& manifest, const std::string& shape_id);

// Writes root/manifest.txt (deterministic byte layout).
void save_manifest(const DatasetManifest& manifest);
// Reads <split_dir>/manifest.txt and verifies every referenced file exists.
DatasetManifest load_manifest(const std::filesystem::path& split_dir);

// ---------------------------------------------------------------------------
// Dataset generation
// ---------------------------------------------------------------------------

struct GenOptions {
    std::uint64_t seed = 1;
    std::vector<std::string> families;  // empty = all built-in families
    int train_per_family = 4;
    int val_per_family = 1;
    int test_per_family = 1;
    int frames = 16;
    int points = 2048;
    DisturbanceLimits limits;
};

struct GenResult {
    std::vector<DatasetManifest> manifests;  // train, val, test
    RenderStats stats;
};

// Generates the full dataset under root. Byte-identical for equal options.
GenResult generate_dataset(const std::filesystem::path& root, const GenOptions& opt);

// Rounds every coordinate through float32 (the binary file precision).
PointCloud snap_to_float32(const PointCloud& cloud);

}  // namespace tcomplete::data
