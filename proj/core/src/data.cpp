#include "tcomplete/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "tcomplete/errors.hpp"
#include "tcomplete/io.hpp"

namespace tcomplete::data {

namespace {

constexpr int kDenseTarget = 22000;      // per-shape surface samples
constexpr double kRejectEps = 1e-9;      // strict-interior margin for unions
constexpr int kDepthGrid = 64;           // image-plane depth buffer resolution
constexpr double kDepthTol = 0.03;       // occlusion slack (shapes fill a 0.5 ball)
constexpr double kPi = 3.14159265358979323846;

void cylinder_axes(int axis, int& u, int& v) {
    u = (axis + 1) % 3;
    v = (axis + 2) % 3;
}

Vec3 random_unit(Rng& rng) {
    while (true) {
        const Vec3 v(rng.normal(), rng.normal(), rng.normal());
        const double n = v.norm();
        if (n > 1e-9) return v / n;
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// Primitive
// ---------------------------------------------------------------------------

double Primitive::area() const {
    switch (kind) {
        case Kind::Box:
            return 8.0 * (size.x() * size.y() + size.y() * size.z() + size.z() * size.x());
        case Kind::Ellipsoid: {
            // Thomsen's approximation; sampling weights need no exactness.
            const double p = 1.6075;
            const double a = std::pow(size.x(), p), b = std::pow(size.y(), p),
                         c = std::pow(size.z(), p);
            return 4.0 * kPi * std::pow((a * b + b * c + c * a) / 3.0, 1.0 / p);
        }
        case Kind::Cylinder:
            return 2.0 * kPi * radius * (2.0 * half_len) + 2.0 * kPi * radius * radius;
    }
    return 0.0;
}

void Primitive::sample_surface(Rng& rng, Vec3& point, Vec3& normal) const {
    switch (kind) {
        case Kind::Box: {
            const double ax = size.y() * size.z(), ay = size.z() * size.x(),
                         az = size.x() * size.y();
            const double pick = rng.uniform(0.0, ax + ay + az);
            const int axis = pick < ax ? 0 : (pick < ax + ay ? 1 : 2);
            const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
            point = center;
            point[axis] += sign * size[axis];
            const int u = (axis + 1) % 3, v = (axis + 2) % 3;
            point[u] += rng.uniform(-size[u], size[u]);
            point[v] += rng.uniform(-size[v], size[v]);
            normal = Vec3::Zero();
            normal[axis] = sign;
            return;
        }
        case Kind::Ellipsoid: {
            const Vec3 s = random_unit(rng);
            point = center + s.cwiseProduct(size);
            normal = s.cwiseQuotient(size).normalized();
            return;
        }
        case Kind::Cylinder: {
            int u, v;
            cylinder_axes(axis, u, v);
            const double lateral = 2.0 * kPi * radius * (2.0 * half_len);
            const double caps = 2.0 * kPi * radius * radius;
            const double theta = rng.uniform(0.0, 2.0 * kPi);
            const double cu = std::cos(theta), sv = std::sin(theta);
            point = center;
            if (rng.uniform(0.0, lateral + caps) < lateral) {
                point[axis] += rng.uniform(-half_len, half_len);
                point[u] += radius * cu;
                point[v] += radius * sv;
                normal = Vec3::Zero();
                normal[u] = cu;
                normal[v] = sv;
            } else {
                const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
                const double rho = radius * std::sqrt(rng.uniform());
                point[axis] += sign * half_len;
                point[u] += rho * cu;
                point[v] += rho * sv;
                normal = Vec3::Zero();
                normal[axis] = sign;
            }
            return;
        }
    }
}

bool Primitive::contains(const Vec3& p, double eps) const {
    const Vec3 d = p - center;
    switch (kind) {
        case Kind::Box:
            return (d.cwiseAbs().array() < (size.array() - eps)).all();
        case Kind::Ellipsoid: {
            if ((size.array() <= eps).any()) return false;
            const Vec3 q = d.array() / (size.array() - eps);
            return q.squaredNorm() < 1.0;
        }
        case Kind::Cylinder: {
            int u, v;
            cylinder_axes(axis, u, v);
            const double rho = std::hypot(d[u], d[v]);
            return rho < radius - eps && std::abs(d[axis]) < half_len - eps;
        }
    }
    return false;
}

double Primitive::signed_distance(const Vec3& p) const {
    const Vec3 d = p - center;
    switch (kind) {
        case Kind::Box: {
            const Vec3 q = d.cwiseAbs() - size;
            const double outside = q.cwiseMax(0.0).norm();
            const double inside = std::min(q.maxCoeff(), 0.0);
            return outside + inside;
        }
        case Kind::Ellipsoid: {
            if (std::abs(size.x() - size.y()) < 1e-12 && std::abs(size.y() - size.z()) < 1e-12)
                return d.norm() - size.x();  // sphere: exact
            const double k = d.cwiseQuotient(size).norm();
            return (k - 1.0) * size.minCoeff();
        }
        case Kind::Cylinder: {
            int u, v;
            cylinder_axes(axis, u, v);
            const double dr = std::hypot(d[u], d[v]) - radius;
            const double dz = std::abs(d[axis]) - half_len;
            const double outside = std::hypot(std::max(dr, 0.0), std::max(dz, 0.0));
            const double inside = std::min(std::max(dr, dz), 0.0);
            return outside + inside;
        }
    }
    return 0.0;
}

double SurfaceShape::surface_distance(const Vec3& p) const {
    double sd = std::numeric_limits<double>::infinity();
    for (const auto& prim : primitives) sd = std::min(sd, prim.signed_distance(p));
    return std::abs(sd);
}

// ---------------------------------------------------------------------------
// Families
// ---------------------------------------------------------------------------

namespace {

Primitive box(const Vec3& center, const Vec3& half) {
    Primitive p;
    p.kind = Primitive::Kind::Box;
    p.center = center;
    p.size = half;
    return p;
}

Primitive ellipsoid(const Vec3& center, const Vec3& radii) {
    Primitive p;
    p.kind = Primitive::Kind::Ellipsoid;
    p.center = center;
    p.size = radii;
    return p;
}

Primitive sphere(const Vec3& center, double r) { return ellipsoid(center, Vec3(r, r, r)); }

Primitive cylinder(const Vec3& center, int axis, double radius, double half_len) {
    Primitive p;
    p.kind = Primitive::Kind::Cylinder;
    p.center = center;
    p.axis = axis;
    p.radius = radius;
    p.half_len = half_len;
    return p;
}

// Mild size jitter so shapes within a family differ.
double jit(Rng& rng) { return rng.uniform(0.85, 1.2); }

std::vector<Primitive> build_family(Rng& rng, const std::string& family) {
    std::vector<Primitive> prims;
    if (family == "box-union") {
        const int count = static_cast<int>(rng.uniform_int(2, 3));
        for (int i = 0; i < count; ++i) {
            const Vec3 c(rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2));
            const Vec3 h(rng.uniform(0.12, 0.3), rng.uniform(0.12, 0.3), rng.uniform(0.12, 0.3));
            prims.push_back(box(c, h));
        }
    } else if (family == "ellipsoid-union") {
        const int count = static_cast<int>(rng.uniform_int(2, 3));
        for (int i = 0; i < count; ++i) {
            const Vec3 c(rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2));
            const Vec3 r(rng.uniform(0.15, 0.3), rng.uniform(0.15, 0.3), rng.uniform(0.15, 0.3));
            prims.push_back(ellipsoid(c, r));
        }
    } else if (family == "cylinder-lamp") {
        const double pole_r = 0.06 * jit(rng);
        prims.push_back(cylinder(Vec3(0, 0, 0), 2, pole_r, 0.45 * jit(rng)));
        prims.push_back(ellipsoid(Vec3(0, 0, 0.42), Vec3(0.24 * jit(rng), 0.24 * jit(rng), 0.1)));
        prims.push_back(cylinder(Vec3(0, 0, -0.44), 2, 0.2 * jit(rng), 0.03));
    } else if (family == "tabletop") {
        const double lx = 0.45 * jit(rng), ly = 0.3 * jit(rng);
        prims.push_back(box(Vec3(0, 0, 0.3), Vec3(lx, ly, 0.03)));
        for (const double sx : {-1.0, 1.0})
            for (const double sy : {-1.0, 1.0})
                prims.push_back(cylinder(Vec3(sx * (lx - 0.05), sy * (ly - 0.05), 0.0), 2,
                                         0.035 * jit(rng), 0.28));
    } else if (family == "wing-body") {
        prims.push_back(ellipsoid(Vec3(0, 0, 0), Vec3(0.45 * jit(rng), 0.1 * jit(rng), 0.1)));
        prims.push_back(box(Vec3(0.05, 0, 0), Vec3(0.07 * jit(rng), 0.42 * jit(rng), 0.012)));
        prims.push_back(box(Vec3(-0.4, 0, 0.06), Vec3(0.03, 0.12 * jit(rng), 0.07)));
    } else if (family == "capsule-rocket") {
        const double r = 0.13 * jit(rng), hl = 0.3 * jit(rng);
        prims.push_back(cylinder(Vec3(0, 0, 0), 2, r, hl));
        prims.push_back(sphere(Vec3(0, 0, hl), r));
        prims.push_back(sphere(Vec3(0, 0, -hl), r));
        for (int i = 0; i < 3; ++i) {
            const double th = 2.0 * kPi * i / 3.0;
            prims.push_back(box(Vec3(1.1 * r * std::cos(th), 1.1 * r * std::sin(th), -hl),
                                Vec3(0.08 * jit(rng), 0.08 * jit(rng), 0.05)));
        }
    } else if (family == "chair") {
        const double s = 0.22 * jit(rng);
        prims.push_back(box(Vec3(0, 0, 0), Vec3(s, s, 0.025)));
        prims.push_back(box(Vec3(0, -s + 0.02, 0.2), Vec3(s, 0.025, 0.2 * jit(rng))));
        for (const double sx : {-1.0, 1.0})
            for (const double sy : {-1.0, 1.0})
                prims.push_back(
                    box(Vec3(sx * (s - 0.03), sy * (s - 0.03), -0.14), Vec3(0.025, 0.025, 0.14)));
    } else if (family == "barbell") {
        const double r = 0.16 * jit(rng), off = 0.32 * jit(rng);
        prims.push_back(sphere(Vec3(-off, 0, 0), r));
        prims.push_back(sphere(Vec3(off, 0, 0), r * jit(rng)));
        prims.push_back(cylinder(Vec3(0, 0, 0), 0, 0.05 * jit(rng), off));
    } else {
        throw ConfigError("unknown shape family: " + family);
    }
    return prims;
}

}  // namespace

const std::vector<std::string>& shape_families() {
    static const std::vector<std::string> families = {
        "box-union", "ellipsoid-union", "cylinder-lamp", "tabletop",
        "wing-body", "capsule-rocket",  "chair",         "barbell"};
    return families;
}

SurfaceShape generate_shape(Rng& rng, const std::string& family) {
    SurfaceShape shape;
    shape.family = family;
    shape.primitives = build_family(rng, family);

    std::vector<double> cumulative;
    double total = 0.0;
    for (const auto& prim : shape.primitives) {
        total += prim.area();
        cumulative.push_back(total);
    }

    shape.pts.resize(kDenseTarget, 3);
    shape.normals.resize(kDenseTarget, 3);
    int accepted = 0;
    long attempts = 0;
    const long max_attempts = 200L * kDenseTarget;
    while (accepted < kDenseTarget) {
        if (++attempts > max_attempts)
            throw PreconditionError("surface sampling stalled for family " + family);
        const double pick = rng.uniform(0.0, total);
        const std::size_t which =
            std::lower_bound(cumulative.begin(), cumulative.end(), pick) - cumulative.begin();
        const auto& prim = shape.primitives[std::min(which, shape.primitives.size() - 1)];
        Vec3 p, n;
        prim.sample_surface(rng, p, n);
        bool interior = false;
        for (const auto& other : shape.primitives) {
            if (&other != &prim && other.contains(p, kRejectEps)) {
                interior = true;
                break;
            }
        }
        if (interior) continue;
        shape.pts.row(accepted) = p.transpose();
        shape.normals.row(accepted) = n.transpose();
        ++accepted;
    }

    // Normalize: sample centroid to the origin, farthest sample to radius
    // 0.5. The same translate+scale is applied to the primitives, so points
    // stay exactly on the union surface; normals are scale-invariant.
    const Vec3 centroid = shape.pts.colwise().mean().transpose();
    shape.pts.rowwise() -= centroid.transpose();
    const double max_r = shape.pts.rowwise().norm().maxCoeff();
    const double scale = 0.5 * (1.0 - 1e-12) / max_r;
    shape.pts *= scale;
    for (auto& prim : shape.primitives) {
        prim.center = (prim.center - centroid) * scale;
        prim.size *= scale;
        prim.radius *= scale;
        prim.half_len *= scale;
    }
    return shape;
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

std::vector<Vec3> fibonacci_viewpoints(int count, double radius) {
    if (count < 1) throw PreconditionError("viewpoint count must be >= 1");
    std::vector<Vec3> views;
    views.reserve(count);
    const double golden = kPi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < count; ++i) {
        const double z = 1.0 - 2.0 * (i + 0.5) / count;
        const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double theta = golden * i;
        views.emplace_back(radius * rho * std::cos(theta), radius * rho * std::sin(theta),
                           radius * z);
    }
    return views;
}

PointCloud render_partial(const SurfaceShape& shape, const Vec3& viewpoint, Rng& rng,
                          int target, RenderStats* stats) {
    if (shape.size() < 3) throw PreconditionError("shape has too few surface samples");
    if (target < 1) throw PreconditionError("render target must be >= 1");
    const double shape_radius = shape.pts.rowwise().norm().maxCoeff();
    if (viewpoint.norm() <= shape_radius)
        throw PreconditionError("viewpoint lies inside the shape's bounding ball");

    const Vec3 dir = (-viewpoint).normalized();  // toward the shape
    // Image-plane basis perpendicular to the view direction.
    int least = 0;
    for (int a = 1; a < 3; ++a)
        if (std::abs(dir[a]) < std::abs(dir[least])) least = a;
    const Vec3 u = (Vec3::Unit(least) - dir * dir[least]).normalized();
    const Vec3 v = dir.cross(u);

    const int n = shape.size();
    std::vector<double> px(n), py(n), depth(n);
    std::vector<char> front(n);
    double lo_x = std::numeric_limits<double>::infinity(), hi_x = -lo_x;
    double lo_y = lo_x, hi_y = hi_x;
    for (int i = 0; i < n; ++i) {
        const Vec3 p = shape.pts.row(i).transpose();
        const Vec3 rel = p - viewpoint;
        px[i] = rel.dot(u);
        py[i] = rel.dot(v);
        depth[i] = rel.dot(dir);
        front[i] = shape.normals.row(i).dot((viewpoint - p).transpose()) > 0.0 ? 1 : 0;
        lo_x = std::min(lo_x, px[i]);
        hi_x = std::max(hi_x, px[i]);
        lo_y = std::min(lo_y, py[i]);
        hi_y = std::max(hi_y, py[i]);
    }
    const double span_x = std::max(hi_x - lo_x, 1e-9);
    const double span_y = std::max(hi_y - lo_y, 1e-9);
    const auto cell_of = [&](int i) {
        int cx = static_cast<int>((px[i] - lo_x) / span_x * kDepthGrid);
        int cy = static_cast<int>((py[i] - lo_y) / span_y * kDepthGrid);
        cx = std::clamp(cx, 0, kDepthGrid - 1);
        cy = std::clamp(cy, 0, kDepthGrid - 1);
        return cy * kDepthGrid + cx;
    };

    std::vector<double> cell_min(static_cast<std::size_t>(kDepthGrid) * kDepthGrid,
                                 std::numeric_limits<double>::infinity());
    for (int i = 0; i < n; ++i)
        if (front[i]) {
            auto& slot = cell_min[cell_of(i)];
            slot = std::min(slot, depth[i]);
        }

    std::vector<int> visible;
    visible.reserve(n);
    for (int i = 0; i < n; ++i)
        if (front[i] && depth[i] <= cell_min[cell_of(i)] + kDepthTol) visible.push_back(i);
    if (visible.empty()) throw PreconditionError("no visible surface from this viewpoint");

    std::vector<int> chosen;
    chosen.reserve(target);
    if (static_cast<int>(visible.size()) >= target) {
        // Partial Fisher-Yates: the first `target` entries of a shuffle.
        for (int i = 0; i < target; ++i) {
            const auto j = rng.uniform_int(i, static_cast<std::int64_t>(visible.size()) - 1);
            std::swap(visible[i], visible[j]);
            chosen.push_back(visible[i]);
        }
    } else {
        chosen = visible;
        while (static_cast<int>(chosen.size()) < target)
            chosen.push_back(visible[static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<std::int64_t>(visible.size()) - 1))]);
        if (stats) stats->upsampled_frames += 1;
    }
    if (stats) stats->rendered_frames += 1;

    PointMatrix out(target, 3);
    for (int i = 0; i < target; ++i) out.row(i) = shape.pts.row(chosen[i]);
    return PointCloud(std::move(out));
}

// ---------------------------------------------------------------------------
// Sequences
// ---------------------------------------------------------------------------

PointCloud snap_to_float32(const PointCloud& cloud) {
    PointCloud out = cloud;
    for (int i = 0; i < out.size(); ++i)
        for (int c = 0; c < 3; ++c)
            out.pts(i, c) = static_cast<double>(static_cast<float>(out.pts(i, c)));
    return out;
}

void TrainingSequence::validate() const {
    if (frames.empty()) throw SizeError("sequence has no frames");
    if (gt_poses.size() != frames.size())
        throw SizeError("sequence has " + std::to_string(frames.size()) + " frames but " +
                        std::to_string(gt_poses.size()) + " poses");
    const int n = frames.front().size();
    if (n < 8 || n % 4 != 0)
        throw SizeError("frame size must be a multiple of 4 and at least 8, got " +
                        std::to_string(n));
    for (const auto& f : frames)
        if (f.size() != n) throw SizeError("frames differ in size");
    if (gt_complete.empty()) throw SizeError("sequence lacks a complete ground-truth cloud");
}

void rebuild_aligned_partials(TrainingSequence& seq) {
    seq.gt_aligned_partials.clear();
    seq.gt_aligned_partials.reserve(seq.frames.size());
    for (std::size_t k = 0; k < seq.frames.size(); ++k) {
        const PointCloud& frame = seq.frames[k];
        const PointCloud aligned = apply_pose(frame, seq.gt_poses[k].inverse());
        const std::vector<int> order =
            farthest_point_sample(frame, frame.size(), centroid_nearest_index(frame));
        const PointCloud full = aligned.gather(order);
        std::array<PointCloud, 3> res;
        res[0] = full;
        res[1] = full.prefix(frame.size() / 2);
        res[2] = full.prefix(frame.size() / 4);
        seq.gt_aligned_partials.push_back(std::move(res));
    }
}

TrainingSequence make_sequence(const SurfaceShape& shape, const std::string& shape_id,
                               int frames, const DisturbanceLimits& limits, Rng& rng,
                               int points, RenderStats* stats) {
    if (frames < 1) throw PreconditionError("sequence needs at least one frame");
    if (points < 8 || points % 4 != 0)
        throw PreconditionError("points per frame must be a multiple of 4 and at least 8");
    if (!limits.valid()) throw ConfigError("disturbance limits must be non-negative");
    if (shape.size() < points)
        throw PreconditionError("shape has fewer surface samples than requested points");

    TrainingSequence seq;
    seq.shape_id = shape_id;
    seq.category = shape.family;
    const std::vector<Vec3> views = fibonacci_viewpoints(frames, 2.0);
    for (int k = 0; k < frames; ++k) {
        const PointCloud rendered = render_partial(shape, views[k], rng, points, stats);
        const RigidPose pose = sample_disturbance(rng, limits);
        seq.frames.push_back(snap_to_float32(apply_pose(rendered, pose)));
        seq.gt_poses.push_back(pose);
    }

    // Uniform draw (without replacement) for the complete ground truth.
    std::vector<int> idx(static_cast<std::size_t>(shape.size()));
    std::iota(idx.begin(), idx.end(), 0);
    PointMatrix complete(points, 3);
    for (int i = 0; i < points; ++i) {
        const auto j = rng.uniform_int(i, static_cast<std::int64_t>(idx.size()) - 1);
        std::swap(idx[i], idx[j]);
        complete.row(i) = shape.pts.row(idx[i]);
    }
    seq.gt_complete = snap_to_float32(PointCloud(std::move(complete)));

    seq.validate();
    rebuild_aligned_partials(seq);
    return seq;
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

namespace {

std::string frame_file(int k) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "frame_%03d.pcb", k);
    return buf;
}

}  // namespace

void save_sequence(const std::filesystem::path& dir, const TrainingSequence& seq) {
    seq.validate();
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

    for (int k = 0; k < seq.frame_count(); ++k)
        write_point_cloud(dir / frame_file(k), seq.frames[static_cast<std::size_t>(k)]);
    write_point_cloud(dir / "gt_complete.pcb", seq.gt_complete);

    std::ofstream out(dir / "poses.txt");
    if (!out) throw IoError("cannot open for write: " + (dir / "poses.txt").string());
    out << "# one pose per frame: r00 r01 r02 r10 r11 r12 r20 r21 r22 tx ty tz\n";
    char buf[520];
    for (const auto& pose : seq.gt_poses) {
        const Mat3& r = pose.rotation;
        const Vec3& t = pose.translation;
        std::snprintf(buf, sizeof(buf),
                      "%.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g\n",
                      r(0, 0), r(0, 1), r(0, 2), r(1, 0), r(1, 1), r(1, 2), r(2, 0), r(2, 1),
                      r(2, 2), t(0), t(1), t(2));
        out << buf;
    }
    if (!out) throw IoError("poses: write failed: " + (dir / "poses.txt").string());
}

namespace {

std::vector<RigidPose> load_poses(const std::filesystem::path& path, int expected) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<RigidPose> poses;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        double vals[12];
        if (!(ls >> vals[0])) continue;  // blank
        for (int i = 1; i < 12; ++i)
            if (!(ls >> vals[i]))
                throw IoError(path.string() + ": malformed pose at line " +
                              std::to_string(lineno));
        RigidPose pose;
        pose.rotation << vals[0], vals[1], vals[2], vals[3], vals[4], vals[5], vals[6], vals[7],
            vals[8];
        pose.translation << vals[9], vals[10], vals[11];
        if (!pose.valid(1e-6))
            throw IoError(path.string() + ": not a rotation at line " + std::to_string(lineno));
        poses.push_back(pose);
    }
    if (static_cast<int>(poses.size()) != expected)
        throw IoError(path.string() + ": expected " + std::to_string(expected) + " poses, found " +
                      std::to_string(poses.size()));
    return poses;
}

}  // namespace

TrainingSequence load_sequence(const DatasetManifest& manifest, const std::string& shape_id) {
    const ManifestEntry& entry = manifest.entry(shape_id);
    const std::filesystem::path dir = manifest.shape_dir(shape_id);

    TrainingSequence seq;
    seq.shape_id = entry.id;
    seq.category = entry.category;
    for (int k = 0; k < entry.frames; ++k)
        seq.frames.push_back(read_point_cloud(dir / frame_file(k)));
    seq.gt_complete = read_point_cloud(dir / "gt_complete.pcb");
    seq.gt_poses = load_poses(dir / "poses.txt", entry.frames);
    seq.validate();
    rebuild_aligned_partials(seq);
    return seq;
}

// ---------------------------------------------------------------------------
// Manifests
// ---------------------------------------------------------------------------

const ManifestEntry& DatasetManifest::entry(const std::string& id) const {
    for (const auto& e : entries)
        if (e.id == id) return e;
    throw ConfigError("unknown shape id in manifest: " + id);
}

void save_manifest(const DatasetManifest& manifest) {
    std::error_code ec;
    std::filesystem::create_directories(manifest.root, ec);
    if (ec) throw IoError("cannot create " + manifest.root.string() + ": " + ec.message());
    const auto path = manifest.root / "manifest.txt";
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for write: " + path.string());
    out << "# dataset manifest\n";
    out << "version = " << manifest.version << "\n";
    out << "split = " << manifest.split << "\n";
    out << "seed = " << manifest.seed << "\n";
    out << "count = " << manifest.entries.size() << "\n";
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
        const auto& e = manifest.entries[i];
        const std::string p = "entry." + std::to_string(i) + ".";
        out << p << "id = " << e.id << "\n";
        out << p << "category = " << e.category << "\n";
        out << p << "frames = " << e.frames << "\n";
        out << p << "seed = " << e.seed << "\n";
    }
    if (!out) throw IoError("manifest: write failed: " + path.string());
}

namespace {

std::uint64_t parse_u64(const std::string& s, const std::string& what) {
    try {
        std::size_t used = 0;
        const unsigned long long v = std::stoull(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return static_cast<std::uint64_t>(v);
    } catch (const std::exception&) {
        throw IoError(what + ": not an unsigned integer: '" + s + "'");
    }
}

}  // namespace

DatasetManifest load_manifest(const std::filesystem::path& split_dir) {
    const auto path = split_dir / "manifest.txt";
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    const ConfigMap map = ConfigMap::parse(in);

    DatasetManifest manifest;
    manifest.root = split_dir;
    manifest.version = map.get_int("version", -1);
    if (manifest.version != 1)
        throw IoError(path.string() + ": unsupported manifest version " +
                      std::to_string(manifest.version));
    manifest.split = map.get_string("split", "");
    manifest.seed = parse_u64(map.get_string("seed", "0"), path.string() + ": seed");
    const int count = map.get_int("count", -1);
    if (count < 0) throw IoError(path.string() + ": missing entry count");
    for (int i = 0; i < count; ++i) {
        const std::string p = "entry." + std::to_string(i) + ".";
        ManifestEntry e;
        e.id = map.get_string(p + "id", "");
        e.category = map.get_string(p + "category", "");
        e.frames = map.get_int(p + "frames", 0);
        e.seed = parse_u64(map.get_string(p + "seed", "0"), path.string() + ": entry seed");
        if (e.id.empty() || e.frames < 1)
            throw IoError(path.string() + ": incomplete entry " + std::to_string(i));
        manifest.entries.push_back(std::move(e));
    }

    for (const auto& e : manifest.entries) {
        const auto dir = manifest.shape_dir(e.id);
        const auto require_file = [&](const std::filesystem::path& f) {
            if (!std::filesystem::exists(f))
                throw IoError("manifest references a missing file: " + f.string());
        };
        for (int k = 0; k < e.frames; ++k) require_file(dir / frame_file(k));
        require_file(dir / "gt_complete.pcb");
        require_file(dir / "poses.txt");
    }
    return manifest;
}

// ---------------------------------------------------------------------------
// Dataset generation
// ---------------------------------------------------------------------------

GenResult generate_dataset(const std::filesystem::path& root, const GenOptions& opt) {
    std::vector<std::string> families = opt.families;
    if (families.empty()) families = shape_families();
    for (const auto& f : families)
        if (std::find(shape_families().begin(), shape_families().end(), f) ==
            shape_families().end())
            throw ConfigError("unknown shape family: " + f);
    if (opt.frames < 1) throw ConfigError("frames must be >= 1");
    if (opt.points < 8 || opt.points % 4 != 0)
        throw ConfigError("points must be a multiple of 4 and at least 8");
    if (!opt.limits.valid()) throw ConfigError("disturbance limits must be non-negative");
    if (opt.train_per_family < 0 || opt.val_per_family < 0 || opt.test_per_family < 0)
        throw ConfigError("per-split shape counts must be non-negative");

    const std::array<std::pair<std::string, int>, 3> splits = {
        std::make_pair(std::string("train"), opt.train_per_family),
        std::make_pair(std::string("val"), opt.val_per_family),
        std::make_pair(std::string("test"), opt.test_per_family)};

    GenResult result;
    for (std::size_t split_idx = 0; split_idx < splits.size(); ++split_idx) {
        const auto& [split, per_family] = splits[split_idx];
        DatasetManifest manifest;
        manifest.split = split;
        manifest.seed = opt.seed;
        manifest.root = root / split;
        for (std::size_t f = 0; f < families.size(); ++f) {
            for (int s = 0; s < per_family; ++s) {
                const std::uint64_t shape_seed =
                    Rng::mix(opt.seed, split_idx * 1000003ull + f * 1009ull +
                                           static_cast<std::uint64_t>(s));
                char suffix[16];
                std::snprintf(suffix, sizeof(suffix), "-%03d", s);
                const std::string id = families[f] + suffix;

                Rng rng(shape_seed);
                const SurfaceShape shape = generate_shape(rng, families[f]);
                const TrainingSequence seq = make_sequence(shape, id, opt.frames, opt.limits,
                                                           rng, opt.points, &result.stats);
                save_sequence(manifest.shape_dir(id), seq);

                ManifestEntry entry;
                entry.id = id;
                entry.category = families[f];
                entry.frames = opt.frames;
                entry.seed = shape_seed;
                manifest.entries.push_back(std::move(entry));
            }
        }
        save_manifest(manifest);
        result.manifests.push_back(std::move(manifest));
    }
    return result;
}

}  // namespace tcomplete::data
