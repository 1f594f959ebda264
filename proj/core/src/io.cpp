#include "tcomplete/io.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "tcomplete/errors.hpp"

namespace tcomplete {

namespace {

// The on-disk payload is float32; files written on any little-endian host
// are interchangeable. Big-endian hosts are out of scope for this tool.
static_assert(sizeof(float) == 4, "PCB1 requires 4-byte float");

void put_u32_le(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32_le(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw IoError("PCB1: truncated header");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

PointCloud read_xyz(std::istream& in) {
    std::vector<double> coords;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        double x, y, z;
        if (ls >> x) {
            if (!(ls >> y >> z)) {
                throw IoError("XYZ: malformed point at line " + std::to_string(lineno));
            }
            coords.push_back(x);
            coords.push_back(y);
            coords.push_back(z);
        }
    }
    const int n = static_cast<int>(coords.size() / 3);
    PointMatrix pts(n, 3);
    for (int i = 0; i < n; ++i)
        pts.row(i) << coords[3 * i], coords[3 * i + 1], coords[3 * i + 2];
    return PointCloud(std::move(pts));
}

void write_xyz(std::ostream& out, const PointCloud& cloud) {
    out << "# XYZ point cloud, " << cloud.size() << " points\n";
    char buf[96];
    for (int i = 0; i < cloud.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.9g %.9g %.9g\n", cloud.pts(i, 0), cloud.pts(i, 1),
                      cloud.pts(i, 2));
        out << buf;
    }
    if (!out) throw IoError("XYZ: write failed");
}

PointCloud read_pcb(std::istream& in) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "PCB1", 4) != 0) throw IoError("PCB1: bad magic");
    const std::uint32_t n = get_u32_le(in);
    std::vector<float> raw(static_cast<std::size_t>(n) * 3);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size() * 4));
    if (!in) throw IoError("PCB1: truncated payload (expected " + std::to_string(n) + " points)");
    PointMatrix pts(static_cast<int>(n), 3);
    for (std::uint32_t i = 0; i < n; ++i)
        pts.row(i) << raw[3 * i], raw[3 * i + 1], raw[3 * i + 2];
    return PointCloud(std::move(pts));
}

void write_pcb(std::ostream& out, const PointCloud& cloud) {
    out.write("PCB1", 4);
    put_u32_le(out, static_cast<std::uint32_t>(cloud.size()));
    std::vector<float> raw(static_cast<std::size_t>(cloud.size()) * 3);
    for (int i = 0; i < cloud.size(); ++i) {
        raw[3 * i] = static_cast<float>(cloud.pts(i, 0));
        raw[3 * i + 1] = static_cast<float>(cloud.pts(i, 1));
        raw[3 * i + 2] = static_cast<float>(cloud.pts(i, 2));
    }
    out.write(reinterpret_cast<const char*>(raw.data()),
              static_cast<std::streamsize>(raw.size() * 4));
    if (!out) throw IoError("PCB1: write failed");
}

PointCloud read_point_cloud(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        if (path.extension() == ".xyz") return read_xyz(in);
        if (path.extension() == ".pcb") return read_pcb(in);
    } catch (const IoError& e) {
        throw IoError(path.string() + ": " + e.what());
    }
    throw IoError("unknown point cloud extension: " + path.string());
}

void write_point_cloud(const std::filesystem::path& path, const PointCloud& cloud) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for write: " + path.string());
    if (path.extension() == ".xyz") {
        write_xyz(out, cloud);
    } else if (path.extension() == ".pcb") {
        write_pcb(out, cloud);
    } else {
        throw IoError("unknown point cloud extension: " + path.string());
    }
}

namespace bin {

namespace {

// Refuse to allocate for sizes no sane file of ours contains; a corrupt
// length prefix must fail cleanly instead of exhausting memory.
constexpr std::uint32_t kMaxStringLen = 1u << 24;
constexpr std::size_t kMaxMatrixElems = std::size_t{1} << 28;

void read_exact(std::istream& in, char* buf, std::streamsize n, const char* what) {
    in.read(buf, n);
    if (!in) throw IoError(std::string(what) + ": truncated");
}

}  // namespace

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 4);
}

void write_i64(std::ostream& out, std::int64_t v) {
    const auto u = static_cast<std::uint64_t>(v);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((u >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 8);
}

void write_f64(std::ostream& out, double v) {
    static_assert(sizeof(double) == 8, "binary format requires 8-byte double");
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    write_i64(out, static_cast<std::int64_t>(bits));
}

void write_string(std::ostream& out, const std::string& s) {
    if (s.size() > kMaxStringLen) throw IoError("string field too long to serialize");
    write_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void write_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
    write_u32(out, static_cast<std::uint32_t>(m.rows()));
    write_u32(out, static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) write_f64(out, m(r, c));
}

std::uint32_t read_u32(std::istream& in, const char* what) {
    unsigned char b[4];
    read_exact(in, reinterpret_cast<char*>(b), 4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

std::int64_t read_i64(std::istream& in, const char* what) {
    unsigned char b[8];
    read_exact(in, reinterpret_cast<char*>(b), 8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return static_cast<std::int64_t>(v);
}

double read_f64(std::istream& in, const char* what) {
    const auto bits = static_cast<std::uint64_t>(read_i64(in, what));
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

std::string read_string(std::istream& in, const char* what) {
    const std::uint32_t n = read_u32(in, what);
    if (n > kMaxStringLen) throw IoError(std::string(what) + ": implausible string length");
    std::string s(n, '\0');
    if (n > 0) read_exact(in, s.data(), static_cast<std::streamsize>(n), what);
    return s;
}

Eigen::MatrixXd read_matrix(std::istream& in, const char* what) {
    const std::uint32_t rows = read_u32(in, what);
    const std::uint32_t cols = read_u32(in, what);
    const std::size_t elems = static_cast<std::size_t>(rows) * cols;
    if (elems > kMaxMatrixElems) throw IoError(std::string(what) + ": implausible matrix size");
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = read_f64(in, what);
    return m;
}

}  // namespace bin

}  // namespace tcomplete
