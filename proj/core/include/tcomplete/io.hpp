#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "tcomplete/geom.hpp"

namespace tcomplete {

// Two interchangeable point-cloud file formats:
//  - ASCII "XYZ": one point per line, three decimal floats separated by
//    whitespace; '#' starts a comment; blank lines ignored.
//  - binary "PCB1": magic bytes "PCB1", uint32 count, count*3 float32,
//    all little-endian. Binary round-trips are bit-exact.
// Extension selects the format: .xyz -> ASCII, .pcb -> binary.

PointCloud read_xyz(std::istream& in);
void write_xyz(std::ostream& out, const PointCloud& cloud);

PointCloud read_pcb(std::istream& in);
void write_pcb(std::ostream& out, const PointCloud& cloud);

PointCloud read_point_cloud(const std::filesystem::path& path);
void write_point_cloud(const std::filesystem::path& path, const PointCloud& cloud);

// Little-endian primitives shared by the binary container formats
// (checkpoints, session state). Doubles are stored as raw IEEE-754 bits, so
// write/read round-trips are bit-exact. Readers throw IoError on truncation
// or implausible sizes; `what` names the field for the error message.
namespace bin {

void write_u32(std::ostream& out, std::uint32_t v);
void write_i64(std::ostream& out, std::int64_t v);
void write_f64(std::ostream& out, double v);
void write_string(std::ostream& out, const std::string& s);
void write_matrix(std::ostream& out, const Eigen::MatrixXd& m);

std::uint32_t read_u32(std::istream& in, const char* what);
std::int64_t read_i64(std::istream& in, const char* what);
double read_f64(std::istream& in, const char* what);
std::string read_string(std::istream& in, const char* what);
Eigen::MatrixXd read_matrix(std::istream& in, const char* what);

}  // namespace bin

}  // namespace tcomplete
