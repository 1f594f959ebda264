#include <cstdio>
#include <filesystem>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "tcomplete/errors.hpp"
#include "tcomplete/io.hpp"

using namespace tcomplete;
using tcomplete::testing::random_cloud;

namespace {

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("tcomplete_io_test_" + std::to_string(::getpid()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_SUITE_BEGIN("io");

TEST_CASE("xyz parses comments and blank lines") {
    std::istringstream in(
        "# header comment\n"
        "\n"
        "0.5 -1.25 3.0  # trailing note\n"
        "1 2 3\n");
    const PointCloud cloud = read_xyz(in);
    REQUIRE(cloud.size() == 2);
    CHECK(cloud.point(0) == Vec3(0.5, -1.25, 3.0));
    CHECK(cloud.point(1) == Vec3(1, 2, 3));
}

TEST_CASE("xyz rejects malformed rows") {
    std::istringstream in("0.5 1.0\n");
    CHECK_THROWS_AS(read_xyz(in), IoError);
}

TEST_CASE("xyz write/read round-trips values") {
    Rng rng(3);
    const PointCloud cloud = random_cloud(rng, 17);
    std::stringstream buffer;
    write_xyz(buffer, cloud);
    const PointCloud back = read_xyz(buffer);
    REQUIRE(back.size() == cloud.size());
    // %.9g keeps more digits than float32; round-trip well below 1e-7.
    CHECK((back.pts - cloud.pts).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("pcb round-trips bit-exactly") {
    Rng rng(5);
    PointCloud cloud = random_cloud(rng, 33);
    // Snap to float32 first: the container stores float32 payloads.
    cloud.pts = cloud.pts.cast<float>().cast<double>();

    std::stringstream buffer;
    write_pcb(buffer, cloud);
    const std::string first = buffer.str();
    const PointCloud back = read_pcb(buffer);
    CHECK((back.pts - cloud.pts).cwiseAbs().maxCoeff() == 0.0);

    std::stringstream again;
    write_pcb(again, back);
    CHECK(again.str() == first);
}

TEST_CASE("pcb rejects bad magic and truncation") {
    std::istringstream bad_magic("QCB1\x01\x00\x00\x00");
    CHECK_THROWS_AS(read_pcb(bad_magic), IoError);

    Rng rng(7);
    PointCloud cloud = random_cloud(rng, 4);
    std::stringstream buffer;
    write_pcb(buffer, cloud);
    std::string bytes = buffer.str();
    bytes.resize(bytes.size() - 5);
    std::istringstream truncated(bytes);
    CHECK_THROWS_AS(read_pcb(truncated), IoError);
}

TEST_CASE("file dispatch by extension") {
    TempDir dir;
    Rng rng(9);
    PointCloud cloud = random_cloud(rng, 12);
    cloud.pts = cloud.pts.cast<float>().cast<double>();

    const auto xyz_path = dir.path / "cloud.xyz";
    const auto pcb_path = dir.path / "cloud.pcb";
    write_point_cloud(xyz_path, cloud);
    write_point_cloud(pcb_path, cloud);
    CHECK((read_point_cloud(pcb_path).pts - cloud.pts).cwiseAbs().maxCoeff() == 0.0);
    CHECK((read_point_cloud(xyz_path).pts - cloud.pts).cwiseAbs().maxCoeff() < 1e-8);

    CHECK_THROWS_AS(write_point_cloud(dir.path / "cloud.ply", cloud), IoError);
    CHECK_THROWS_AS(read_point_cloud(dir.path / "missing.xyz"), IoError);
}

TEST_SUITE_END();
