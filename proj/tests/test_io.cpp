#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "vdm/errors.hpp"
#include "vdm/io.hpp"
#include "vdm/serialize.hpp"

using namespace vdm;

namespace {

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& name) : path(name) {
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

} // namespace

TEST_CASE("points CSV: write/read round trip preserves values exactly") {
    TempDir dir("test_io_points");
    std::vector<Point> points;
    Rng rng(1);
    for (int i = 0; i < 20; ++i) {
        Point p;
        p.x = rng.uniform(-10.0, 10.0);
        p.y = rng.uniform(-10.0, 10.0);
        p.z = rng.uniform(-2.0, 2.0);
        p.feature = {rng.next_double(), rng.uniform(-5.0, 5.0)};
        points.push_back(std::move(p));
    }
    const std::string path = dir.file("points.csv");
    write_points_csv(path, points);
    const std::vector<Point> back = read_points_csv(path);
    REQUIRE(back.size() == points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        CHECK(back[i].x == points[i].x);
        CHECK(back[i].y == points[i].y);
        CHECK(back[i].z == points[i].z);
        CHECK(back[i].feature == points[i].feature);
    }
}

TEST_CASE("points CSV: header is optional and detected by a non-numeric field") {
    TempDir dir("test_io_header");
    const std::string with_header = dir.file("a.csv");
    write_text_file(with_header, "x,y,z,f0\n1,2,3,4\n");
    const std::string without = dir.file("b.csv");
    write_text_file(without, "1,2,3,4\n");
    CHECK(read_points_csv(with_header).size() == 1);
    CHECK(read_points_csv(without).size() == 1);
    CHECK(read_points_csv(without)[0].feature == std::vector<double>{4.0});
}

TEST_CASE("points CSV: malformed rows raise IoError") {
    TempDir dir("test_io_bad");
    const std::string missing_feature = dir.file("a.csv");
    write_text_file(missing_feature, "1,2,3\n");
    CHECK_THROWS_AS(read_points_csv(missing_feature), IoError);

    const std::string ragged = dir.file("b.csv");
    write_text_file(ragged, "1,2,3,4\n1,2,3,4,5\n");
    CHECK_THROWS_AS(read_points_csv(ragged), IoError);

    const std::string garbage = dir.file("c.csv");
    write_text_file(garbage, "1,2,3,4\n1,zzz,3,4\n");
    CHECK_THROWS_AS(read_points_csv(garbage), IoError);

    CHECK_THROWS_AS(read_points_csv(dir.file("missing.csv")), IoError);
}

TEST_CASE("boxes CSV: round trip") {
    TempDir dir("test_io_boxes");
    const std::vector<Box3D> boxes = {{1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 0.7},
                                      {-1.5, 0.25, 0.0, 2.0, 1.0, 0.5, -2.2}};
    const std::string path = dir.file("boxes.csv");
    write_boxes_csv(path, boxes);
    const std::vector<Box3D> back = read_boxes_csv(path);
    REQUIRE(back.size() == 2);
    CHECK(back[1].cx == -1.5);
    CHECK(back[1].yaw == -2.2);
    CHECK(back[0].length == 4.0);
}

TEST_CASE("sequence CSV: one line per position with row/coord/group columns") {
    TempDir dir("test_io_seq");
    Rng rng(2);
    const SparseTensor t = oracle::random_tensor({2, 3, 3}, 0.6, 1, rng);
    const VoxelSequence seq = serialize(t, SerializeOrder::y_major, 2);
    const std::string path = dir.file("seq.csv");
    write_sequence_csv(path, seq, t);

    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "row_index,iz,iy,ix,group");
    std::size_t rows = 0;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    CHECK(rows == seq.indices.size());
}

TEST_CASE("voxels CSV: header carries one column per channel") {
    TempDir dir("test_io_vox");
    Rng rng(3);
    const SparseTensor t = oracle::random_tensor({2, 2, 2}, 0.9, 3, rng);
    const std::string path = dir.file("voxels.csv");
    write_voxels_csv(path, t);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "iz,iy,ix,f0,f1,f2");
}
