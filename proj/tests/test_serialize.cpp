#include <doctest.h>

#include <algorithm>

#include "oracles.hpp"
#include "vdm/errors.hpp"
#include "vdm/serialize.hpp"

using namespace vdm;

namespace {

SparseTensor tensor_from(std::vector<VoxelCoord> coords, const Shape3& shape) {
    Matrix f(coords.size(), 1);
    for (std::size_t i = 0; i < f.rows(); ++i) f.at(i, 0) = static_cast<double>(i);
    return SparseTensor::create(std::move(coords), std::move(f), shape);
}

} // namespace

TEST_CASE("serialize: x_major scan is plain lexicographic (iz, iy, ix)") {
    const SparseTensor t =
        tensor_from({{0, 0, 0}, {0, 0, 1}, {0, 1, 0}}, Shape3{2, 2, 2});
    const VoxelSequence seq = serialize(t, SerializeOrder::x_major, 2);
    const std::vector<VoxelCoord> scanned = {
        t.coords()[static_cast<std::size_t>(seq.indices[0])],
        t.coords()[static_cast<std::size_t>(seq.indices[1])],
        t.coords()[static_cast<std::size_t>(seq.indices[2])]};
    CHECK(scanned == std::vector<VoxelCoord>{{0, 0, 0}, {0, 0, 1}, {0, 1, 0}});
    CHECK(seq.groups == std::vector<std::pair<std::int32_t, std::int32_t>>{{0, 2},
                                                                           {2, 3}});
}

TEST_CASE("serialize: y_major swaps the y and x sort keys") {
    const SparseTensor t =
        tensor_from({{0, 0, 0}, {0, 0, 1}, {0, 1, 0}}, Shape3{2, 2, 2});
    const VoxelSequence seq = serialize(t, SerializeOrder::y_major, 8);
    const std::vector<VoxelCoord> scanned = {
        t.coords()[static_cast<std::size_t>(seq.indices[0])],
        t.coords()[static_cast<std::size_t>(seq.indices[1])],
        t.coords()[static_cast<std::size_t>(seq.indices[2])]};
    CHECK(scanned == std::vector<VoxelCoord>{{0, 0, 0}, {0, 1, 0}, {0, 0, 1}});
}

TEST_CASE("serialize: y_major ordering equals x_major of the axis-swapped tensor") {
    Rng rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        const Shape3 shape{3, 5, 4};
        const SparseTensor t = oracle::random_tensor(shape, 0.4, 1, rng);
        const VoxelSequence seq = serialize(t, SerializeOrder::y_major, 4);

        // Swap y and x axes, serialize x_major, swap back.
        std::vector<VoxelCoord> swapped;
        for (const VoxelCoord& c : t.coords())
            swapped.push_back(VoxelCoord{c.iz, c.ix, c.iy});
        Matrix f(swapped.size(), 1);
        for (std::size_t i = 0; i < f.rows(); ++i) f.at(i, 0) = static_cast<double>(i);
        const SparseTensor ts =
            SparseTensor::create(swapped, std::move(f), Shape3{shape.nz, shape.nx, shape.ny});
        const VoxelSequence xs = serialize(ts, SerializeOrder::x_major, 4);

        REQUIRE(seq.indices.size() == xs.indices.size());
        for (std::size_t j = 0; j < xs.indices.size(); ++j) {
            // xs position j holds swapped row xs.indices[j]; its original row
            // is stored in ts features.
            const auto orig = static_cast<std::int32_t>(
                ts.features().at(static_cast<std::size_t>(xs.indices[j]), 0));
            CHECK(seq.indices[j] == orig);
        }
    }
}

TEST_CASE("serialize/unserialize: identity round trip is bit-exact") {
    Rng rng(18);
    for (int trial = 0; trial < 10; ++trial) {
        const SparseTensor t = oracle::random_tensor({4, 4, 4}, 0.4, 3, rng);
        for (const SerializeOrder order :
             {SerializeOrder::x_major, SerializeOrder::y_major}) {
            const VoxelSequence seq = serialize(t, order, 5);
            Matrix gathered(seq.indices.size(), t.channels());
            for (std::size_t j = 0; j < seq.indices.size(); ++j) {
                auto src = t.features().row(static_cast<std::size_t>(seq.indices[j]));
                auto dst = gathered.row(j);
                std::copy(src.begin(), src.end(), dst.begin());
            }
            const SparseTensor back = unserialize(seq, gathered, t);
            CHECK(back == t);
        }
    }
}

TEST_CASE("unserialize: scatters arbitrary features to the original rows") {
    Rng rng(19);
    const SparseTensor t = oracle::random_tensor({3, 4, 4}, 0.5, 2, rng);
    const VoxelSequence seq = serialize(t, SerializeOrder::y_major, 3);

    Matrix seq_features(seq.indices.size(), 2);
    for (double& v : seq_features.data()) v = rng.uniform(-1.0, 1.0);
    const SparseTensor out = unserialize(seq, seq_features, t);

    // Explicit index scatter oracle.
    for (std::size_t j = 0; j < seq.indices.size(); ++j) {
        const auto row = static_cast<std::size_t>(seq.indices[j]);
        CHECK(out.features().at(row, 0) == seq_features.at(j, 0));
        CHECK(out.features().at(row, 1) == seq_features.at(j, 1));
    }
    CHECK(out.coords() == t.coords());
    CHECK(out.shape() == t.shape());
}

TEST_CASE("unserialize: zero features keep coords, zero the values") {
    Rng rng(20);
    const SparseTensor t = oracle::random_tensor({3, 3, 3}, 0.5, 2, rng);
    const VoxelSequence seq = serialize(t, SerializeOrder::x_major, 4);
    const SparseTensor out = unserialize(seq, Matrix(seq.indices.size(), 2), t);
    CHECK(out.coords() == t.coords());
    for (double v : out.features().data()) CHECK(v == 0.0);
}

TEST_CASE("serialize: group count and sizes") {
    Rng rng(22);
    for (int trial = 0; trial < 8; ++trial) {
        const SparseTensor t = oracle::random_tensor({4, 4, 4}, 0.5, 1, rng);
        const auto group_size = static_cast<std::int32_t>(1 + rng.uniform_index(7));
        const VoxelSequence seq = serialize(t, SerializeOrder::x_major, group_size);
        const std::size_t expect =
            (t.num_active() + static_cast<std::size_t>(group_size) - 1) /
            static_cast<std::size_t>(group_size);
        CHECK(seq.groups.size() == expect);
        for (std::size_t g = 0; g + 1 < seq.groups.size(); ++g)
            CHECK(seq.groups[g].second - seq.groups[g].first == group_size);

        // indices is a true permutation.
        std::vector<std::int32_t> sorted = seq.indices;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 0; i < sorted.size(); ++i)
            CHECK(sorted[i] == static_cast<std::int32_t>(i));
    }
}

TEST_CASE("serialize: empty tensor and bad arguments") {
    const SparseTensor empty =
        SparseTensor::from_sorted({}, Matrix(0, 2), Shape3{2, 2, 2});
    const VoxelSequence seq = serialize(empty, SerializeOrder::x_major, 4);
    CHECK(seq.indices.empty());
    CHECK(seq.groups.empty());
    CHECK_THROWS_AS(serialize(empty, SerializeOrder::x_major, 0), ConfigError);

    CHECK_THROWS_AS(unserialize(seq, Matrix(3, 2), empty), DimensionError);
}
