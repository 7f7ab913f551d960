#include "vdm/voxel_grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <unordered_map>

#include "vdm/errors.hpp"

namespace vdm {

void validate_grid(const GridSpec& grid) {
    if (grid.voxel_size_x <= 0.0 || grid.voxel_size_y <= 0.0 || grid.voxel_size_z <= 0.0)
        throw ConfigError("grid: voxel sizes must be positive");
    if (grid.shape.nz < 1 || grid.shape.ny < 1 || grid.shape.nx < 1)
        throw ConfigError("grid: shape extents must be >= 1");
}

namespace {

bool in_bounds(const VoxelCoord& c, const Shape3& s) {
    return c.iz >= 0 && c.iz < s.nz && c.iy >= 0 && c.iy < s.ny && c.ix >= 0 &&
           c.ix < s.nx;
}

} // namespace

SparseTensor SparseTensor::create(std::vector<VoxelCoord> coords, Matrix features,
                                  Shape3 shape) {
    if (coords.size() != features.rows())
        throw DimensionError("SparseTensor: " + std::to_string(features.rows()) +
                             " feature rows for " + std::to_string(coords.size()) +
                             " coords");
    const std::size_t n = coords.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return coords[a] < coords[b];
    });

    std::vector<VoxelCoord> sorted_coords(n);
    Matrix sorted_features(n, features.cols());
    for (std::size_t i = 0; i < n; ++i) {
        sorted_coords[i] = coords[order[i]];
        auto src = features.row(order[i]);
        auto dst = sorted_features.row(i);
        std::copy(src.begin(), src.end(), dst.begin());
    }
    return from_sorted(std::move(sorted_coords), std::move(sorted_features), shape);
}

SparseTensor SparseTensor::from_sorted(std::vector<VoxelCoord> coords, Matrix features,
                                       Shape3 shape) {
    if (coords.size() != features.rows())
        throw DimensionError("SparseTensor: feature row count mismatch");
    for (std::size_t i = 0; i < coords.size(); ++i) {
        if (!in_bounds(coords[i], shape))
            throw InputError("SparseTensor: coord out of shape bounds");
        if (i > 0 && !(coords[i - 1] < coords[i]))
            throw InputError("SparseTensor: coords not strictly increasing");
    }
    SparseTensor t;
    t.coords_ = std::move(coords);
    t.features_ = std::move(features);
    t.shape_ = shape;
    return t;
}

SparseTensor SparseTensor::with_features(Matrix features) const {
    if (features.rows() != coords_.size())
        throw DimensionError("with_features: row count mismatch");
    SparseTensor t;
    t.coords_ = coords_;
    t.features_ = std::move(features);
    t.shape_ = shape_;
    return t;
}

VoxelizeResult voxelize(std::span<const Point> points, const GridSpec& grid,
                        Reduction reduction) {
    validate_grid(grid);
    (void)reduction; // mean is the only rule

    const std::size_t feature_len = points.empty() ? 0 : points.front().feature.size();
    for (const Point& p : points) {
        if (p.feature.size() != feature_len)
            throw DimensionError("voxelize: points carry different feature lengths");
        if (feature_len == 0)
            throw DimensionError("voxelize: points need at least one feature");
    }

    // Bucket in-bounds points by cell.
    std::unordered_map<std::int64_t, std::vector<std::size_t>> cells;
    cells.reserve(points.size());
    std::size_t dropped = 0;
    const Shape3 s = grid.shape;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const Point& p = points[i];
        const auto ix = static_cast<std::int64_t>(
            std::floor((p.x - grid.origin_x) / grid.voxel_size_x));
        const auto iy = static_cast<std::int64_t>(
            std::floor((p.y - grid.origin_y) / grid.voxel_size_y));
        const auto iz = static_cast<std::int64_t>(
            std::floor((p.z - grid.origin_z) / grid.voxel_size_z));
        if (ix < 0 || ix >= s.nx || iy < 0 || iy >= s.ny || iz < 0 || iz >= s.nz) {
            ++dropped;
            continue;
        }
        const std::int64_t lin = (iz * s.ny + iy) * s.nx + ix;
        cells[lin].push_back(i);
    }
    if (cells.empty())
        throw InputError("voxelize: no point lands inside the grid bounds");

    std::vector<std::int64_t> lins;
    lins.reserve(cells.size());
    for (const auto& [lin, members] : cells) lins.push_back(lin);
    std::sort(lins.begin(), lins.end());

    // Members are summed in value-sorted order, never input order, so the
    // result is bit-identical under any permutation of the input list.
    auto point_less = [&](std::size_t a, std::size_t b) {
        const Point& pa = points[a];
        const Point& pb = points[b];
        if (pa.x != pb.x) return pa.x < pb.x;
        if (pa.y != pb.y) return pa.y < pb.y;
        if (pa.z != pb.z) return pa.z < pb.z;
        return std::lexicographical_compare(pa.feature.begin(), pa.feature.end(),
                                            pb.feature.begin(), pb.feature.end());
    };

    std::vector<VoxelCoord> coords;
    coords.reserve(lins.size());
    Matrix features(lins.size(), feature_len);
    for (std::size_t row = 0; row < lins.size(); ++row) {
        const std::int64_t lin = lins[row];
        coords.push_back(VoxelCoord{
            static_cast<std::int32_t>(lin / (std::int64_t{s.ny} * s.nx)),
            static_cast<std::int32_t>((lin / s.nx) % s.ny),
            static_cast<std::int32_t>(lin % s.nx)});
        auto& members = cells[lin];
        std::sort(members.begin(), members.end(), point_less);
        auto dst = features.row(row);
        for (std::size_t m : members)
            for (std::size_t c = 0; c < feature_len; ++c)
                dst[c] += points[m].feature[c];
        const double inv = 1.0 / static_cast<double>(members.size());
        for (std::size_t c = 0; c < feature_len; ++c) dst[c] *= inv;
    }

    VoxelizeResult out;
    out.tensor = SparseTensor::from_sorted(std::move(coords), std::move(features),
                                           grid.shape);
    out.dropped = dropped;
    return out;
}

std::vector<double> densify(const SparseTensor& t) {
    const Shape3 s = t.shape();
    const std::size_t channels = t.channels();
    std::vector<double> dense(static_cast<std::size_t>(s.cells()) * channels, 0.0);
    for (std::size_t i = 0; i < t.num_active(); ++i) {
        const std::size_t base =
            static_cast<std::size_t>(t.linear_index(t.coords()[i])) * channels;
        auto row = t.features().row(i);
        std::copy(row.begin(), row.end(), dense.begin() + base);
    }
    return dense;
}

GridSpec refine_grid(const GridSpec& grid, int factor_xy) {
    if (factor_xy < 1)
        throw ConfigError("refine_grid: factor must be >= 1");
    GridSpec fine = grid;
    fine.voxel_size_x = grid.voxel_size_x / factor_xy;
    fine.voxel_size_y = grid.voxel_size_y / factor_xy;
    fine.shape.nx = grid.shape.nx * factor_xy;
    fine.shape.ny = grid.shape.ny * factor_xy;
    return fine;
}

} // namespace vdm
