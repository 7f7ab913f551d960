#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vdm/matrix.hpp"

namespace vdm {

/// One raw point: position in meters plus a feature vector (length >= 1).
struct Point {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    std::vector<double> feature;
};

// Integer grid index. The (iz, iy, ix) z-major convention is fixed repo-wide:
// canonical order, linear indices, serialization and kernel offsets all use it.
struct VoxelCoord {
    std::int32_t iz = 0;
    std::int32_t iy = 0;
    std::int32_t ix = 0;

    friend bool operator==(const VoxelCoord&, const VoxelCoord&) = default;
    friend auto operator<=>(const VoxelCoord&, const VoxelCoord&) = default;
};

/// Voxel counts per axis, (nz, ny, nx).
struct Shape3 {
    std::int32_t nz = 0;
    std::int32_t ny = 0;
    std::int32_t nx = 0;

    std::int64_t cells() const {
        return std::int64_t{nz} * ny * nx;
    }
    friend bool operator==(const Shape3&, const Shape3&) = default;
};

/// Physical description of a voxel grid: origin corner, voxel edge lengths,
/// and voxel counts.
struct GridSpec {
    double origin_x = 0.0;
    double origin_y = 0.0;
    double origin_z = 0.0;
    double voxel_size_x = 1.0; // meters per voxel
    double voxel_size_y = 1.0;
    double voxel_size_z = 1.0;
    Shape3 shape;

    /// Center of the voxel at `c`, in meters.
    void voxel_center(const VoxelCoord& c, double& x, double& y, double& z) const {
        x = origin_x + (c.ix + 0.5) * voxel_size_x;
        y = origin_y + (c.iy + 0.5) * voxel_size_y;
        z = origin_z + (c.iz + 0.5) * voxel_size_z;
    }

    friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// Throws ConfigError unless all voxel sizes are > 0 and all shape axes >= 1.
void validate_grid(const GridSpec& grid);

// Sparse voxel tensor: active coordinates plus one feature row per active
// site. Invariants (enforced by the factories): coords are unique, in bounds,
// and stored in canonical order (lexicographic by (iz, iy, ix)), so tensors
// built from the same (coord, feature) multiset are bit-comparable.
class SparseTensor {
public:
    SparseTensor() = default;

    /// Builds a tensor from possibly unsorted (coords, features) rows.
    /// Sorts into canonical order; throws InputError on duplicates or
    /// out-of-bounds coords, DimensionError on row-count mismatch.
    static SparseTensor create(std::vector<VoxelCoord> coords, Matrix features,
                               Shape3 shape);

    /// Same as create() but requires rows already canonical-sorted and unique;
    /// cheaper, used by kernels whose output order is canonical by construction.
    static SparseTensor from_sorted(std::vector<VoxelCoord> coords, Matrix features,
                                    Shape3 shape);

    /// Active sites in canonical order.
    const std::vector<VoxelCoord>& coords() const { return coords_; }
    /// num_active x channels feature rows, aligned with coords().
    const Matrix& features() const { return features_; }
    Matrix& mutable_features() { return features_; }
    const Shape3& shape() const { return shape_; }

    std::size_t num_active() const { return coords_.size(); }
    std::size_t channels() const { return features_.cols(); }

    /// Linear (z-major) index of a coordinate under this tensor's shape.
    std::int64_t linear_index(const VoxelCoord& c) const {
        return (std::int64_t{c.iz} * shape_.ny + c.iy) * shape_.nx + c.ix;
    }

    /// Replaces the feature matrix; row count must match the active set.
    SparseTensor with_features(Matrix features) const;

    friend bool operator==(const SparseTensor&, const SparseTensor&) = default;

private:
    std::vector<VoxelCoord> coords_;
    Matrix features_;
    Shape3 shape_;
};

enum class Reduction { mean };

struct VoxelizeResult {
    SparseTensor tensor;
    std::size_t dropped = 0; // points outside the grid bounds
};

/// Voxelizes a point cloud: one active voxel per occupied cell, voxel feature
/// equal to the mean of the member point features. Out-of-bounds points are
/// dropped and tallied. Throws InputError if no point lands in bounds and
/// DimensionError if feature lengths differ.
VoxelizeResult voxelize(std::span<const Point> points, const GridSpec& grid,
                        Reduction reduction = Reduction::mean);

/// Dense (nz * ny * nx * channels) copy, zero off the active set.
/// Layout is z-major with channels innermost.
std::vector<double> densify(const SparseTensor& t);

/// Divides the x and y voxel sizes by `factor_xy` and multiplies the x and y
/// shape extents by the same factor; z axis and origin are unchanged.
GridSpec refine_grid(const GridSpec& grid, int factor_xy);

} // namespace vdm
