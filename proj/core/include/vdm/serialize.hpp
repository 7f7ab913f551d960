#pragma once

#include <cstdint>
#include <vector>

#include "vdm/voxel_grid.hpp"

namespace vdm {

enum class SerializeOrder {
    x_major, // scan by (iz, iy, ix): x varies fastest
    y_major  // scan by (iz, ix, iy): y varies fastest
};

// Flattening of a sparse tensor's active set into a 1D scan order, partitioned
// into fixed-size groups for sequence models. `indices` is a permutation of
// the active rows; position j of the sequence reads tensor row indices[j].
struct VoxelSequence {
    SerializeOrder order = SerializeOrder::x_major;
    std::vector<std::int32_t> indices;
    std::int32_t group_size = 1;
    std::vector<std::pair<std::int32_t, std::int32_t>> groups; // [begin, end)
};

/// Orders the active set along the requested scan direction and slices it into
/// consecutive groups; every group except possibly the last has exactly
/// group_size members. Empty tensors yield empty sequences.
VoxelSequence serialize(const SparseTensor& t, SerializeOrder order,
                        std::int32_t group_size);

/// Scatters sequence-ordered feature rows back onto the tensor's active rows;
/// coords and shape are kept, channel count may change. Throws DimensionError
/// if the row count differs from the sequence length.
SparseTensor unserialize(const VoxelSequence& seq, const Matrix& features,
                         const SparseTensor& t);

} // namespace vdm
