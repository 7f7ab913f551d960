#include "vdm/serialize.hpp"

#include <algorithm>
#include <numeric>

#include "vdm/errors.hpp"

namespace vdm {

VoxelSequence serialize(const SparseTensor& t, SerializeOrder order,
                        std::int32_t group_size) {
    if (group_size < 1) throw ConfigError("serialize: group_size must be >= 1");

    VoxelSequence seq;
    seq.order = order;
    seq.group_size = group_size;

    const auto n = static_cast<std::int32_t>(t.num_active());
    seq.indices.resize(static_cast<std::size_t>(n));
    std::iota(seq.indices.begin(), seq.indices.end(), 0);

    // Coords are already canonical (iz, iy, ix), which is exactly x_major;
    // y_major re-sorts with the y and x keys swapped. Coords are unique so
    // ties cannot occur.
    if (order == SerializeOrder::y_major) {
        const auto& coords = t.coords();
        std::sort(seq.indices.begin(), seq.indices.end(),
                  [&](std::int32_t a, std::int32_t b) {
                      const VoxelCoord& ca = coords[static_cast<std::size_t>(a)];
                      const VoxelCoord& cb = coords[static_cast<std::size_t>(b)];
                      if (ca.iz != cb.iz) return ca.iz < cb.iz;
                      if (ca.ix != cb.ix) return ca.ix < cb.ix;
                      return ca.iy < cb.iy;
                  });
    }

    for (std::int32_t begin = 0; begin < n; begin += group_size)
        seq.groups.emplace_back(begin, std::min(begin + group_size, n));
    return seq;
}

SparseTensor unserialize(const VoxelSequence& seq, const Matrix& features,
                         const SparseTensor& t) {
    if (features.rows() != seq.indices.size())
        throw DimensionError("unserialize: feature rows != sequence length");

    Matrix scattered(t.num_active(), features.cols());
    for (std::size_t j = 0; j < seq.indices.size(); ++j) {
        auto src = features.row(j);
        auto dst = scattered.row(static_cast<std::size_t>(seq.indices[j]));
        std::copy(src.begin(), src.end(), dst.begin());
    }
    return t.with_features(std::move(scattered));
}

} // namespace vdm
