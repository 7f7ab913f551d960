#pragma once

#include <cstdint>
#include <vector>

#include "vdm/matrix.hpp"
#include "vdm/rng.hpp"
#include "vdm/voxel_grid.hpp"

namespace vdm {

enum class ConvMode {
    submanifold, // output active set == input active set, no dilation
    regular      // output active set is the stride-mapped kernel dilation
};

/// Per-axis integer triple in (z, y, x) order.
struct Triple {
    std::int32_t z = 1;
    std::int32_t y = 1;
    std::int32_t x = 1;

    friend bool operator==(const Triple&, const Triple&) = default;
};

// One sparse convolution layer. Weights are stored offset-major row-major:
// w[(k * in_channels + ci) * out_channels + co] for kernel offset k in z-major
// enumeration order; the dense oracle indexes with the same rule.
struct ConvSpec {
    Triple kernel{3, 3, 3};   // odd positive extents
    Triple stride{1, 1, 1};
    Triple padding{0, 0, 0};
    ConvMode mode = ConvMode::submanifold;
    std::int32_t in_channels = 1;
    std::int32_t out_channels = 1;
    std::vector<double> weights; // kernel_volume * in_channels * out_channels
    std::vector<double> bias;    // out_channels

    std::int64_t kernel_volume() const {
        return std::int64_t{kernel.z} * kernel.y * kernel.x;
    }
    std::size_t weight_index(std::int64_t k, std::int32_t ci, std::int32_t co) const {
        return static_cast<std::size_t>((k * in_channels + ci) * out_channels + co);
    }
};

/// Submanifold spec: kernel k, stride 1, padding (k-1)/2, zero-initialized.
ConvSpec make_submanifold_spec(Triple kernel, std::int32_t in_channels,
                               std::int32_t out_channels);

/// Regular spec with explicit stride/padding, zero-initialized.
ConvSpec make_regular_spec(Triple kernel, Triple stride, Triple padding,
                           std::int32_t in_channels, std::int32_t out_channels);

/// Fills weights uniformly in +-1/sqrt(fan_in) with fan_in = kernel_volume *
/// in_channels; bias stays zero.
void init_weights(ConvSpec& spec, Rng& rng);

/// Throws ConfigError if the spec violates its invariants (even kernel,
/// non-positive stride, submanifold with stride != 1 or off-center padding,
/// weight/bias storage of the wrong size).
void validate_conv_spec(const ConvSpec& spec);

// Gather-scatter plan for one (input, spec) pair: per kernel offset, the list
// of (input_row, output_row) pairs, plus the output active set. For a fixed
// offset each input row and each output row appears at most once, so per-offset
// scatter is collision-free, and offsets are always applied in enumeration
// order, which makes every pass deterministic.
struct Rulebook {
    struct Pair {
        std::int32_t in_row;
        std::int32_t out_row;

        friend bool operator==(const Pair&, const Pair&) = default;
    };
    std::vector<std::vector<Pair>> pairs; // indexed by kernel offset
    std::vector<VoxelCoord> out_coords;   // canonical-sorted
    Shape3 out_shape;
};

/// Output spatial shape: per axis floor((in + 2*pad - kernel) / stride) + 1;
/// submanifold mode returns the input shape unchanged. Throws ConfigError if
/// an extent would be non-positive.
Shape3 out_shape(const Shape3& in_shape, const ConvSpec& spec);

/// Compiles the gather-scatter plan. Empty input yields an empty rulebook.
Rulebook build_rulebook(const SparseTensor& in, const ConvSpec& spec);

/// out[o] = bias + sum over offsets k and pairs (i -> o) of in[i] * W[k].
/// Contributions accumulate in (offset, input-channel) order.
SparseTensor conv_forward(const SparseTensor& in, const ConvSpec& spec,
                          const Rulebook& rb);

/// build_rulebook + conv_forward in one call.
SparseTensor conv(const SparseTensor& in, const ConvSpec& spec);

struct ConvGrads {
    Matrix input;                // num_active_in x in_channels
    std::vector<double> weights; // same layout as ConvSpec::weights
    std::vector<double> bias;    // out_channels
};

/// Exact transpose of conv_forward's linear map.
ConvGrads conv_backward(const SparseTensor& in, const ConvSpec& spec,
                        const Rulebook& rb, const Matrix& grad_out);

struct DiffusionCount {
    std::size_t before = 0; // active voxels in
    std::size_t after = 0;  // active voxels out
};

/// Active-voxel counts before/after one regular sparse convolution.
DiffusionCount diffusion_count(const SparseTensor& in, const ConvSpec& spec);

} // namespace vdm
