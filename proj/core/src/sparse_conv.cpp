#include "vdm/sparse_conv.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>

#include "vdm/errors.hpp"

namespace vdm {

ConvSpec make_submanifold_spec(Triple kernel, std::int32_t in_channels,
                               std::int32_t out_channels) {
    ConvSpec spec;
    spec.kernel = kernel;
    spec.stride = {1, 1, 1};
    spec.padding = {(kernel.z - 1) / 2, (kernel.y - 1) / 2, (kernel.x - 1) / 2};
    spec.mode = ConvMode::submanifold;
    spec.in_channels = in_channels;
    spec.out_channels = out_channels;
    spec.weights.assign(static_cast<std::size_t>(spec.kernel_volume()) * in_channels *
                            out_channels,
                        0.0);
    spec.bias.assign(static_cast<std::size_t>(out_channels), 0.0);
    return spec;
}

ConvSpec make_regular_spec(Triple kernel, Triple stride, Triple padding,
                           std::int32_t in_channels, std::int32_t out_channels) {
    ConvSpec spec;
    spec.kernel = kernel;
    spec.stride = stride;
    spec.padding = padding;
    spec.mode = ConvMode::regular;
    spec.in_channels = in_channels;
    spec.out_channels = out_channels;
    spec.weights.assign(static_cast<std::size_t>(spec.kernel_volume()) * in_channels *
                            out_channels,
                        0.0);
    spec.bias.assign(static_cast<std::size_t>(out_channels), 0.0);
    return spec;
}

void init_weights(ConvSpec& spec, Rng& rng) {
    const double fan_in =
        static_cast<double>(spec.kernel_volume()) * spec.in_channels;
    const double bound = 1.0 / std::sqrt(fan_in);
    for (double& w : spec.weights) w = rng.uniform(-bound, bound);
    std::fill(spec.bias.begin(), spec.bias.end(), 0.0);
}

void validate_conv_spec(const ConvSpec& spec) {
    auto odd_positive = [](std::int32_t k) { return k >= 1 && k % 2 == 1; };
    if (!odd_positive(spec.kernel.z) || !odd_positive(spec.kernel.y) ||
        !odd_positive(spec.kernel.x))
        throw ConfigError("conv: kernel extents must be odd and positive");
    if (spec.stride.z < 1 || spec.stride.y < 1 || spec.stride.x < 1)
        throw ConfigError("conv: stride components must be positive");
    if (spec.padding.z < 0 || spec.padding.y < 0 || spec.padding.x < 0)
        throw ConfigError("conv: padding components must be non-negative");
    if (spec.in_channels < 1 || spec.out_channels < 1)
        throw ConfigError("conv: channel counts must be positive");
    if (spec.mode == ConvMode::submanifold) {
        if (spec.stride != Triple{1, 1, 1})
            throw ConfigError("conv: submanifold mode requires stride 1");
        const Triple center{(spec.kernel.z - 1) / 2, (spec.kernel.y - 1) / 2,
                            (spec.kernel.x - 1) / 2};
        if (spec.padding != center)
            throw ConfigError("conv: submanifold mode requires padding (k-1)/2");
    }
    const auto expect_w = static_cast<std::size_t>(spec.kernel_volume()) *
                          spec.in_channels * spec.out_channels;
    if (spec.weights.size() != expect_w)
        throw ConfigError("conv: weight storage size " +
                          std::to_string(spec.weights.size()) + " != " +
                          std::to_string(expect_w));
    if (spec.bias.size() != static_cast<std::size_t>(spec.out_channels))
        throw ConfigError("conv: bias storage size mismatch");
}

Shape3 out_shape(const Shape3& in_shape, const ConvSpec& spec) {
    validate_conv_spec(spec);
    if (spec.mode == ConvMode::submanifold) return in_shape;
    auto one = [](std::int32_t in, std::int32_t k, std::int32_t s, std::int32_t p) {
        const std::int32_t span = in + 2 * p - k;
        if (span < 0)
            throw ConfigError("conv: output extent would be non-positive");
        return span / s + 1;
    };
    return Shape3{one(in_shape.nz, spec.kernel.z, spec.stride.z, spec.padding.z),
                  one(in_shape.ny, spec.kernel.y, spec.stride.y, spec.padding.y),
                  one(in_shape.nx, spec.kernel.x, spec.stride.x, spec.padding.x)};
}

namespace {

std::int64_t linear(const VoxelCoord& c, const Shape3& s) {
    return (std::int64_t{c.iz} * s.ny + c.iy) * s.nx + c.ix;
}

VoxelCoord from_linear(std::int64_t lin, const Shape3& s) {
    return VoxelCoord{static_cast<std::int32_t>(lin / (std::int64_t{s.ny} * s.nx)),
                      static_cast<std::int32_t>((lin / s.nx) % s.ny),
                      static_cast<std::int32_t>(lin % s.nx)};
}

std::unordered_map<std::int64_t, std::int32_t> index_coords(
    const std::vector<VoxelCoord>& coords, const Shape3& shape) {
    std::unordered_map<std::int64_t, std::int32_t> map;
    map.reserve(coords.size() * 2);
    for (std::size_t i = 0; i < coords.size(); ++i)
        map.emplace(linear(coords[i], shape), static_cast<std::int32_t>(i));
    return map;
}

// Kernel offsets enumerate z-major: k = (kz * ky_extent + ky) * kx_extent + kx.
struct OffsetIter {
    Triple kernel;
    template <typename Fn>
    void for_each(Fn&& fn) const {
        std::int64_t k = 0;
        for (std::int32_t dz = 0; dz < kernel.z; ++dz)
            for (std::int32_t dy = 0; dy < kernel.y; ++dy)
                for (std::int32_t dx = 0; dx < kernel.x; ++dx, ++k)
                    fn(k, dz, dy, dx);
    }
};

} // namespace

Rulebook build_rulebook(const SparseTensor& in, const ConvSpec& spec) {
    validate_conv_spec(spec);
    if (static_cast<std::size_t>(spec.in_channels) != in.channels())
        throw DimensionError("build_rulebook: spec expects " +
                             std::to_string(spec.in_channels) + " channels, tensor has " +
                             std::to_string(in.channels()));

    Rulebook rb;
    rb.pairs.assign(static_cast<std::size_t>(spec.kernel_volume()), {});
    rb.out_shape = out_shape(in.shape(), spec);

    const Shape3 in_shape = in.shape();
    const auto in_map = index_coords(in.coords(), in_shape);
    const OffsetIter offsets{spec.kernel};

    if (spec.mode == ConvMode::submanifold) {
        rb.out_coords = in.coords();
        const Triple center{(spec.kernel.z - 1) / 2, (spec.kernel.y - 1) / 2,
                            (spec.kernel.x - 1) / 2};
        for (std::size_t o = 0; o < rb.out_coords.size(); ++o) {
            const VoxelCoord& oc = rb.out_coords[o];
            offsets.for_each([&](std::int64_t k, std::int32_t dz, std::int32_t dy,
                                 std::int32_t dx) {
                const VoxelCoord nc{oc.iz - center.z + dz, oc.iy - center.y + dy,
                                    oc.ix - center.x + dx};
                if (nc.iz < 0 || nc.iz >= in_shape.nz || nc.iy < 0 ||
                    nc.iy >= in_shape.ny || nc.ix < 0 || nc.ix >= in_shape.nx)
                    return;
                auto it = in_map.find(linear(nc, in_shape));
                if (it == in_map.end()) return;
                rb.pairs[static_cast<std::size_t>(k)].push_back(
                    {it->second, static_cast<std::int32_t>(o)});
            });
        }
        return rb;
    }

    // Regular mode, pass 1: dilate the input active set into output space.
    // Output o receives input position o*stride - padding + offset, so from the
    // input side o = (pos + padding - offset) / stride when divisible.
    std::vector<std::int64_t> out_lins;
    {
        std::unordered_map<std::int64_t, char> seen;
        seen.reserve(in.num_active() * 8);
        for (const VoxelCoord& ic : in.coords()) {
            offsets.for_each([&](std::int64_t, std::int32_t dz, std::int32_t dy,
                                 std::int32_t dx) {
                const std::int32_t oz_num = ic.iz + spec.padding.z - dz;
                const std::int32_t oy_num = ic.iy + spec.padding.y - dy;
                const std::int32_t ox_num = ic.ix + spec.padding.x - dx;
                if (oz_num < 0 || oy_num < 0 || ox_num < 0) return;
                if (oz_num % spec.stride.z || oy_num % spec.stride.y ||
                    ox_num % spec.stride.x)
                    return;
                const VoxelCoord oc{oz_num / spec.stride.z, oy_num / spec.stride.y,
                                    ox_num / spec.stride.x};
                if (oc.iz >= rb.out_shape.nz || oc.iy >= rb.out_shape.ny ||
                    oc.ix >= rb.out_shape.nx)
                    return;
                seen.emplace(linear(oc, rb.out_shape), 1);
            });
        }
        out_lins.reserve(seen.size());
        for (const auto& [lin, _] : seen) out_lins.push_back(lin);
        std::sort(out_lins.begin(), out_lins.end());
    }

    rb.out_coords.reserve(out_lins.size());
    for (std::int64_t lin : out_lins)
        rb.out_coords.push_back(from_linear(lin, rb.out_shape));

    // Pass 2: enumerate pairs from the canonical-sorted output side.
    for (std::size_t o = 0; o < rb.out_coords.size(); ++o) {
        const VoxelCoord& oc = rb.out_coords[o];
        offsets.for_each([&](std::int64_t k, std::int32_t dz, std::int32_t dy,
                             std::int32_t dx) {
            const VoxelCoord ic{oc.iz * spec.stride.z - spec.padding.z + dz,
                                oc.iy * spec.stride.y - spec.padding.y + dy,
                                oc.ix * spec.stride.x - spec.padding.x + dx};
            if (ic.iz < 0 || ic.iz >= in_shape.nz || ic.iy < 0 ||
                ic.iy >= in_shape.ny || ic.ix < 0 || ic.ix >= in_shape.nx)
                return;
            auto it = in_map.find(linear(ic, in_shape));
            if (it == in_map.end()) return;
            rb.pairs[static_cast<std::size_t>(k)].push_back(
                {it->second, static_cast<std::int32_t>(o)});
        });
    }
    return rb;
}

SparseTensor conv_forward(const SparseTensor& in, const ConvSpec& spec,
                          const Rulebook& rb) {
    if (static_cast<std::size_t>(spec.in_channels) != in.channels())
        throw DimensionError("conv_forward: channel mismatch");

    const std::size_t n_out = rb.out_coords.size();
    Matrix out(n_out, static_cast<std::size_t>(spec.out_channels));
    for (std::size_t o = 0; o < n_out; ++o) {
        auto row = out.row(o);
        for (std::int32_t co = 0; co < spec.out_channels; ++co)
            row[static_cast<std::size_t>(co)] = spec.bias[static_cast<std::size_t>(co)];
    }

    const Matrix& fin = in.features();
    for (std::size_t k = 0; k < rb.pairs.size(); ++k) {
        for (const Rulebook::Pair& p : rb.pairs[k]) {
            auto src = fin.row(static_cast<std::size_t>(p.in_row));
            auto dst = out.row(static_cast<std::size_t>(p.out_row));
            for (std::int32_t ci = 0; ci < spec.in_channels; ++ci) {
                const double v = src[static_cast<std::size_t>(ci)];
                const double* w =
                    spec.weights.data() + spec.weight_index(static_cast<std::int64_t>(k),
                                                            ci, 0);
                for (std::int32_t co = 0; co < spec.out_channels; ++co)
                    dst[static_cast<std::size_t>(co)] += v * w[co];
            }
        }
    }
    return SparseTensor::from_sorted(rb.out_coords, std::move(out), rb.out_shape);
}

SparseTensor conv(const SparseTensor& in, const ConvSpec& spec) {
    return conv_forward(in, spec, build_rulebook(in, spec));
}

ConvGrads conv_backward(const SparseTensor& in, const ConvSpec& spec,
                        const Rulebook& rb, const Matrix& grad_out) {
    if (grad_out.rows() != rb.out_coords.size())
        throw DimensionError("conv_backward: grad_out rows != output active count");
    if (grad_out.cols() != static_cast<std::size_t>(spec.out_channels))
        throw DimensionError("conv_backward: grad_out channel mismatch");

    ConvGrads g;
    g.input = Matrix(in.num_active(), static_cast<std::size_t>(spec.in_channels));
    g.weights.assign(spec.weights.size(), 0.0);
    g.bias.assign(spec.bias.size(), 0.0);

    for (std::size_t o = 0; o < grad_out.rows(); ++o) {
        auto row = grad_out.row(o);
        for (std::int32_t co = 0; co < spec.out_channels; ++co)
            g.bias[static_cast<std::size_t>(co)] += row[static_cast<std::size_t>(co)];
    }

    const Matrix& fin = in.features();
    for (std::size_t k = 0; k < rb.pairs.size(); ++k) {
        for (const Rulebook::Pair& p : rb.pairs[k]) {
            auto gout = grad_out.row(static_cast<std::size_t>(p.out_row));
            auto src = fin.row(static_cast<std::size_t>(p.in_row));
            auto gin = g.input.row(static_cast<std::size_t>(p.in_row));
            for (std::int32_t ci = 0; ci < spec.in_channels; ++ci) {
                const double* w =
                    spec.weights.data() + spec.weight_index(static_cast<std::int64_t>(k),
                                                            ci, 0);
                double* gw =
                    g.weights.data() + spec.weight_index(static_cast<std::int64_t>(k),
                                                         ci, 0);
                const double x = src[static_cast<std::size_t>(ci)];
                double acc = 0.0;
                for (std::int32_t co = 0; co < spec.out_channels; ++co) {
                    const double go = gout[static_cast<std::size_t>(co)];
                    gw[co] += x * go;
                    acc += go * w[co];
                }
                gin[static_cast<std::size_t>(ci)] += acc;
            }
        }
    }
    return g;
}

DiffusionCount diffusion_count(const SparseTensor& in, const ConvSpec& spec) {
    if (spec.mode != ConvMode::regular)
        throw ConfigError("diffusion_count: spec must be a regular convolution");
    DiffusionCount c;
    c.before = in.num_active();
    c.after = build_rulebook(in, spec).out_coords.size();
    return c;
}

} // namespace vdm
