#include <benchmark/benchmark.h>

#include "vdm/blocks.hpp"
#include "vdm/rng.hpp"
#include "vdm/sparse_conv.hpp"
#include "vdm/voxel_grid.hpp"

using namespace vdm;

namespace {

SparseTensor random_tensor(const Shape3& shape, double density, std::size_t channels,
                           std::uint64_t seed) {
    Rng rng(seed);
    std::vector<VoxelCoord> coords;
    for (std::int32_t z = 0; z < shape.nz; ++z)
        for (std::int32_t y = 0; y < shape.ny; ++y)
            for (std::int32_t x = 0; x < shape.nx; ++x)
                if (rng.next_double() < density) coords.push_back({z, y, x});
    Matrix features(coords.size(), channels);
    for (double& v : features.data()) v = rng.uniform(-1.0, 1.0);
    return SparseTensor::from_sorted(std::move(coords), std::move(features), shape);
}

} // namespace

static void BM_BuildRulebookSubmanifold(benchmark::State& state) {
    const auto ext = static_cast<std::int32_t>(state.range(0));
    const SparseTensor in = random_tensor({8, ext, ext}, 0.05, 16, 1);
    const ConvSpec spec = make_submanifold_spec({3, 3, 3}, 16, 16);
    for (auto _ : state) benchmark::DoNotOptimize(build_rulebook(in, spec));
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                            static_cast<std::int64_t>(in.num_active()));
}
BENCHMARK(BM_BuildRulebookSubmanifold)->Arg(32)->Arg(64)->Arg(128);

static void BM_BuildRulebookRegular(benchmark::State& state) {
    const auto ext = static_cast<std::int32_t>(state.range(0));
    const SparseTensor in = random_tensor({8, ext, ext}, 0.05, 16, 2);
    const ConvSpec spec = make_regular_spec({3, 3, 3}, {1, 2, 2}, {1, 1, 1}, 16, 16);
    for (auto _ : state) benchmark::DoNotOptimize(build_rulebook(in, spec));
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                            static_cast<std::int64_t>(in.num_active()));
}
BENCHMARK(BM_BuildRulebookRegular)->Arg(32)->Arg(64)->Arg(128);

static void BM_ConvForward(benchmark::State& state) {
    const auto channels = static_cast<std::int32_t>(state.range(0));
    const SparseTensor in = random_tensor(
        {8, 64, 64}, 0.05, static_cast<std::size_t>(channels), 3);
    ConvSpec spec =
        make_regular_spec({3, 3, 3}, {1, 1, 1}, {1, 1, 1}, channels, channels);
    Rng rng(4);
    init_weights(spec, rng);
    const Rulebook rb = build_rulebook(in, spec);
    for (auto _ : state) benchmark::DoNotOptimize(conv_forward(in, spec, rb));
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                            static_cast<std::int64_t>(rb.out_coords.size()));
}
BENCHMARK(BM_ConvForward)->Arg(16)->Arg(32)->Arg(64);

static void BM_VdmForward(benchmark::State& state) {
    const SparseTensor in = random_tensor({8, 64, 64}, 0.03, 1, 5);
    VdmSpec spec = make_vdm_spec(1, {64, 32, 64, 128}, 1, false);
    Rng rng(6);
    init_vdm_params(spec, rng);
    for (auto _ : state) benchmark::DoNotOptimize(vdm_forward(in, spec));
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                            static_cast<std::int64_t>(in.num_active()));
}
BENCHMARK(BM_VdmForward);

BENCHMARK_MAIN();
