#include <benchmark/benchmark.h>

#include "vdm/pipeline.hpp"

using namespace vdm;

namespace {

RunConfig bench_config(PipelineKind kind) {
    RunConfig cfg = default_config();
    cfg.pipeline = kind;
    cfg.grid.shape = Shape3{8, 32, 32};
    cfg.scene_count = 2;
    cfg.seed = 7;
    return cfg;
}

} // namespace

static void BM_Voxelize(benchmark::State& state) {
    RunConfig cfg = bench_config(PipelineKind::vdm_ssm);
    cfg.scene.background_points = static_cast<std::int32_t>(state.range(0));
    const GridSpec grid = effective_grid(cfg);
    const std::vector<Scene> scenes = generate_scenes(cfg);
    for (auto _ : state) benchmark::DoNotOptimize(voxelize(scenes[0].points, grid));
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                            static_cast<std::int64_t>(scenes[0].points.size()));
}
BENCHMARK(BM_Voxelize)->Arg(1000)->Arg(10000)->Arg(100000);

static void BM_SsmScan(benchmark::State& state) {
    Rng rng(8);
    const SsmSpec spec = make_ssm_spec(16, 0.1, rng);
    std::vector<double> x(static_cast<std::size_t>(state.range(0)));
    for (double& v : x) v = rng.uniform(-1.0, 1.0);
    for (auto _ : state) benchmark::DoNotOptimize(ssm_scan(x, spec));
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                            state.range(0));
}
BENCHMARK(BM_SsmScan)->Arg(64)->Arg(1024)->Arg(16384);

static void BM_RunPipeline(benchmark::State& state) {
    const RunConfig cfg = bench_config(
        state.range(0) == 0 ? PipelineKind::vdm_ssm : PipelineKind::only_diffusion);
    const std::vector<Scene> scenes = generate_scenes(cfg);
    for (auto _ : state) benchmark::DoNotOptimize(run_pipeline(cfg, scenes, 1));
}
BENCHMARK(BM_RunPipeline)->Arg(0)->Arg(1);
