#pragma once

#include <string>
#include <vector>

#include "vdm/blocks.hpp"
#include "vdm/config.hpp"
#include "vdm/scene.hpp"
#include "vdm/seq_core.hpp"
#include "vdm/stats.hpp"

namespace vdm {

/// Grid the pipeline voxelizes on: the config grid refined by refine_factor
/// in full mode, or coarsened by od_voxel_scale in x/y for only-diffusion.
GridSpec effective_grid(const RunConfig& cfg);

/// All seeded model state for one run: the diffusion stack plus the sequence
/// operators sized to its output width.
struct PipelineModel {
    VdmSpec vdm;
    std::vector<SsmSpec> ssm; // one per output channel
    AttentionSpec attn;
    std::int32_t out_channels = 0;
};

/// Deterministic model construction from cfg.seed (optionally loading conv
/// weights from cfg.weights_dir).
PipelineModel build_model(const RunConfig& cfg);

/// Grid the stage output lives on: voxel sizes scaled by the stride product
/// of the stack's trailing convolutions, shape taken from the output tensor.
GridSpec stage_output_grid(const GridSpec& in_grid, const VdmSpec& spec,
                           const Shape3& out_shape);

/// The diffusion stack as a stats-compatible stage closure.
PipelineStage make_vdm_stage(const PipelineModel& model);

/// Scenes 0..scene_count-1, scene i generated from Rng(cfg.seed).split(i).
std::vector<Scene> generate_scenes(const RunConfig& cfg);

struct SceneOutput {
    SparseTensor output; // tensor after the sequence blocks
    FrameCounts counts;
    std::size_t dropped_points = 0;
};

struct RunResult {
    std::vector<SceneOutput> scenes;
    DiffusionReport report;
};

/// voxelize -> diffusion stack -> serialize/sequence-block/unserialize per
/// direction. `threads` only controls scene-level parallelism; results are
/// identical for any thread count. Errors carry the failing scene index.
RunResult run_pipeline(const RunConfig& cfg, const std::vector<Scene>& scenes,
                       int threads = 1);

/// Byte-deterministic JSON for a whole run (excludes thread count on purpose).
std::string run_result_to_json(const RunConfig& cfg, const RunResult& result);

/// FNV-1a over coords and feature bytes; changes iff the tensor changes.
std::uint64_t tensor_digest(const SparseTensor& t);

// Central-finite-difference validation of every analytic parameter gradient
// on small fixed instances (single convs, a residual stage, the full stack,
// and the only-diffusion stack).
struct GradCheckEntry {
    std::string name; // subject/param-block
    double max_rel_err = 0.0;
    std::string worst_param; // e.g. "stage1.subm.w[17]"
    std::size_t count = 0;   // scalars checked
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double worst = 0.0;
    std::string worst_name;
    std::size_t params_checked = 0;

    bool pass(double tolerance) const { return worst <= tolerance; }
};

/// Runs all gradient-check subjects with FD step 1e-5; deterministic in
/// cfg.seed. `tolerance` only affects the pass verdict, not the sweep.
GradCheckReport gradcheck(const RunConfig& cfg, double tolerance);

std::string gradcheck_to_json(const GradCheckReport& report, double tolerance);

/// Writes one weight blob per conv layer (plus the lift as a 1x1x1 conv) and
/// a manifest listing layer names in execution order.
void dump_weights(const VdmSpec& spec, const std::string& dir);

/// Loads blobs written by dump_weights back into a structurally equal spec.
void load_weights(VdmSpec& spec, const std::string& dir);

} // namespace vdm
