#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vdm/scene.hpp"
#include "vdm/voxel_grid.hpp"

namespace vdm {

enum class PipelineKind { vdm_ssm, vdm_attn, only_diffusion };

std::string to_string(PipelineKind kind);
PipelineKind pipeline_kind_from_string(const std::string& s);

// Run configuration, stored on disk as flat `key = value` lines with dotted
// section keys (e.g. `grid.voxel_size = 0.1,0.1,0.25`), `#` comments allowed.
struct RunConfig {
    GridSpec grid;      // dataset-resolution grid (full mode voxelizes on it)
    PipelineKind pipeline = PipelineKind::vdm_ssm;
    std::uint64_t seed = 0;
    std::string out_dir = "out";

    std::vector<std::int32_t> channel_plan = {64, 32, 64, 128};
    std::int32_t z_stride = 1;       // z stride of the two downsampling convs
    std::int32_t refine_factor = 1;  // extra x/y partitioning before full mode
    std::int32_t od_voxel_scale = 4; // x/y voxel-size multiplier in OD mode
    std::string weights_dir;         // optional: load layer blobs instead of seeding

    std::int32_t group_size = 64;
    std::int32_t seq_blocks = 2;    // one sequence block per direction
    char serialize_order = 'x';     // first scan direction; alternates x, y, ...
    std::int32_t d_k = 16;       // attention head width
    std::int32_t ssm_state_dim = 4;
    double ssm_delta = 0.1;

    std::int32_t scene_count = 4;
    SceneParams scene;

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Named presets carrying the per-dataset voxel sizes and the channel plan:
/// waymo, nuscenes, argoverse2, once.
void apply_preset(RunConfig& cfg, const std::string& name);

RunConfig default_config();

/// Parses config text; unknown keys are errors. Starts from default_config().
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

/// Canonical rendering; parse_config(save_config(c)) == c.
std::string save_config(const RunConfig& cfg);

/// Cross-field validation (grid validity, positive sizes, plan length >= 2).
void validate_config(const RunConfig& cfg);

} // namespace vdm
