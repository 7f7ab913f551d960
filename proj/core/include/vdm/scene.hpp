#pragma once

#include <cstdint>
#include <vector>

#include "vdm/stats.hpp"
#include "vdm/voxel_grid.hpp"

namespace vdm {

/// Synthetic stand-in for one dataset frame: a point cloud plus ground-truth
/// boxes. Regenerating with the same seed and parameters reproduces the scene
/// bit-identically.
struct Scene {
    std::vector<Point> points;
    std::vector<Box3D> boxes;
    std::uint64_t seed = 0;
};

struct SceneParams {
    std::int32_t box_count = 3;
    std::int32_t points_per_box = 40;
    std::int32_t background_points = 200;
    std::int32_t feature_dim = 1;
    // Box size ranges in meters, (length, width, height).
    double box_size_min[3] = {2.0, 2.0, 1.0};
    double box_size_max[3] = {5.0, 5.0, 2.0};

    friend bool operator==(const SceneParams&, const SceneParams&) = default;
};

/// Places `box_count` boxes uniformly inside the grid extent with random yaw,
/// samples `points_per_box` points inside each box and `background_points`
/// outside every box. Throws GenerationError when placement or background
/// rejection sampling fails after bounded retries.
Scene gen_scene(const SceneParams& params, const GridSpec& grid, std::uint64_t seed);

} // namespace vdm
