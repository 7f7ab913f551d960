#include "vdm/scene.hpp"

#include <cmath>
#include <numbers>

#include "vdm/errors.hpp"
#include "vdm/rng.hpp"

namespace vdm {

namespace {

constexpr int kMaxRetries = 100;

} // namespace

Scene gen_scene(const SceneParams& params, const GridSpec& grid, std::uint64_t seed) {
    validate_grid(grid);
    if (params.box_count < 0 || params.points_per_box < 0 ||
        params.background_points < 0)
        throw ConfigError("gen_scene: counts must be non-negative");
    if (params.feature_dim < 1)
        throw ConfigError("gen_scene: feature_dim must be >= 1");

    const double x0 = grid.origin_x;
    const double y0 = grid.origin_y;
    const double z0 = grid.origin_z;
    const double x1 = x0 + grid.voxel_size_x * grid.shape.nx;
    const double y1 = y0 + grid.voxel_size_y * grid.shape.ny;
    const double z1 = z0 + grid.voxel_size_z * grid.shape.nz;

    Scene scene;
    scene.seed = seed;
    Rng rng(seed);

    // Boxes first, then their points, then background points: the draw order
    // is part of the reproducibility contract.
    for (std::int32_t b = 0; b < params.box_count; ++b) {
        bool placed = false;
        for (int attempt = 0; attempt < kMaxRetries && !placed; ++attempt) {
            Box3D box;
            box.length = rng.uniform(params.box_size_min[0], params.box_size_max[0]);
            box.width = rng.uniform(params.box_size_min[1], params.box_size_max[1]);
            box.height = rng.uniform(params.box_size_min[2], params.box_size_max[2]);
            box.yaw = rng.uniform(0.0, 2.0 * std::numbers::pi);
            // Keep the whole rotated footprint inside the grid extent.
            const double r = 0.5 * std::hypot(box.length, box.width);
            if (x0 + r > x1 - r || y0 + r > y1 - r ||
                z0 + box.height / 2 > z1 - box.height / 2)
                continue;
            box.cx = rng.uniform(x0 + r, x1 - r);
            box.cy = rng.uniform(y0 + r, y1 - r);
            box.cz = rng.uniform(z0 + box.height / 2, z1 - box.height / 2);
            scene.boxes.push_back(box);
            placed = true;
        }
        if (!placed)
            throw GenerationError("gen_scene: cannot place a box inside the grid");
    }

    auto random_feature = [&] {
        std::vector<double> f(static_cast<std::size_t>(params.feature_dim));
        for (double& v : f) v = rng.next_double();
        return f;
    };

    for (const Box3D& box : scene.boxes) {
        const double cs = std::cos(box.yaw);
        const double sn = std::sin(box.yaw);
        for (std::int32_t i = 0; i < params.points_per_box; ++i) {
            const double lx = rng.uniform(-0.5 * box.length, 0.5 * box.length);
            const double ly = rng.uniform(-0.5 * box.width, 0.5 * box.width);
            const double lz = rng.uniform(-0.5 * box.height, 0.5 * box.height);
            Point p;
            p.x = box.cx + cs * lx - sn * ly;
            p.y = box.cy + sn * lx + cs * ly;
            p.z = box.cz + lz;
            p.feature = random_feature();
            scene.points.push_back(std::move(p));
        }
    }

    for (std::int32_t i = 0; i < params.background_points; ++i) {
        bool sampled = false;
        for (int attempt = 0; attempt < kMaxRetries && !sampled; ++attempt) {
            Point p;
            p.x = rng.uniform(x0, x1);
            p.y = rng.uniform(y0, y1);
            p.z = rng.uniform(z0, z1);
            bool inside = false;
            for (const Box3D& box : scene.boxes)
                if (point_in_box(p.x, p.y, p.z, box)) {
                    inside = true;
                    break;
                }
            if (inside) continue;
            p.feature = random_feature();
            scene.points.push_back(std::move(p));
            sampled = true;
        }
        if (!sampled)
            throw GenerationError("gen_scene: cannot sample a background point");
    }
    return scene;
}

} // namespace vdm
