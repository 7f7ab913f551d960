#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "vdm/voxel_grid.hpp"

namespace vdm {

/// Oriented 3D box: center in meters, size (length, width, height) along the
/// box frame's (x, y, z), yaw about the z axis.
struct Box3D {
    double cx = 0.0, cy = 0.0, cz = 0.0;
    double length = 0.0, width = 0.0, height = 0.0;
    double yaw = 0.0;
};

void validate_box(const Box3D& box);

/// True iff the point, rotated into the box's yaw frame, lies within the
/// half-extents (boundaries inclusive).
bool point_in_box(double x, double y, double z, const Box3D& box);

/// True iff the voxel's center lies inside some box.
bool is_foreground(const VoxelCoord& coord, const GridSpec& grid,
                   const std::vector<Box3D>& boxes);

/// Number of active voxels whose centers lie inside some box.
std::uint64_t count_foreground(const SparseTensor& t, const GridSpec& grid,
                               const std::vector<Box3D>& boxes);

/// Per-frame mean voxel counts before/after a pipeline stage.
struct DiffusionReport {
    std::size_t frames = 0;
    double overall_before = 0.0;
    double overall_after = 0.0;
    double foreground_before = 0.0;
    double foreground_after = 0.0;
    std::string stage; // human-readable stage description
};

/// Raw per-frame counts backing a report.
struct FrameCounts {
    std::uint64_t overall_before = 0;
    std::uint64_t overall_after = 0;
    std::uint64_t foreground_before = 0;
    std::uint64_t foreground_after = 0;
};

struct StageResult {
    SparseTensor tensor;
    GridSpec grid; // grid the output lives on (voxel sizes scaled by stride)
};

/// A pipeline stage as seen by the counter: input tensor and its grid in,
/// output tensor and its effective grid out.
using PipelineStage =
    std::function<StageResult(const SparseTensor&, const GridSpec&)>;

struct Frame {
    SparseTensor tensor;
    std::vector<Box3D> boxes;
};

/// Counts overall/foreground voxels per frame before and after `stage`, then
/// averages: total voxels across all frames divided by the number of frames.
/// Throws InputError on an empty frame list. When `per_frame` is non-null the
/// raw counts are appended to it in frame order.
DiffusionReport report(const std::vector<Frame>& frames, const GridSpec& grid,
                       const PipelineStage& stage, const std::string& stage_label,
                       std::vector<FrameCounts>* per_frame = nullptr);

/// The averaging step alone: totals across frames divided by the frame count,
/// accumulated in frame order. Throws InputError on an empty list.
DiffusionReport summarize(const std::vector<FrameCounts>& per_frame,
                          const std::string& stage_label);

/// JSON rendering of a report (stable key order, byte-deterministic).
std::string report_to_json(const DiffusionReport& report);

/// Two-row plain-text table in the overall/foreground column layout.
std::string render_table(const DiffusionReport& report,
                         const std::string& before_label,
                         const std::string& after_label);

/// Binary PGM (P5) z-slice of a tensor: foreground actives at 255, background
/// actives at 128, empty cells 0. `iz` must be within the tensor's shape.
std::string slice_to_pgm(const SparseTensor& t, const GridSpec& grid,
                         const std::vector<Box3D>& boxes, std::int32_t iz);

} // namespace vdm
