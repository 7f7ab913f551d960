#pragma once

#include <string>
#include <vector>

#include "vdm/scene.hpp"
#include "vdm/serialize.hpp"
#include "vdm/voxel_grid.hpp"

namespace vdm {

// Point cloud CSV: one point per row, `x,y,z,f0[,f1,...]`. A header row is
// optional and detected by a non-numeric first field.
std::vector<Point> read_points_csv(const std::string& path);
void write_points_csv(const std::string& path, const std::vector<Point>& points);

/// Box CSV: `cx,cy,cz,length,width,height,yaw` with a header row.
void write_boxes_csv(const std::string& path, const std::vector<Box3D>& boxes);
std::vector<Box3D> read_boxes_csv(const std::string& path);

/// Active-voxel dump: `iz,iy,ix,f0[,f1,...]` with a header row.
void write_voxels_csv(const std::string& path, const SparseTensor& t);

/// Sequence dump: `row_index,iz,iy,ix,group` with a header row, one line per
/// sequence position in scan order.
void write_sequence_csv(const std::string& path, const VoxelSequence& seq,
                        const SparseTensor& t);

void write_text_file(const std::string& path, const std::string& contents);

} // namespace vdm
