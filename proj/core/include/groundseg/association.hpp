#pragma once

#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "groundseg/camera.hpp"
#include "groundseg/image.hpp"
#include "groundseg/voxel_grid.hpp"

namespace groundseg {

enum class AngleReference {
  /// World +Z: a straight-down ray scores 90 degrees.
  VerticalAxis,
  /// Per-voxel normal from a plane fit over nearby occupied voxel centers.
  SurfaceNormal,
};

struct AssociationConfig {
  int max_views = 3;
  /// Maximum |voxel depth - rendered depth| in meters; 2x the default voxel edge.
  double depth_prune_threshold = 1.0;
  AngleReference angle_reference = AngleReference::VerticalAxis;
  /// Neighbors used by the SurfaceNormal plane fit.
  int normal_neighbors = 16;

  void validate() const;
};

struct ViewRecord {
  int view_index = 0;
  int u = 0;
  int v = 0;
  /// Camera-frame depth of the voxel center in this view.
  double pixel_depth = 0.0;
  double incidence_angle = 0.0;
  friend bool operator==(const ViewRecord&, const ViewRecord&) = default;
};

/// Per occupied voxel (parallel to occupied_voxels(grid)), up to max_views
/// records sorted by |angle - 90| ascending, then view_index ascending.
struct VoxelViewAssociation {
  std::vector<OccupiedVoxel> voxels;
  std::vector<std::vector<ViewRecord>> records;

  std::size_t size() const { return voxels.size(); }
};

/// Angle in degrees between the ray camera-center -> voxel_center and the
/// plane orthogonal to `reference`; rays along the reference score 90,
/// grazing rays 0. Throws ArgumentError for a zero-length ray.
double incidence_angle(const CameraView& view, const Eigen::Vector3d& voxel_center,
                       const Eigen::Vector3d& reference);

/// True when a ranks strictly ahead of b in view priority.
bool higher_priority(const ViewRecord& a, const ViewRecord& b);

VoxelViewAssociation associate(const ChunkedVoxelGrid& grid, const std::vector<CameraView>& views,
                               const std::vector<DepthMap>& depth_maps, const AssociationConfig& cfg);

/// Unit normals (z >= 0) per occupied voxel from a PCA plane fit over the
/// k nearest occupied voxel centers; +Z where too few neighbors exist.
std::vector<Eigen::Vector3d> estimate_voxel_normals(const std::vector<OccupiedVoxel>& voxels,
                                                    const ChunkSpec& spec, int k);

/// Text dump, one line per record: `cx,cy,cz voxel_index view_index u v depth angle`.
void write_association(const VoxelViewAssociation& assoc, const std::filesystem::path& path);
/// Reads a dump back, grouping records onto the voxels of `grid`.
VoxelViewAssociation read_association(const ChunkedVoxelGrid& grid, const std::filesystem::path& path);

}  // namespace groundseg
