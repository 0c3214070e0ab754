#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "groundseg/point_cloud.hpp"

namespace groundseg {

/// Chunk edge lengths (W_L, D_L, H_L), voxels per chunk (W_S, D_S, H_S) and
/// the world anchor of chunk (0, 0, 0).
struct ChunkSpec {
  Eigen::Vector3d chunk_size{16.0, 16.0, 8.0};
  Eigen::Vector3i voxel_counts{32, 32, 16};
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();

  Eigen::Vector3d voxel_size() const { return chunk_size.cwiseQuotient(voxel_counts.cast<double>()); }
  int voxels_per_chunk() const { return voxel_counts.prod(); }
  void validate() const;
};

using ChunkIndex = std::array<std::int64_t, 3>;

/// One chunk of the occupancy grid. Voxel linear index is
/// i + W_S * (j + D_S * k) for local voxel (i, j, k), x fastest.
struct VoxelChunk {
  ChunkIndex index{};
  Eigen::Vector3i dims{0, 0, 0};
  std::vector<std::uint8_t> occupancy;
  /// Compressed member lists: points of voxel v are
  /// point_ids[offsets[v] .. offsets[v + 1]).
  std::vector<std::uint32_t> offsets;
  std::vector<std::uint32_t> point_ids;
  std::optional<std::vector<MaterialLabel>> voxel_labels;

  int linear(int i, int j, int k) const { return i + dims.x() * (j + dims.y() * k); }
  Eigen::Vector3i local(int linear_index) const;
  std::span<const std::uint32_t> points_in(int voxel) const {
    return {point_ids.data() + offsets[voxel], offsets[voxel + 1] - offsets[voxel]};
  }
  std::size_t voxel_count() const { return occupancy.size(); }
  std::size_t occupied_count() const;
};

/// Only non-empty chunks are stored. std::map keeps iteration order a
/// function of the chunk indices alone.
struct ChunkedVoxelGrid {
  ChunkSpec spec;
  std::map<ChunkIndex, VoxelChunk> chunks;

  std::size_t occupied_count() const;
};

/// Assigns each point to the half-open voxel containing it. A point lying
/// exactly on the cloud's maximum bound and on a voxel boundary joins the
/// cell below so the grid does not sprout a chunk for boundary points.
ChunkedVoxelGrid voxelize(const PointCloud& cloud, const ChunkSpec& spec);

/// ChunkSpec with the default sizes anchored at the cloud's minimum corner.
ChunkSpec default_chunk_spec(const PointCloud& cloud);

/// Majority vote over member labels, ties to the smallest label value;
/// unoccupied voxels and voxels whose members are all Unlabeled stay Unlabeled.
std::vector<MaterialLabel> voxel_ground_truth(const VoxelChunk& chunk, const PointCloud& cloud);

using VoxelLabels = std::map<ChunkIndex, std::vector<MaterialLabel>>;

/// Copies `cloud` replacing every label with its voxel's prediction.
PointCloud transfer_labels_to_points(const ChunkedVoxelGrid& grid, const VoxelLabels& predictions,
                                     const PointCloud& cloud);

/// World-frame centers of the occupied voxels in ascending linear index.
std::vector<Eigen::Vector3d> voxel_centers(const VoxelChunk& chunk, const ChunkSpec& spec);

Eigen::Vector3d voxel_center(const ChunkSpec& spec, const ChunkIndex& chunk, const Eigen::Vector3i& local);

/// Flat, ordered view of all occupied voxels: chunks in map order, voxels in
/// ascending linear index. Per-voxel arrays elsewhere run parallel to it.
struct OccupiedVoxel {
  ChunkIndex chunk{};
  std::int32_t voxel = 0;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
};
std::vector<OccupiedVoxel> occupied_voxels(const ChunkedVoxelGrid& grid);

/// Scatters per-occupied-voxel values back into per-chunk arrays
/// (Unlabeled for empty voxels).
VoxelLabels to_voxel_labels(const ChunkedVoxelGrid& grid, std::span<const MaterialLabel> per_voxel);

/// Text grid file: the chunk spec, then one line per chunk followed by one
/// line per occupied voxel listing its member point indices.
void write_voxel_grid(const ChunkedVoxelGrid& grid, const std::filesystem::path& path);
ChunkedVoxelGrid read_voxel_grid(const std::filesystem::path& path);

/// Debug dump: PLY of occupied voxel centers, colored by voxel label when present.
void write_chunk_debug_ply(const VoxelChunk& chunk, const ChunkSpec& spec, const std::filesystem::path& path);

}  // namespace groundseg
