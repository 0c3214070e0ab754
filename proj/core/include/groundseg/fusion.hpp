#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "groundseg/association.hpp"

namespace groundseg {

/// Dense per-view feature (or class-score) map at reduced resolution,
/// layout [row][col][channel].
struct FeatureMap2D {
  int view_index = 0;
  int height = 0;
  int width = 0;
  int channels = 0;
  /// Resolution of the source image the map was computed from.
  int image_width = 0;
  int image_height = 0;
  std::vector<double> values;

  std::span<const double> at(int row, int col) const {
    return {values.data() + (static_cast<std::size_t>(row) * width + col) * channels,
            static_cast<std::size_t>(channels)};
  }
  void validate() const;
};

enum class PoolingMode { DepthPool, MaxPool };

/// Fused features parallel to the association's voxel list. Voxels without
/// associations are flagged invalid and carry zeros.
struct FeatureVolume {
  int channels = 0;
  std::vector<double> values;
  std::vector<std::uint8_t> valid;

  std::size_t size() const { return valid.size(); }
  std::span<const double> at(std::size_t voxel) const {
    return {values.data() + voxel * channels, static_cast<std::size_t>(channels)};
  }
};

struct FeatureCell {
  int row = 0;
  int col = 0;
};

/// Proportional nearest-cell mapping: row = floor(v * H_f / H), col = floor(u * W_f / W).
FeatureCell map_pixel_to_feature_cell(int u, int v, int image_width, int image_height, int feature_width,
                                      int feature_height);

/// Index of the smallest depth, computed the way a max-pool kernel would:
/// argmax over negated depths, first occurrence on ties.
std::size_t depth_pool_as_negated_max(std::span<const double> depths);

/// `feats` may be listed in any order; each referenced view_index must appear once.
FeatureVolume fuse(const VoxelViewAssociation& assoc, const std::vector<FeatureMap2D>& feats, PoolingMode mode);

/// Sums class-score vectors over each voxel's associations and takes the
/// argmax (ties to the smaller class); voxels without associations are Unlabeled.
std::vector<MaterialLabel> project_2d_labels(const VoxelViewAssociation& assoc,
                                             const std::vector<FeatureMap2D>& score_maps);

/// Debug dump: text header then, per voxel, a little-endian uint64 voxel
/// position in the association order followed by C float32 values.
void write_feature_volume(const FeatureVolume& volume, const std::filesystem::path& path);
FeatureVolume read_feature_volume(const std::filesystem::path& path);

}  // namespace groundseg
