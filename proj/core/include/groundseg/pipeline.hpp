#pragma once

#include <functional>
#include <string>
#include <vector>

#include "groundseg/config.hpp"
#include "groundseg/fusion.hpp"
#include "groundseg/metrics.hpp"
#include "groundseg/nn/models.hpp"
#include "groundseg/nn/train.hpp"

namespace groundseg {

using ProgressFn = std::function<void(const std::string&)>;

/// [1, 3, 1, H, W] tensor with channels scaled to [-0.5, 0.5).
nn::Tensor image_tensor(const RgbImage& image);

/// Mask reduced to feature resolution by majority vote over the pixels that
/// map to each cell (ties to the smaller label; 255 where all are Unlabeled).
std::vector<std::uint8_t> feature_targets(const LabelMask& mask, int feature_width, int feature_height);

std::vector<nn::Sample> backbone_samples(const std::vector<RgbImage>& images, const std::vector<LabelMask>& masks,
                                         const nn::Backbone2DConfig& cfg);

struct BackboneOutputs {
  /// Feature tap per view, view_index = position in the input list.
  std::vector<FeatureMap2D> features;
  /// Softmax class scores per view.
  std::vector<FeatureMap2D> scores;
};

/// Eval-mode pass over every image.
BackboneOutputs run_backbone(nn::Backbone2D& net, const std::vector<RgbImage>& images);

/// One sample per chunk in map order: channel 0 is occupancy, channels
/// 1..C the fused features of occupied voxels. Targets are the voxel
/// ground truth from `cloud` (255 for empty voxels), or all 255 when the
/// cloud has no labels.
std::vector<nn::Sample> chunk_samples(const ChunkedVoxelGrid& grid, const FeatureVolume& volume,
                                      const PointCloud& cloud);

/// Eval-mode argmax per occupied voxel, parallel to occupied_voxels(grid).
std::vector<MaterialLabel> predict_voxels(nn::UNet3D& net, const ChunkedVoxelGrid& grid,
                                          const FeatureVolume& volume);

/// Point labels from per-occupied-voxel predictions.
PointCloud labels_to_points(const ChunkedVoxelGrid& grid, const std::vector<MaterialLabel>& per_voxel,
                            const PointCloud& cloud);

MetricReport evaluate_clouds(const PointCloud& truth, const PointCloud& pred);

}  // namespace groundseg

namespace groundseg {

/// One rendered synthetic scene.
struct SyntheticDataset {
  SceneSpec spec;
  Scene scene;
  std::vector<CameraView> views;
  std::vector<RenderedView> renders;
  std::vector<std::string> warnings;
};

/// Default scene layout for `scene_seed` with the config's extent, relief
/// and mesh resolution, flown once per configured altitude.
SyntheticDataset make_synthetic_dataset(const PipelineConfig& cfg, std::uint64_t scene_seed);

/// Scene seeds for the training and test scenes of a run.
std::uint64_t train_scene_seed(const PipelineConfig& cfg);
std::uint64_t test_scene_seed(const PipelineConfig& cfg);

/// Everything the 3D stages need for one scene.
struct PreparedScene {
  PointCloud cloud;  // downsampled, labeled
  ChunkedVoxelGrid grid;
  VoxelViewAssociation association;
};

PreparedScene prepare_scene(const PipelineConfig& cfg, const SyntheticDataset& data);

struct AblationArm {
  PipelineMode mode;
  MetricReport report;
  std::vector<double> loss_history;
  double seconds = 0.0;
};

struct AblationResult {
  std::vector<double> backbone_loss;
  std::vector<AblationArm> arms;  // 2d-only, max-pool, depth-pool
  double seconds = 0.0;
};

/// Trains the backbone once on the training scene, then evaluates the 2D
/// network alone and the 3D network on max-pooled and depth-pooled features
/// on the test scene.
AblationResult run_ablation(const PipelineConfig& cfg, const ProgressFn& progress = {});

}  // namespace groundseg
