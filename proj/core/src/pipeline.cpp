#include "groundseg/pipeline.hpp"

#include <algorithm>

#include "groundseg/error.hpp"
#include "groundseg/parallel.hpp"

namespace groundseg {

nn::Tensor image_tensor(const RgbImage& image) {
  nn::Tensor t({1, 3, 1, image.height, image.width});
  const std::size_t plane = static_cast<std::size_t>(image.width) * image.height;
  for (std::size_t i = 0; i < plane; ++i) {
    const Rgb& c = image.pixels[i];
    t[i] = c.r / 255.0 - 0.5;
    t[plane + i] = c.g / 255.0 - 0.5;
    t[2 * plane + i] = c.b / 255.0 - 0.5;
  }
  return t;
}

std::vector<std::uint8_t> feature_targets(const LabelMask& mask, int feature_width, int feature_height) {
  std::vector<std::array<int, kNumClasses>> votes(static_cast<std::size_t>(feature_width) * feature_height,
                                                  std::array<int, kNumClasses>{});
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      const MaterialLabel l = mask.at(x, y);
      if (!is_labeled(l)) continue;
      const FeatureCell c = map_pixel_to_feature_cell(x, y, mask.width, mask.height, feature_width, feature_height);
      ++votes[static_cast<std::size_t>(c.row) * feature_width + c.col][static_cast<std::size_t>(label_index(l))];
    }
  }
  std::vector<std::uint8_t> out(votes.size(), 255);
  for (std::size_t i = 0; i < votes.size(); ++i) {
    const auto it = std::max_element(votes[i].begin(), votes[i].end());
    if (*it > 0) out[i] = static_cast<std::uint8_t>(it - votes[i].begin());
  }
  return out;
}

std::vector<nn::Sample> backbone_samples(const std::vector<RgbImage>& images, const std::vector<LabelMask>& masks,
                                         const nn::Backbone2DConfig& cfg) {
  if (images.size() != masks.size()) {
    throw ArgumentError("backbone_samples: " + std::to_string(images.size()) + " images but " +
                        std::to_string(masks.size()) + " masks");
  }
  std::vector<nn::Sample> out;
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].width != cfg.input_width || images[i].height != cfg.input_height) {
      throw ArgumentError("backbone_samples: image " + std::to_string(i) + " is " + std::to_string(images[i].width) +
                          "x" + std::to_string(images[i].height) + ", expected " + std::to_string(cfg.input_width) +
                          "x" + std::to_string(cfg.input_height));
    }
    if (masks[i].width != images[i].width || masks[i].height != images[i].height) {
      throw ArgumentError("backbone_samples: mask " + std::to_string(i) + " does not match its image");
    }
    out.push_back({image_tensor(images[i]), feature_targets(masks[i], cfg.feature_width, cfg.feature_height)});
  }
  return out;
}

namespace {

FeatureMap2D to_feature_map(const nn::Tensor& t, int view_index, const RgbImage& image) {
  FeatureMap2D m;
  m.view_index = view_index;
  m.channels = t.dim(1);
  m.height = t.dim(3);
  m.width = t.dim(4);
  m.image_width = image.width;
  m.image_height = image.height;
  const std::size_t plane = static_cast<std::size_t>(m.height) * m.width;
  m.values.resize(plane * m.channels);
  for (int c = 0; c < m.channels; ++c) {
    for (std::size_t p = 0; p < plane; ++p) m.values[p * m.channels + c] = t[c * plane + p];
  }
  return m;
}

}  // namespace

BackboneOutputs run_backbone(nn::Backbone2D& net, const std::vector<RgbImage>& images) {
  BackboneOutputs out;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const nn::Tensor logits = net.forward(image_tensor(images[i]), nn::Mode::Eval);
    out.features.push_back(to_feature_map(net.features(), static_cast<int>(i), images[i]));
    out.scores.push_back(to_feature_map(nn::softmax_channels(logits), static_cast<int>(i), images[i]));
  }
  return out;
}

std::vector<nn::Sample> chunk_samples(const ChunkedVoxelGrid& grid, const FeatureVolume& volume,
                                      const PointCloud& cloud) {
  const auto& dims = grid.spec.voxel_counts;
  const int C = volume.channels;
  const std::size_t V = static_cast<std::size_t>(grid.spec.voxels_per_chunk());
  if (volume.size() != grid.occupied_count()) {
    throw ArgumentError("chunk_samples: feature volume has " + std::to_string(volume.size()) + " voxels, grid has " +
                        std::to_string(grid.occupied_count()));
  }
  std::vector<nn::Sample> out;
  std::size_t next = 0;
  for (const auto& [index, chunk] : grid.chunks) {
    nn::Sample s{nn::Tensor({1, 1 + C, dims.z(), dims.y(), dims.x()}), std::vector<std::uint8_t>(V, 255)};
    std::vector<MaterialLabel> truth;
    if (cloud.has_labels()) truth = voxel_ground_truth(chunk, cloud);
    for (std::size_t v = 0; v < V; ++v) {
      if (!chunk.occupancy[v]) continue;
      s.input[v] = 1.0;
      const auto f = volume.at(next++);
      for (int c = 0; c < C; ++c) s.input[(1 + c) * V + v] = f[static_cast<std::size_t>(c)];
      if (!truth.empty() && is_labeled(truth[v])) s.targets[v] = static_cast<std::uint8_t>(truth[v]);
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<MaterialLabel> predict_voxels(nn::UNet3D& net, const ChunkedVoxelGrid& grid,
                                          const FeatureVolume& volume) {
  const auto samples = chunk_samples(grid, volume, PointCloud());
  std::vector<MaterialLabel> out;
  out.reserve(grid.occupied_count());
  std::size_t s = 0;
  for (const auto& [index, chunk] : grid.chunks) {
    const auto classes = nn::argmax_classes(net.forward(samples[s++].input, nn::Mode::Eval));
    for (std::size_t v = 0; v < chunk.occupancy.size(); ++v) {
      if (chunk.occupancy[v]) out.push_back(static_cast<MaterialLabel>(classes[v]));
    }
  }
  return out;
}

PointCloud labels_to_points(const ChunkedVoxelGrid& grid, const std::vector<MaterialLabel>& per_voxel,
                            const PointCloud& cloud) {
  return transfer_labels_to_points(grid, to_voxel_labels(grid, per_voxel), cloud);
}

MetricReport evaluate_clouds(const PointCloud& truth, const PointCloud& pred) {
  if (!truth.has_labels() || !pred.has_labels()) throw ArgumentError("evaluate: both clouds need labels");
  if (truth.size() != pred.size()) {
    throw ArgumentError("evaluate: truth has " + std::to_string(truth.size()) + " points, prediction has " +
                        std::to_string(pred.size()));
  }
  ConfusionMatrix cm;
  accumulate(cm, truth.labels(), pred.labels());
  return compute_metrics(cm);
}

}  // namespace groundseg
