#include <chrono>
#include <cstdio>

#include "groundseg/parallel.hpp"
#include "groundseg/pipeline.hpp"
#include "groundseg/raster.hpp"

namespace groundseg {
namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void say(const ProgressFn& progress, const std::string& msg) {
  if (progress) progress(msg);
}

std::vector<RgbImage> colors_of(const SyntheticDataset& d) {
  std::vector<RgbImage> out;
  for (const auto& r : d.renders) out.push_back(r.color);
  return out;
}

}  // namespace

std::uint64_t train_scene_seed(const PipelineConfig& cfg) { return derive_seed(cfg.seed, 101); }
std::uint64_t test_scene_seed(const PipelineConfig& cfg) { return derive_seed(cfg.seed, 102); }

SyntheticDataset make_synthetic_dataset(const PipelineConfig& cfg, std::uint64_t scene_seed) {
  SyntheticDataset d;
  d.spec = default_scene_spec(scene_seed);
  if (cfg.extent_x != d.spec.extent_x || cfg.extent_y != d.spec.extent_y) {
    // Rescale the default layout to the configured extent.
    const double sx = cfg.extent_x / d.spec.extent_x, sy = cfg.extent_y / d.spec.extent_y;
    for (auto& r : d.spec.regions) {
      for (auto& v : r.polygon) v = Eigen::Vector2d(v.x() * sx, v.y() * sy);
    }
    for (auto& p : d.spec.yellow_grass) p.center = Eigen::Vector2d(p.center.x() * sx, p.center.y() * sy);
    d.spec.extent_x = cfg.extent_x;
    d.spec.extent_y = cfg.extent_y;
  }
  d.spec.relief_amplitude = cfg.relief_amplitude;
  d.spec.mesh_resolution = cfg.mesh_resolution;
  d.scene = generate_scene(d.spec);
  for (const auto& f : cfg.flights()) {
    auto plan = plan_flight(f, d.spec.extent_x, d.spec.extent_y, 0.0);
    d.views.insert(d.views.end(), plan.views.begin(), plan.views.end());
    d.warnings.insert(d.warnings.end(), plan.warnings.begin(), plan.warnings.end());
  }
  d.renders = render_dataset(perturb_poses(d.views, d.spec), d.scene.mesh, d.spec);
  return d;
}

PreparedScene prepare_scene(const PipelineConfig& cfg, const SyntheticDataset& data) {
  PreparedScene p;
  p.cloud = downsample_grid(data.scene.cloud, cfg.downsample_spacing);
  p.grid = voxelize(p.cloud, cfg.chunk_spec_for(p.cloud));
  // Depth comes from the recorded cameras, as the render-depth stage does;
  // the image renders used the perturbed poses.
  std::vector<DepthMap> depths(data.views.size());
  parallel_for(data.views.size(), [&](std::size_t i) { depths[i] = render_depth(data.views[i], data.scene.mesh); });
  p.association = associate(p.grid, data.views, depths, cfg.association);
  return p;
}

AblationResult run_ablation(const PipelineConfig& cfg, const ProgressFn& progress) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  AblationResult result;

  say(progress, "generating training and test scenes");
  const SyntheticDataset train_data = make_synthetic_dataset(cfg, train_scene_seed(cfg));
  const SyntheticDataset test_data = make_synthetic_dataset(cfg, test_scene_seed(cfg));
  const PreparedScene train = prepare_scene(cfg, train_data);
  const PreparedScene test = prepare_scene(cfg, test_data);
  say(progress, "scenes ready: " + std::to_string(train_data.views.size()) + " views, " +
                    std::to_string(train.grid.occupied_count()) + " / " + std::to_string(test.grid.occupied_count()) +
                    " occupied voxels, " + std::to_string(train.grid.chunks.size()) + " training chunks (" +
                    std::to_string(static_cast<int>(seconds_since(t0))) + " s)");

  const auto hist = class_histogram(train.cloud);
  const auto weights = nn::class_weights_from_histogram(hist);

  // Stage 1: image backbone with the proxy segmentation loss.
  nn::Backbone2D backbone(cfg.backbone, derive_seed(cfg.seed, 201));
  {
    std::vector<LabelMask> masks;
    for (const auto& r : train_data.renders) masks.push_back(r.labels);
    const auto samples = backbone_samples(colors_of(train_data), masks, cfg.backbone);
    const auto r = nn::train(backbone, samples, weights, cfg.train2d, [&](int e, double loss) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "backbone epoch %d loss %.4f (%.0f s)", e, loss, seconds_since(t0));
      say(progress, buf);
    });
    result.backbone_loss = r.epoch_loss;
  }
  const BackboneOutputs train_out = run_backbone(backbone, colors_of(train_data));
  const BackboneOutputs test_out = run_backbone(backbone, colors_of(test_data));

  {
    const auto ta = std::chrono::steady_clock::now();
    AblationArm arm{PipelineMode::TwoDOnly, {}, {}, 0.0};
    const auto per_voxel = project_2d_labels(test.association, test_out.scores);
    arm.report = evaluate_clouds(test.cloud, labels_to_points(test.grid, per_voxel, test.cloud));
    arm.seconds = seconds_since(ta);
    result.arms.push_back(std::move(arm));
  }

  // Stage 2: the 3D network on fused features, once per pooling rule.
  for (const auto mode : {PipelineMode::MaxPool, PipelineMode::DepthPool}) {
    const auto ta = std::chrono::steady_clock::now();
    const PoolingMode pool = mode == PipelineMode::MaxPool ? PoolingMode::MaxPool : PoolingMode::DepthPool;
    const auto samples = chunk_samples(train.grid, fuse(train.association, train_out.features, pool), train.cloud);
    nn::UNet3D net(cfg.net3d, derive_seed(cfg.seed, 301));
    AblationArm arm{mode, {}, {}, 0.0};
    arm.loss_history = nn::train(net, samples, weights, cfg.train3d, [&](int e, double loss) {
                         char buf[128];
                         std::snprintf(buf, sizeof buf, "%s epoch %d loss %.4f (%.0f s)", mode_name(mode).c_str(), e,
                                       loss, seconds_since(t0));
                         say(progress, buf);
                       }).epoch_loss;
    const auto per_voxel = predict_voxels(net, test.grid, fuse(test.association, test_out.features, pool));
    arm.report = evaluate_clouds(test.cloud, labels_to_points(test.grid, per_voxel, test.cloud));
    arm.seconds = seconds_since(ta);
    result.arms.push_back(std::move(arm));
  }
  result.seconds = seconds_since(t0);
  return result;
}

}  // namespace groundseg
