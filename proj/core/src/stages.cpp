#include "groundseg/stages.hpp"

#include <fstream>

#include "groundseg/error.hpp"
#include "groundseg/export.hpp"
#include "groundseg/hash.hpp"
#include "groundseg/nn/checkpoint.hpp"
#include "groundseg/parallel.hpp"
#include "groundseg/ply_io.hpp"
#include "groundseg/raster.hpp"

#ifndef GROUNDSEG_VERSION
#define GROUNDSEG_VERSION "unknown"
#endif

namespace groundseg::stages {
namespace {

/// Collects hashes as files are read or written and emits the manifest.
class Recorder {
 public:
  Recorder(std::string stage, const PipelineConfig& cfg, fs::path manifest_path)
      : path_(std::move(manifest_path)) {
    m_.stage = std::move(stage);
    m_.fields["config_hash"] = config_hash(cfg);
    m_.fields["seed"] = std::to_string(cfg.seed);
    m_.fields["mode"] = mode_name(cfg.mode);
  }

  void field(const std::string& k, const std::string& v) { m_.fields[k] = v; }
  void input(const fs::path& p) { m_.inputs.emplace_back(name(p), sha256_file(p)); }
  void output(const fs::path& p) { m_.outputs.emplace_back(name(p), sha256_file(p)); }

  void write() const {
    std::ofstream os(path_, std::ios::binary);
    os << m_.to_text();
    if (!os) throw IoError("cannot write manifest " + path_.string());
  }

 private:
  std::string name(const fs::path& p) const {
    return fs::absolute(p).lexically_proximate(fs::absolute(path_).parent_path()).generic_string();
  }

  fs::path path_;
  Manifest m_;
};

fs::path manifest_for(const fs::path& primary) { return fs::path(primary.string() + ".manifest"); }

void make_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

std::vector<CameraView> load_views(const SceneFiles& s, Recorder& rec) {
  require_input(s.cameras(), "synth-gen");
  rec.input(s.cameras());
  return read_cameras(s.cameras());
}

std::vector<RgbImage> load_images(const SceneFiles& s, const std::vector<CameraView>& views, Recorder& rec) {
  std::vector<RgbImage> out;
  out.reserve(views.size());
  for (const auto& v : views) {
    require_input(s.image(v.image_id), "synth-gen");
    rec.input(s.image(v.image_id));
    out.push_back(read_ppm(s.image(v.image_id)));
  }
  return out;
}

PointCloud load_cloud(const fs::path& p, const std::string& producer, Recorder& rec) {
  require_input(p, producer);
  rec.input(p);
  return read_point_cloud(p);
}

ChunkedVoxelGrid load_grid(const SceneFiles& s, Recorder& rec) {
  require_input(s.grid(), "voxelize");
  rec.input(s.grid());
  return read_voxel_grid(s.grid());
}

VoxelViewAssociation load_association(const SceneFiles& s, const ChunkedVoxelGrid& grid, Recorder& rec) {
  require_input(s.association(), "associate");
  rec.input(s.association());
  return read_association(grid, s.association());
}

nn::Backbone2D load_backbone(const PipelineConfig& cfg, const fs::path& p, Recorder& rec) {
  require_input(p, "train-2d");
  rec.input(p);
  nn::Backbone2D net(cfg.backbone, derive_seed(cfg.seed, 201));
  nn::load_checkpoint(p, net);
  return net;
}

PoolingMode pooling_for(PipelineMode m) {
  if (m == PipelineMode::TwoDOnly) throw ConfigError("the 3D stages need mode 2d3d-maxpool or 2d3d-depthpool");
  return m == PipelineMode::MaxPool ? PoolingMode::MaxPool : PoolingMode::DepthPool;
}

PointCloud palette_colored(const PointCloud& labeled) {
  std::vector<Rgb> colors;
  colors.reserve(labeled.size());
  for (const auto l : labeled.labels()) colors.push_back(label_color(l));
  return PointCloud(labeled.positions(), std::move(colors), labeled.labels(), labeled.point_spacing());
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  os << text;
  if (!os) throw IoError("cannot write " + p.string());
}

}  // namespace

Split parse_split(const std::string& name) {
  if (name == "train") return Split::Train;
  if (name == "test") return Split::Test;
  throw ConfigError("unknown split '" + name + "' (expected train or test)");
}

std::string split_name(Split s) { return s == Split::Train ? "train" : "test"; }

std::string Manifest::to_text() const {
  std::string out = "stage=" + stage + "\nversion=" GROUNDSEG_VERSION "\n";
  for (const auto& [k, v] : fields) out += k + "=" + v + "\n";
  for (const auto& [n, h] : inputs) out += "input." + n + "=" + h + "\n";
  for (const auto& [n, h] : outputs) out += "output." + n + "=" + h + "\n";
  return out;
}

void require_input(const fs::path& path, const std::string& producing_stage) {
  if (!fs::exists(path)) {
    throw MissingInputError("missing input " + path.string() + " (produced by the " + producing_stage + " stage)");
  }
}

void synth_gen(const PipelineConfig& cfg, Split split, const fs::path& scene_dir) {
  cfg.validate();
  const SceneFiles s{scene_dir};
  const auto seed = split == Split::Train ? train_scene_seed(cfg) : test_scene_seed(cfg);
  const SyntheticDataset d = make_synthetic_dataset(cfg, seed);
  fs::create_directories(scene_dir / "images");
  fs::create_directories(scene_dir / "labels");
  Recorder rec("synth-gen", cfg, manifest_for(s.scene_spec()));
  rec.field("split", split_name(split));
  rec.field("scene_seed", std::to_string(seed));

  write_scene_spec(d.spec, s.scene_spec());
  write_mesh(d.scene.mesh, s.mesh());
  write_point_cloud(d.scene.cloud, s.dense_cloud());
  write_cameras(d.views, s.cameras());
  for (const auto& p : {s.scene_spec(), s.mesh(), s.dense_cloud(), s.cameras()}) rec.output(p);
  for (std::size_t i = 0; i < d.views.size(); ++i) {
    const auto& id = d.views[i].image_id;
    write_ppm(d.renders[i].color, s.image(id));
    write_label_pgm(d.renders[i].labels, s.label_mask(id));
    rec.output(s.image(id));
    rec.output(s.label_mask(id));
  }
  for (std::size_t i = 0; i < d.warnings.size(); ++i) rec.field("warning." + std::to_string(i), d.warnings[i]);
  rec.write();
}

void downsample(const PipelineConfig& cfg, const fs::path& scene_dir) {
  cfg.validate();
  const SceneFiles s{scene_dir};
  Recorder rec("downsample", cfg, manifest_for(s.cloud()));
  const PointCloud dense = load_cloud(s.dense_cloud(), "synth-gen", rec);
  write_point_cloud(downsample_grid(dense, cfg.downsample_spacing), s.cloud());
  rec.output(s.cloud());
  rec.write();
}

void voxelize(const PipelineConfig& cfg, const fs::path& scene_dir) {
  cfg.validate();
  const SceneFiles s{scene_dir};
  Recorder rec("voxelize", cfg, manifest_for(s.grid()));
  const PointCloud cloud = load_cloud(s.cloud(), "downsample", rec);
  write_voxel_grid(groundseg::voxelize(cloud, cfg.chunk_spec_for(cloud)), s.grid());
  rec.output(s.grid());
  rec.write();
}

void render_depth(const PipelineConfig& cfg, const fs::path& scene_dir) {
  cfg.validate();
  const SceneFiles s{scene_dir};
  fs::create_directories(scene_dir / "depth");
  Recorder rec("render-depth", cfg, scene_dir / "depth.manifest");
  const auto views = load_views(s, rec);
  require_input(s.mesh(), "synth-gen");
  rec.input(s.mesh());
  const TriangleMesh mesh = read_mesh(s.mesh());
  std::vector<DepthMap> depths(views.size());
  parallel_for(views.size(), [&](std::size_t i) { depths[i] = groundseg::render_depth(views[i], mesh); });
  for (std::size_t i = 0; i < views.size(); ++i) {
    write_pfm(depths[i], s.depth(views[i].image_id));
    rec.output(s.depth(views[i].image_id));
  }
  rec.write();
}

void associate(const PipelineConfig& cfg, const fs::path& scene_dir) {
  cfg.validate();
  const SceneFiles s{scene_dir};
  Recorder rec("associate", cfg, manifest_for(s.association()));
  const auto grid = load_grid(s, rec);
  const auto views = load_views(s, rec);
  std::vector<DepthMap> depths;
  for (const auto& v : views) {
    require_input(s.depth(v.image_id), "render-depth");
    rec.input(s.depth(v.image_id));
    depths.push_back(read_pfm(s.depth(v.image_id)));
  }
  write_association(groundseg::associate(grid, views, depths, cfg.association), s.association());
  rec.output(s.association());
  rec.write();
}

void train_2d(const PipelineConfig& cfg, const fs::path& train_dir, const fs::path& backbone_out,
              const ProgressFn& progress) {
  cfg.validate();
  const SceneFiles s{train_dir};
  make_parent(backbone_out);
  Recorder rec("train-2d", cfg, manifest_for(backbone_out));
  const auto views = load_views(s, rec);
  const auto images = load_images(s, views, rec);
  std::vector<LabelMask> masks;
  for (const auto& v : views) {
    require_input(s.label_mask(v.image_id), "synth-gen");
    rec.input(s.label_mask(v.image_id));
    masks.push_back(read_label_pgm(s.label_mask(v.image_id)));
  }
  const PointCloud cloud = load_cloud(s.cloud(), "downsample", rec);
  const auto weights = nn::class_weights_from_histogram(class_histogram(cloud));

  nn::Backbone2D net(cfg.backbone, derive_seed(cfg.seed, 201));
  const auto r = nn::train(net, backbone_samples(images, masks, cfg.backbone), weights, cfg.train2d,
                           [&](int e, double loss) {
                             if (progress) progress("train-2d epoch " + std::to_string(e) + " loss " + std::to_string(loss));
                           });
  nn::save_checkpoint(backbone_out, net, derive_seed(cfg.seed, 201), static_cast<int>(r.epoch_loss.size()));
  rec.output(backbone_out);
  rec.write();
}

void train_3d(const PipelineConfig& cfg, const fs::path& train_dir, const fs::path& backbone,
              const fs::path& net3d_out, const ProgressFn& progress) {
  cfg.validate();
  const PoolingMode pool = pooling_for(cfg.mode);
  const SceneFiles s{train_dir};
  make_parent(net3d_out);
  Recorder rec("train-3d", cfg, manifest_for(net3d_out));
  auto bb = load_backbone(cfg, backbone, rec);
  const auto views = load_views(s, rec);
  const auto images = load_images(s, views, rec);
  const PointCloud cloud = load_cloud(s.cloud(), "downsample", rec);
  const auto grid = load_grid(s, rec);
  const auto assoc = load_association(s, grid, rec);
  const auto weights = nn::class_weights_from_histogram(class_histogram(cloud));

  const auto feats = run_backbone(bb, images);
  const auto samples = chunk_samples(grid, fuse(assoc, feats.features, pool), cloud);
  nn::UNet3D net(cfg.net3d, derive_seed(cfg.seed, 301));
  const auto r = nn::train(net, samples, weights, cfg.train3d, [&](int e, double loss) {
    if (progress) progress("train-3d epoch " + std::to_string(e) + " loss " + std::to_string(loss));
  });
  nn::save_checkpoint(net3d_out, net, derive_seed(cfg.seed, 301), static_cast<int>(r.epoch_loss.size()));
  rec.output(net3d_out);
  rec.write();
}

void predict(const PipelineConfig& cfg, const fs::path& scene_dir, const fs::path& backbone, const fs::path& net3d,
             const fs::path& out) {
  cfg.validate();
  const SceneFiles s{scene_dir};
  make_parent(out);
  Recorder rec("predict", cfg, manifest_for(out));
  auto bb = load_backbone(cfg, backbone, rec);
  const auto views = load_views(s, rec);
  const auto images = load_images(s, views, rec);
  const PointCloud cloud = load_cloud(s.cloud(), "downsample", rec);
  const auto grid = load_grid(s, rec);
  const auto assoc = load_association(s, grid, rec);
  const auto feats = run_backbone(bb, images);

  std::vector<MaterialLabel> per_voxel;
  if (cfg.mode == PipelineMode::TwoDOnly) {
    per_voxel = project_2d_labels(assoc, feats.scores);
  } else {
    require_input(net3d, "train-3d");
    rec.input(net3d);
    nn::UNet3D net(cfg.net3d, derive_seed(cfg.seed, 301));
    nn::load_checkpoint(net3d, net);
    per_voxel = predict_voxels(net, grid, fuse(assoc, feats.features, pooling_for(cfg.mode)));
  }
  const PointCloud labeled = labels_to_points(grid, per_voxel, cloud);
  const fs::path colored = out.parent_path() / (out.stem().string() + "_color.ply");
  write_point_cloud(labeled, out);
  write_point_cloud(palette_colored(labeled), colored);
  rec.output(out);
  rec.output(colored);
  rec.write();
}

MetricReport evaluate(const fs::path& truth, const fs::path& pred, const fs::path& out_prefix) {
  require_input(truth, "downsample");
  require_input(pred, "predict");
  const PointCloud t = read_point_cloud(truth), p = read_point_cloud(pred);
  for (std::size_t i = 0; i < std::min(t.size(), p.size()); ++i) {
    if (t.position(i) != p.position(i)) {
      throw ArgumentError("evaluate: point " + std::to_string(i) + " differs between " + truth.string() + " and " +
                          pred.string());
    }
  }
  const MetricReport report = evaluate_clouds(t, p);
  make_parent(out_prefix);
  const fs::path txt(out_prefix.string() + ".txt"), csv(out_prefix.string() + ".csv");
  write_text(txt, format_report(report));
  write_text(csv, format_csv(report));
  Manifest m;
  m.stage = "evaluate";
  m.inputs = {{truth.filename().string(), sha256_file(truth)}, {pred.filename().string(), sha256_file(pred)}};
  m.outputs = {{txt.filename().string(), sha256_file(txt)}, {csv.filename().string(), sha256_file(csv)}};
  write_text(manifest_for(txt), m.to_text());
  return report;
}

void annotate_images(const PipelineConfig& cfg, const fs::path& scene_dir, const fs::path& labeled_cloud,
                     const fs::path& out_dir) {
  cfg.validate();
  const SceneFiles s{scene_dir};
  fs::create_directories(out_dir);
  Recorder rec("annotate-images", cfg, out_dir / "annotations.manifest");
  const auto views = load_views(s, rec);
  const PointCloud cloud = load_cloud(labeled_cloud, "predict", rec);
  if (!cloud.has_labels()) throw ArgumentError("annotate-images: " + labeled_cloud.string() + " has no labels");
  std::vector<DepthMap> depths;
  for (const auto& v : views) {
    require_input(s.depth(v.image_id), "render-depth");
    rec.input(s.depth(v.image_id));
    depths.push_back(read_pfm(s.depth(v.image_id)));
  }
  std::vector<LabelMask> masks(views.size());
  parallel_for(views.size(), [&](std::size_t i) {
    masks[i] = backproject_labels(cloud, views[i], depths[i], cfg.backproject);
  });
  for (std::size_t i = 0; i < views.size(); ++i) {
    const fs::path p = out_dir / (views[i].image_id + ".pgm");
    write_label_pgm(masks[i], p);
    rec.output(p);
  }
  rec.write();
}

void export_terrain(const PipelineConfig& cfg, const fs::path& labeled_cloud, const fs::path& out_dir) {
  cfg.validate();
  fs::create_directories(out_dir);
  Recorder rec("export-terrain", cfg, out_dir / "terrain.manifest");
  const PointCloud cloud = load_cloud(labeled_cloud, "downsample", rec);
  const RasterGrid grid = grid_for(cloud, cfg.export_cell_size);
  std::vector<fs::path> written;
  write_esri_ascii(export_dem(cloud, grid), out_dir / "dem.asc");
  written.push_back(out_dir / "dem.asc");
  if (cloud.has_labels()) {
    const MaterialMasks m = export_material_masks(cloud, grid);
    for (const auto& [name, raster] : {std::pair{"bare_earth", &m.bare_earth}, std::pair{"road", &m.road},
                                       std::pair{"grass", &m.grass}}) {
      const fs::path p = out_dir / (std::string("mask_") + name + ".asc");
      write_esri_ascii(*raster, p);
      written.push_back(p);
    }
  }
  if (cloud.has_colors()) {
    const Orthophoto o = export_orthophoto(cloud, grid);
    write_ppm(o.image, out_dir / "ortho.ppm");
    write_world_file(o.grid, out_dir / "ortho.wld");
    written.push_back(out_dir / "ortho.ppm");
    written.push_back(out_dir / "ortho.wld");
  }
  for (const auto& p : written) rec.output(p);
  rec.write();
}

std::vector<std::pair<std::string, MetricReport>> ablation(const PipelineConfig& cfg, const fs::path& work_dir,
                                                           const ProgressFn& progress) {
  cfg.validate();
  auto say = [&](const std::string& m) {
    if (progress) progress(m);
  };
  const fs::path train = work_dir / "train", test = work_dir / "test";
  for (const auto& [split, dir] : {std::pair{Split::Train, train}, std::pair{Split::Test, test}}) {
    say("preparing " + split_name(split) + " scene");
    synth_gen(cfg, split, dir);
    downsample(cfg, dir);
    voxelize(cfg, dir);
    render_depth(cfg, dir);
    associate(cfg, dir);
  }
  const fs::path backbone = work_dir / "models" / "backbone.ckpt";
  train_2d(cfg, train, backbone, progress);

  std::vector<std::pair<std::string, MetricReport>> reports;
  for (const auto mode : {PipelineMode::TwoDOnly, PipelineMode::MaxPool, PipelineMode::DepthPool}) {
    PipelineConfig c = cfg;
    c.mode = mode;
    const std::string name = mode_name(mode);
    const fs::path net3d = work_dir / "models" / (name + ".ckpt");
    if (mode != PipelineMode::TwoDOnly) train_3d(c, train, backbone, net3d, progress);
    const fs::path pred = work_dir / "predictions" / (name + ".ply");
    predict(c, test, backbone, net3d, pred);
    reports.emplace_back(name, evaluate(SceneFiles{test}.cloud(), pred, work_dir / "reports" / name));
    say(name + " weighted F1 " + std::to_string(reports.back().second.weighted.f1));
  }
  write_text(work_dir / "reports" / "comparison.txt", format_comparison(reports));
  return reports;
}

}  // namespace groundseg::stages
