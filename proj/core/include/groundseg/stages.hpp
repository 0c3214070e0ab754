#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "groundseg/config.hpp"
#include "groundseg/metrics.hpp"
#include "groundseg/pipeline.hpp"

namespace groundseg::stages {

namespace fs = std::filesystem;

/// A scene directory holds one synthetic capture and everything derived
/// from it:
///
///   scene.txt  mesh.ply  cloud_dense.ply  cameras.txt   synth-gen
///   images/<id>.ppm  labels/<id>.pgm                     synth-gen
///   cloud.ply                                             downsample
///   grid.txt                                              voxelize
///   depth/<id>.pfm                                        render-depth
///   association.txt                                       associate
///
/// Every stage writes `<primary output>.manifest` next to its outputs.
struct SceneFiles {
  fs::path dir;

  fs::path scene_spec() const { return dir / "scene.txt"; }
  fs::path mesh() const { return dir / "mesh.ply"; }
  fs::path dense_cloud() const { return dir / "cloud_dense.ply"; }
  fs::path cameras() const { return dir / "cameras.txt"; }
  fs::path image(const std::string& id) const { return dir / "images" / (id + ".ppm"); }
  fs::path label_mask(const std::string& id) const { return dir / "labels" / (id + ".pgm"); }
  fs::path cloud() const { return dir / "cloud.ply"; }
  fs::path grid() const { return dir / "grid.txt"; }
  fs::path depth(const std::string& id) const { return dir / "depth" / (id + ".pfm"); }
  fs::path association() const { return dir / "association.txt"; }
};

enum class Split { Train, Test };
Split parse_split(const std::string& name);
std::string split_name(Split s);

/// Key = value manifest. Paths are stored relative to the manifest's
/// directory so that identical runs in different directories produce
/// identical manifests.
struct Manifest {
  std::string stage;
  std::map<std::string, std::string> fields;
  std::vector<std::pair<std::string, std::string>> inputs;   // name, sha256
  std::vector<std::pair<std::string, std::string>> outputs;  // name, sha256

  std::string to_text() const;
};

/// Throws MissingInputError naming the file and the stage that produces it.
void require_input(const fs::path& path, const std::string& producing_stage);

void synth_gen(const PipelineConfig& cfg, Split split, const fs::path& scene_dir);
void downsample(const PipelineConfig& cfg, const fs::path& scene_dir);
void voxelize(const PipelineConfig& cfg, const fs::path& scene_dir);
void render_depth(const PipelineConfig& cfg, const fs::path& scene_dir);
void associate(const PipelineConfig& cfg, const fs::path& scene_dir);

/// Trains the image backbone on a prepared training scene.
void train_2d(const PipelineConfig& cfg, const fs::path& train_dir, const fs::path& backbone_out,
              const ProgressFn& progress = {});

/// Trains the 3D network on backbone features pooled per cfg.mode, which
/// must not be 2d-only.
void train_3d(const PipelineConfig& cfg, const fs::path& train_dir, const fs::path& backbone,
              const fs::path& net3d_out, const ProgressFn& progress = {});

/// Labels the scene's downsampled cloud per cfg.mode. Writes `out` (labels)
/// and `<stem>_color.ply` with the display palette. net3d is ignored in
/// 2d-only mode.
void predict(const PipelineConfig& cfg, const fs::path& scene_dir, const fs::path& backbone, const fs::path& net3d,
             const fs::path& out);

/// Writes `<out_prefix>.txt` (table) and `<out_prefix>.csv`.
MetricReport evaluate(const fs::path& truth, const fs::path& pred, const fs::path& out_prefix);

/// Back-projects a labeled cloud into every view of the scene, writing
/// out_dir/<id>.pgm.
void annotate_images(const PipelineConfig& cfg, const fs::path& scene_dir, const fs::path& labeled_cloud,
                     const fs::path& out_dir);

/// dem.asc, mask_<material>.asc, ortho.ppm and their world files.
void export_terrain(const PipelineConfig& cfg, const fs::path& labeled_cloud, const fs::path& out_dir);

/// The full stage chain in work_dir: train/ and test/ scenes, models/,
/// predictions/ and reports/ with one report per mode plus
/// reports/comparison.txt. Returns the three reports in mode order.
std::vector<std::pair<std::string, MetricReport>> ablation(const PipelineConfig& cfg, const fs::path& work_dir,
                                                           const ProgressFn& progress = {});

}  // namespace groundseg::stages
