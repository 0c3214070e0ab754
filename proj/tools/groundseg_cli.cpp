// groundseg command-line driver: one subcommand per pipeline stage.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "groundseg/error.hpp"
#include "groundseg/parallel.hpp"
#include "groundseg/stages.hpp"

namespace fs = std::filesystem;
using namespace groundseg;

namespace {

enum ExitCode { kOk = 0, kOther = 1, kConfig = 2, kMissing = 3, kNumerical = 4 };

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string mode;
  int threads = 1;
  bool quiet = false;
};

PipelineConfig load(const Common& c) {
  PipelineConfig cfg = c.config.empty() ? PipelineConfig{} : load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.mode.empty()) cfg.mode = parse_mode(c.mode);
  cfg.validate();
  return cfg;
}

ProgressFn progress(const Common& c) {
  if (c.quiet) return {};
  return [](const std::string& m) { std::cerr << m << "\n"; };
}

void add_common(CLI::App* app, Common& c, bool with_mode) {
  app->add_option("-c,--config", c.config, "pipeline config (INI)");
  app->add_option("--seed", c.seed, "override [run] seed");
  if (with_mode) app->add_option("--mode", c.mode, "2d-only | 2d3d-maxpool | 2d3d-depthpool");
  app->add_option("--threads", c.threads, "worker threads; results do not depend on it")->check(CLI::PositiveNumber);
  app->add_flag("-q,--quiet", c.quiet, "no progress output");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ground-material segmentation of aerial point clouds with multi-view image features."};
  app.require_subcommand(1);
  app.set_version_flag("--version", GROUNDSEG_VERSION);

  Common common;
  std::string scene, split = "train", out, backbone, net3d, truth, pred, cloud;

  auto* synth = app.add_subcommand("synth-gen", "generate a synthetic scene: mesh, dense cloud, cameras, images, masks");
  add_common(synth, common, false);
  synth->add_option("--split", split, "train or test (selects the scene seed)")->check(CLI::IsMember({"train", "test"}));
  synth->add_option("-o,--out", scene, "scene directory")->required();

  CLI::App* scene_stage[4];
  const char* names[4][2] = {{"downsample", "grid-downsample cloud_dense.ply into cloud.ply"},
                             {"voxelize", "chunk and voxelize cloud.ply into grid.txt"},
                             {"render-depth", "render a ground-layer depth map per camera"},
                             {"associate", "select up to max_views views per occupied voxel"}};
  for (int i = 0; i < 4; ++i) {
    scene_stage[i] = app.add_subcommand(names[i][0], names[i][1]);
    add_common(scene_stage[i], common, false);
    scene_stage[i]->add_option("-s,--scene", scene, "scene directory")->required();
  }

  auto* t2 = app.add_subcommand("train-2d", "train the image backbone on a training scene");
  add_common(t2, common, false);
  t2->add_option("-s,--scene", scene, "training scene directory")->required();
  t2->add_option("-o,--out", out, "backbone checkpoint")->required();

  auto* t3 = app.add_subcommand("train-3d", "train the 3D network on pooled backbone features");
  add_common(t3, common, true);
  t3->add_option("-s,--scene", scene, "training scene directory")->required();
  t3->add_option("--backbone", backbone, "backbone checkpoint from train-2d")->required();
  t3->add_option("-o,--out", out, "3D network checkpoint")->required();

  auto* pr = app.add_subcommand("predict", "label a scene's cloud; writes labeled and palette-colored PLY files");
  add_common(pr, common, true);
  pr->add_option("-s,--scene", scene, "scene directory")->required();
  pr->add_option("--backbone", backbone, "backbone checkpoint")->required();
  pr->add_option("--net3d", net3d, "3D network checkpoint (not used in 2d-only mode)");
  pr->add_option("-o,--out", out, "labeled PLY")->required();

  auto* ev = app.add_subcommand("evaluate", "precision / recall / F1 / IoU of a prediction against ground truth");
  ev->add_option("--truth", truth, "labeled ground-truth PLY")->required();
  ev->add_option("--pred", pred, "predicted PLY with the same points")->required();
  ev->add_option("-o,--out", out, "report prefix (writes .txt and .csv)")->required();
  ev->add_option("--threads", common.threads)->check(CLI::PositiveNumber);

  auto* an = app.add_subcommand("annotate-images", "back-project a labeled cloud into every view as label masks");
  add_common(an, common, false);
  an->add_option("-s,--scene", scene, "scene directory with cameras and depth maps")->required();
  an->add_option("--cloud", cloud, "labeled cloud")->required();
  an->add_option("-o,--out", out, "output directory")->required();

  auto* ex = app.add_subcommand("export-terrain", "DEM, material masks and orthophoto rasters for engine import");
  add_common(ex, common, false);
  ex->add_option("--cloud", cloud, "labeled, colored cloud")->required();
  ex->add_option("-o,--out", out, "output directory")->required();

  auto* ab = app.add_subcommand("ablation", "run every stage for the three experiment arms and compare them");
  add_common(ab, common, false);
  ab->add_option("-o,--out", out, "work directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Help and version requests exit 0; usage errors count as config errors.
    return app.exit(e) == 0 ? kOk : kConfig;
  }

  try {
    set_thread_count(common.threads);
    if (synth->parsed()) {
      stages::synth_gen(load(common), stages::parse_split(split), scene);
    } else if (scene_stage[0]->parsed()) {
      stages::downsample(load(common), scene);
    } else if (scene_stage[1]->parsed()) {
      stages::voxelize(load(common), scene);
    } else if (scene_stage[2]->parsed()) {
      stages::render_depth(load(common), scene);
    } else if (scene_stage[3]->parsed()) {
      stages::associate(load(common), scene);
    } else if (t2->parsed()) {
      stages::train_2d(load(common), scene, out, progress(common));
    } else if (t3->parsed()) {
      stages::train_3d(load(common), scene, backbone, out, progress(common));
    } else if (pr->parsed()) {
      stages::predict(load(common), scene, backbone, net3d, out);
    } else if (ev->parsed()) {
      std::cout << format_report(stages::evaluate(truth, pred, out));
    } else if (an->parsed()) {
      stages::annotate_images(load(common), scene, cloud, out);
    } else if (ex->parsed()) {
      stages::export_terrain(load(common), cloud, out);
    } else if (ab->parsed()) {
      const auto reports = stages::ablation(load(common), out, progress(common));
      for (const auto& [name, r] : reports) std::cout << "== " << name << "\n" << format_report(r) << "\n";
      std::cout << format_comparison(reports);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const MissingInputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kMissing;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kOther;
  }
  return kOk;
}
