#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "groundseg/camera.hpp"
#include "groundseg/image.hpp"
#include "groundseg/mesh.hpp"
#include "groundseg/point_cloud.hpp"

namespace groundseg {

struct Region {
  std::vector<Eigen::Vector2d> polygon;
  MaterialLabel label = MaterialLabel::BareEarth;
};

/// Grass area rendered in a dry, soil-like color. Only changes colors;
/// labels still come from the region layout.
struct ColorPatch {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double radius = 0.0;
};

/// Procedural terrain description. The height field is
///   relief(x, y) + elevation[material] + roughness[material] * noise(x, y)
/// where relief is a smooth two-wave undulation of amplitude
/// relief_amplitude and noise is 3-octave value noise (wavelengths 4, 2 and
/// 1 m) normalized to [-1, 1].
struct SceneSpec {
  double extent_x = 100.0;
  double extent_y = 100.0;
  std::uint64_t seed = 1;
  /// Point-in-polygon lookups use the first region containing the point.
  std::vector<Region> regions;
  /// Grass is a lumpy canopy standing above the soil; roads are graded flat.
  std::array<double, kNumClasses> roughness{0.15, 0.02, 0.5};
  /// Constant height offset per material.
  std::array<double, kNumClasses> elevation{0.0, 0.0, 0.6};
  std::array<Rgb, kNumClasses> base_color{Rgb{140, 112, 82}, Rgb{112, 110, 106}, Rgb{82, 124, 62}};
  /// Standard deviation of per-vertex color noise, per material.
  std::array<double, kNumClasses> color_jitter{5.6, 3.2, 5.6};
  /// Dry grass looks exactly like bare soil from the air.
  std::vector<ColorPatch> yellow_grass;
  Rgb yellow_grass_color{140, 112, 82};
  double mesh_resolution = 0.5;
  double relief_amplitude = 0.0;
  /// Cloud sampling: one jittered sample per cell of this size, with normal
  /// vertical noise of standard deviation point_jitter.
  double sample_spacing = 0.15;
  double point_jitter = 0.02;
  /// Rendered colors fade toward haze_color as exp(-depth / haze_distance);
  /// zero disables haze.
  double haze_distance = 0.0;
  Rgb haze_color{178, 184, 192};
  /// Images are taken from poses that differ from the recorded cameras by a
  /// random rotation whose rotation vector has this per-axis standard
  /// deviation, in degrees (aerial-triangulation error). The ground offset
  /// it causes grows with distance to the camera.
  double pose_error_deg = 3.0;

  void validate() const;
};

/// The default layout for a seed: a bare-earth background, four narrow
/// roads crossing the extent, irregular grass fields and dry-grass patches.
SceneSpec default_scene_spec(std::uint64_t seed);

/// Material of the first region containing (x, y), if any.
std::optional<MaterialLabel> region_label(const SceneSpec& spec, double x, double y);

/// Relief plus material noise at (x, y), before triangulation.
double terrain_height(const SceneSpec& spec, double x, double y);
double terrain_relief(const SceneSpec& spec, double x, double y);

struct Scene {
  TriangleMesh mesh;
  PointCloud cloud;
};

/// Throws ConfigError when a queried location lies outside every region.
Scene generate_scene(const SceneSpec& spec);

/// key = value text form. Region lines read
/// `region = <road|grass|bare_earth> : x1 y1 x2 y2 ...`.
void write_scene_spec(const SceneSpec& spec, const std::filesystem::path& path);
SceneSpec read_scene_spec(const std::filesystem::path& path);

struct FlightSpec {
  /// Paper-scale altitude above ground, in [70, 400] m.
  double altitude = 70.0;
  /// Multiplies the altitude to obtain the flown desk-scale altitude.
  double scale = 0.25;
  /// Forward and side overlap between neighboring frames, in [0.70, 0.85].
  double overlap = 0.70;
  int image_width = 82;
  int image_height = 64;
  double fx = 64.0;
  double fy = 64.0;
  std::string id_prefix = "view";

  void validate() const;
  double flown_altitude() const { return altitude * scale; }
  double footprint_x() const { return image_width / fx * flown_altitude(); }
  double footprint_y() const { return image_height / fy * flown_altitude(); }
};

struct FlightPlan {
  std::vector<CameraView> views;
  std::vector<std::string> warnings;
};

/// Nadir lawnmower grid over [0, extent_x] x [0, extent_y] at height
/// ground_z + flown altitude. Spacing is footprint * (1 - overlap) on both
/// axes; the grid is centered and extends one spacing beyond the minimal
/// covering grid on each side so border points are seen at least twice per
/// axis. An extent smaller than the footprint gets a single centered view on
/// that axis and a warning.
FlightPlan plan_flight(const FlightSpec& spec, double extent_x, double extent_y, double ground_z = 0.0);

struct RenderedView {
  RgbImage color;
  DepthMap depth;
  LabelMask labels;
};

/// The poses the images are actually taken from: each view rotated about its
/// center by an independent random rotation (see SceneSpec::pose_error_deg).
/// Seeded by spec.seed; views are perturbed in order.
std::vector<CameraView> perturb_poses(const std::vector<CameraView>& views, const SceneSpec& spec);

/// Color, depth and ground-truth material per view from one shared
/// rasterization; labels come from the region layout at the hit point.
/// Renders exactly the given poses.
std::vector<RenderedView> render_dataset(const std::vector<CameraView>& views, const TriangleMesh& mesh,
                                         const SceneSpec& spec);

}  // namespace groundseg
