#include "groundseg/synthetic.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include <Eigen/Geometry>

#include "groundseg/error.hpp"
#include "groundseg/parallel.hpp"
#include "groundseg/raster.hpp"
#include "groundseg/rng.hpp"

namespace groundseg {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr std::array<double, 3> kOctaveWavelength{4.0, 2.0, 1.0};
constexpr std::array<double, 3> kOctaveAmplitude{1.0, 0.5, 0.25};

bool inside_polygon(const std::vector<Eigen::Vector2d>& poly, double x, double y) {
  bool in = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const auto& a = poly[i];
    const auto& b = poly[j];
    if ((a.y() > y) != (b.y() > y)) {
      const double xc = a.x() + (y - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
      if (x < xc) in = !in;
    }
  }
  return in;
}

double lattice_value(std::uint64_t seed, int octave, std::int64_t ix, std::int64_t iy) {
  const std::uint64_t key = (static_cast<std::uint64_t>(static_cast<std::uint32_t>(ix)) << 32) |
                            static_cast<std::uint32_t>(iy);
  const std::uint64_t h = derive_seed(derive_seed(seed, 100 + static_cast<std::uint64_t>(octave)), key);
  return static_cast<double>(h >> 11) * 0x1.0p-53 * 2.0 - 1.0;
}

double smooth(double t) { return t * t * (3.0 - 2.0 * t); }

/// Value noise in [-1, 1].
double value_noise(std::uint64_t seed, double x, double y) {
  double sum = 0.0, norm = 0.0;
  for (int o = 0; o < 3; ++o) {
    const double fx = x / kOctaveWavelength[o], fy = y / kOctaveWavelength[o];
    const double x0 = std::floor(fx), y0 = std::floor(fy);
    const auto ix = static_cast<std::int64_t>(x0), iy = static_cast<std::int64_t>(y0);
    const double sx = smooth(fx - x0), sy = smooth(fy - y0);
    const double v00 = lattice_value(seed, o, ix, iy), v10 = lattice_value(seed, o, ix + 1, iy);
    const double v01 = lattice_value(seed, o, ix, iy + 1), v11 = lattice_value(seed, o, ix + 1, iy + 1);
    const double a = v00 + sx * (v10 - v00), b = v01 + sx * (v11 - v01);
    sum += kOctaveAmplitude[o] * (a + sy * (b - a));
    norm += kOctaveAmplitude[o];
  }
  return sum / norm;
}

std::uint8_t clamp_channel(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

MaterialLabel label_or_throw(const SceneSpec& spec, double x, double y) {
  const auto l = region_label(spec, x, y);
  if (!l) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "scene regions do not cover (%.3f, %.3f)", x, y);
    throw ConfigError(buf);
  }
  return *l;
}

const char* material_key(MaterialLabel l) {
  switch (l) {
    case MaterialLabel::BareEarth:
      return "bare_earth";
    case MaterialLabel::Road:
      return "road";
    case MaterialLabel::Grass:
      return "grass";
    default:
      return "unlabeled";
  }
}

}  // namespace

void SceneSpec::validate() const {
  std::vector<std::string> problems;
  if (!(extent_x > 0.0) || !(extent_y > 0.0)) problems.emplace_back("extent must be positive");
  if (!(mesh_resolution > 0.0)) problems.emplace_back("mesh_resolution must be positive");
  if (!(sample_spacing > 0.0)) problems.emplace_back("sample_spacing must be positive");
  if (!(point_jitter >= 0.0)) problems.emplace_back("point_jitter must be >= 0");
  if (!(relief_amplitude >= 0.0)) problems.emplace_back("relief_amplitude must be >= 0");
  for (const double r : roughness) {
    if (!(r >= 0.0)) problems.emplace_back("roughness must be >= 0");
  }
  for (const double j : color_jitter) {
    if (!(j >= 0.0)) problems.emplace_back("color_jitter must be >= 0");
  }
  for (const double e : elevation) {
    if (!std::isfinite(e)) problems.emplace_back("elevation must be finite");
  }
  if (!(haze_distance >= 0.0)) problems.emplace_back("haze_distance must be >= 0");
  if (!(pose_error_deg >= 0.0 && pose_error_deg <= 30.0)) problems.emplace_back("pose_error_deg must be in [0, 30]");
  if (regions.empty()) problems.emplace_back("at least one region is required");
  for (const auto& r : regions) {
    if (r.polygon.size() < 3) problems.emplace_back("region polygons need at least 3 vertices");
    if (!is_labeled(r.label)) problems.emplace_back("region material must be bare_earth, road or grass");
  }
  for (const auto& p : yellow_grass) {
    if (!(p.radius > 0.0)) problems.emplace_back("yellow_grass radius must be positive");
  }
  if (!problems.empty()) {
    std::string msg = "invalid scene spec:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ConfigError(msg);
  }
}

SceneSpec default_scene_spec(std::uint64_t seed) {
  SceneSpec spec;
  spec.seed = seed;
  Rng rng(derive_seed(seed, 7));
  const double ex = spec.extent_x, ey = spec.extent_y;

  auto road = [&](bool horizontal, double offset) {
    const double angle = rng.uniform(-0.17, 0.17);
    const double half = 0.5 * rng.uniform(4.0, 5.5);
    const double len = (horizontal ? ex : ey) + 20.0;
    const Eigen::Vector2d dir = horizontal ? Eigen::Vector2d(std::cos(angle), std::sin(angle))
                                           : Eigen::Vector2d(-std::sin(angle), std::cos(angle));
    const Eigen::Vector2d normal(-dir.y(), dir.x());
    const Eigen::Vector2d mid = horizontal ? Eigen::Vector2d(0.5 * ex, offset) : Eigen::Vector2d(offset, 0.5 * ey);
    const Eigen::Vector2d a = mid - 0.5 * len * dir, b = mid + 0.5 * len * dir;
    spec.regions.push_back({{a - half * normal, b - half * normal, b + half * normal, a + half * normal},
                            MaterialLabel::Road});
  };
  road(true, rng.uniform(0.18, 0.40) * ey);
  road(true, rng.uniform(0.60, 0.82) * ey);
  road(false, rng.uniform(0.18, 0.40) * ex);
  road(false, rng.uniform(0.60, 0.82) * ex);

  for (int g = 0; g < 6; ++g) {
    const Eigen::Vector2d c(rng.uniform(0.1, 0.9) * ex, rng.uniform(0.1, 0.9) * ey);
    const double radius = rng.uniform(8.0, 16.0);
    Region blob{{}, MaterialLabel::Grass};
    constexpr int kVertices = 14;
    for (int k = 0; k < kVertices; ++k) {
      const double t = kTwoPi * k / kVertices;
      const double r = radius * rng.uniform(0.75, 1.0);
      blob.polygon.emplace_back(c.x() + r * std::cos(t), c.y() + r * std::sin(t));
    }
    spec.regions.push_back(std::move(blob));
    for (int p = 0; p < 2; ++p) {
      const double t = rng.uniform(0.0, kTwoPi);
      const double r = 0.5 * radius * rng.uniform();
      spec.yellow_grass.push_back({c + r * Eigen::Vector2d(std::cos(t), std::sin(t)), rng.uniform(4.0, 7.0)});
    }
  }
  spec.regions.push_back({{{-1.0, -1.0}, {ex + 1.0, -1.0}, {ex + 1.0, ey + 1.0}, {-1.0, ey + 1.0}},
                          MaterialLabel::BareEarth});
  return spec;
}

std::optional<MaterialLabel> region_label(const SceneSpec& spec, double x, double y) {
  for (const auto& r : spec.regions) {
    if (inside_polygon(r.polygon, x, y)) return r.label;
  }
  return std::nullopt;
}

double terrain_relief(const SceneSpec& spec, double x, double y) {
  if (spec.relief_amplitude == 0.0) return 0.0;
  const double p1 = kTwoPi * static_cast<double>(derive_seed(spec.seed, 11) >> 11) * 0x1.0p-53;
  const double p2 = kTwoPi * static_cast<double>(derive_seed(spec.seed, 12) >> 11) * 0x1.0p-53;
  return 0.5 * spec.relief_amplitude * (std::sin(kTwoPi * x / 70.0 + p1) + std::sin(kTwoPi * y / 55.0 + p2));
}

double terrain_height(const SceneSpec& spec, double x, double y) {
  const MaterialLabel l = label_or_throw(spec, x, y);
  const auto li = static_cast<std::size_t>(label_index(l));
  const double r = spec.roughness[li];
  const double base = terrain_relief(spec, x, y) + spec.elevation[li];
  return r == 0.0 ? base : base + r * value_noise(spec.seed, x, y);
}

Scene generate_scene(const SceneSpec& spec) {
  spec.validate();
  const int nx = std::max(1, static_cast<int>(std::ceil(spec.extent_x / spec.mesh_resolution - 1e-9)));
  const int ny = std::max(1, static_cast<int>(std::ceil(spec.extent_y / spec.mesh_resolution - 1e-9)));
  const auto vid = [nx](int i, int j) { return static_cast<std::uint32_t>(j * (nx + 1) + i); };

  Scene scene;
  TriangleMesh& mesh = scene.mesh;
  mesh.vertices.reserve(static_cast<std::size_t>(nx + 1) * (ny + 1));
  std::vector<Rgb> colors;
  std::vector<std::array<double, 3>> color_f;
  Rng rng(derive_seed(spec.seed, 21));
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      const double x = std::min(i * spec.mesh_resolution, spec.extent_x);
      const double y = std::min(j * spec.mesh_resolution, spec.extent_y);
      const MaterialLabel l = label_or_throw(spec, x, y);
      mesh.vertices.emplace_back(x, y, terrain_height(spec, x, y));
      const auto li = static_cast<std::size_t>(label_index(l));
      Rgb base = spec.base_color[li];
      if (l == MaterialLabel::Grass) {
        for (const auto& p : spec.yellow_grass) {
          if ((Eigen::Vector2d(x, y) - p.center).norm() <= p.radius) {
            base = spec.yellow_grass_color;
            break;
          }
        }
      }
      const double s = spec.color_jitter[li];
      const double dr = s * rng.normal(), dg = s * rng.normal(), db = s * rng.normal();
      const Rgb c{clamp_channel(base.r + dr), clamp_channel(base.g + dg), clamp_channel(base.b + db)};
      colors.push_back(c);
      color_f.push_back({static_cast<double>(c.r), static_cast<double>(c.g), static_cast<double>(c.b)});
    }
  }
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      mesh.triangles.push_back({vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)});
      mesh.triangles.push_back({vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)});
    }
  }
  mesh.colors = std::move(colors);

  // Jittered stratified samples on the triangulated surface.
  const int sx = std::max(1, static_cast<int>(std::floor(spec.extent_x / spec.sample_spacing)));
  const int sy = std::max(1, static_cast<int>(std::floor(spec.extent_y / spec.sample_spacing)));
  const double cell_x = spec.extent_x / sx, cell_y = spec.extent_y / sy;
  std::vector<Eigen::Vector3d> pts;
  std::vector<Rgb> pcolors;
  std::vector<MaterialLabel> labels;
  pts.reserve(static_cast<std::size_t>(sx) * sy);
  pcolors.reserve(pts.capacity());
  labels.reserve(pts.capacity());
  for (int j = 0; j < sy; ++j) {
    for (int i = 0; i < sx; ++i) {
      const double x = (i + rng.uniform()) * cell_x;
      const double y = (j + rng.uniform()) * cell_y;
      const double gx = x / spec.mesh_resolution, gy = y / spec.mesh_resolution;
      const int ci = std::clamp(static_cast<int>(gx), 0, nx - 1), cj = std::clamp(static_cast<int>(gy), 0, ny - 1);
      const double s = std::clamp(gx - ci, 0.0, 1.0), t = std::clamp(gy - cj, 0.0, 1.0);
      const std::uint32_t a = vid(ci, cj), b = vid(ci + 1, cj), c = vid(ci + 1, cj + 1), d = vid(ci, cj + 1);
      // Barycentric weights on the triangle containing (s, t).
      std::array<std::pair<std::uint32_t, double>, 3> w;
      if (s >= t) {
        w = {{{a, 1.0 - s}, {b, s - t}, {c, t}}};
      } else {
        w = {{{a, 1.0 - t}, {c, s}, {d, t - s}}};
      }
      double z = 0.0;
      std::array<double, 3> col{0.0, 0.0, 0.0};
      for (const auto& [v, wt] : w) {
        z += wt * mesh.vertices[v].z();
        for (int k = 0; k < 3; ++k) col[static_cast<std::size_t>(k)] += wt * color_f[v][static_cast<std::size_t>(k)];
      }
      z += spec.point_jitter * rng.normal();
      pts.emplace_back(x, y, z);
      pcolors.push_back({clamp_channel(col[0]), clamp_channel(col[1]), clamp_channel(col[2])});
      labels.push_back(label_or_throw(spec, x, y));
    }
  }
  scene.cloud = PointCloud(std::move(pts), std::move(pcolors), std::move(labels), spec.sample_spacing);
  return scene;
}

// ---------------------------------------------------------------- spec file

void write_scene_spec(const SceneSpec& spec, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write scene spec " + path.string());
  char buf[256];
  auto num = [&](double v) { return std::string(buf, std::to_chars(buf, buf + sizeof buf, v).ptr); };
  auto rgb = [](const Rgb& c) {
    return std::to_string(c.r) + " " + std::to_string(c.g) + " " + std::to_string(c.b);
  };
  os << "# groundseg scene spec\n";
  os << "extent = " << num(spec.extent_x) << " " << num(spec.extent_y) << "\n";
  os << "seed = " << spec.seed << "\n";
  os << "mesh_resolution = " << num(spec.mesh_resolution) << "\n";
  os << "relief_amplitude = " << num(spec.relief_amplitude) << "\n";
  os << "sample_spacing = " << num(spec.sample_spacing) << "\n";
  os << "point_jitter = " << num(spec.point_jitter) << "\n";
  os << "roughness =";
  for (const double r : spec.roughness) os << " " << num(r);
  os << "\nelevation =";
  for (const double r : spec.elevation) os << " " << num(r);
  os << "\ncolor_jitter =";
  for (const double r : spec.color_jitter) os << " " << num(r);
  os << "\nhaze_distance = " << num(spec.haze_distance) << "\n";
  os << "haze_color = " << rgb(spec.haze_color) << "\n";
  os << "pose_error_deg = " << num(spec.pose_error_deg) << "\n";
  for (int k = 0; k < kNumClasses; ++k) {
    os << "color." << material_key(static_cast<MaterialLabel>(k)) << " = "
       << rgb(spec.base_color[static_cast<std::size_t>(k)]) << "\n";
  }
  os << "yellow_grass_color = " << rgb(spec.yellow_grass_color) << "\n";
  for (const auto& p : spec.yellow_grass) {
    os << "yellow_grass = " << num(p.center.x()) << " " << num(p.center.y()) << " " << num(p.radius) << "\n";
  }
  for (const auto& r : spec.regions) {
    os << "region = " << material_key(r.label) << " :";
    for (const auto& v : r.polygon) os << " " << num(v.x()) << " " << num(v.y());
    os << "\n";
  }
  if (!os) throw IoError("failed writing scene spec " + path.string());
}

SceneSpec read_scene_spec(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw MissingInputError("scene spec not found: " + path.string());
  SceneSpec spec;
  spec.regions.clear();
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string& why) {
    throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + why);
  };
  auto read_rgb = [&](std::istream& in) {
    int r, g, b;
    if (!(in >> r >> g >> b) || r < 0 || r > 255 || g < 0 || g > 255 || b < 0 || b > 255) fail("bad color");
    return Rgb{static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g), static_cast<std::uint8_t>(b)};
  };
  auto material = [&](const std::string& name) {
    for (int k = 0; k < kNumClasses; ++k) {
      if (name == material_key(static_cast<MaterialLabel>(k))) return static_cast<MaterialLabel>(k);
    }
    fail("unknown material '" + name + "'");
    return MaterialLabel::Unlabeled;
  };
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (eq == std::string::npos) fail("expected key = value");
    std::string key = line.substr(0, eq);
    key.erase(key.find_last_not_of(" \t") + 1);
    key.erase(0, key.find_first_not_of(" \t"));
    std::istringstream v(line.substr(eq + 1));
    bool ok = true;
    if (key == "extent") {
      ok = static_cast<bool>(v >> spec.extent_x >> spec.extent_y);
    } else if (key == "seed") {
      ok = static_cast<bool>(v >> spec.seed);
    } else if (key == "mesh_resolution") {
      ok = static_cast<bool>(v >> spec.mesh_resolution);
    } else if (key == "relief_amplitude") {
      ok = static_cast<bool>(v >> spec.relief_amplitude);
    } else if (key == "sample_spacing") {
      ok = static_cast<bool>(v >> spec.sample_spacing);
    } else if (key == "point_jitter") {
      ok = static_cast<bool>(v >> spec.point_jitter);
    } else if (key == "roughness") {
      ok = static_cast<bool>(v >> spec.roughness[0] >> spec.roughness[1] >> spec.roughness[2]);
    } else if (key == "elevation") {
      ok = static_cast<bool>(v >> spec.elevation[0] >> spec.elevation[1] >> spec.elevation[2]);
    } else if (key == "haze_distance") {
      ok = static_cast<bool>(v >> spec.haze_distance);
    } else if (key == "haze_color") {
      spec.haze_color = read_rgb(v);
    } else if (key == "pose_error_deg") {
      ok = static_cast<bool>(v >> spec.pose_error_deg);
    } else if (key == "color_jitter") {
      ok = static_cast<bool>(v >> spec.color_jitter[0] >> spec.color_jitter[1] >> spec.color_jitter[2]);
    } else if (key.rfind("color.", 0) == 0) {
      spec.base_color[static_cast<std::size_t>(label_index(material(key.substr(6))))] = read_rgb(v);
    } else if (key == "yellow_grass_color") {
      spec.yellow_grass_color = read_rgb(v);
    } else if (key == "yellow_grass") {
      ColorPatch p;
      ok = static_cast<bool>(v >> p.center.x() >> p.center.y() >> p.radius);
      spec.yellow_grass.push_back(p);
    } else if (key == "region") {
      std::string name, colon;
      if (!(v >> name >> colon) || colon != ":") fail("expected 'region = <material> : x y ...'");
      Region r{{}, material(name)};
      double x, y;
      while (v >> x) {
        if (!(v >> y)) fail("odd number of polygon coordinates");
        r.polygon.emplace_back(x, y);
      }
      if (!v.eof()) fail("bad polygon coordinate");
      spec.regions.push_back(std::move(r));
    } else {
      fail("unknown key '" + key + "'");
    }
    if (!ok) fail("bad value for '" + key + "'");
  }
  spec.validate();
  return spec;
}

// ---------------------------------------------------------------- flights

void FlightSpec::validate() const {
  std::vector<std::string> problems;
  if (!(altitude >= 70.0 && altitude <= 400.0)) problems.emplace_back("altitude must be within [70, 400]");
  if (!(scale > 0.0)) problems.emplace_back("scale must be positive");
  if (!(overlap >= 0.70 && overlap <= 0.85)) problems.emplace_back("overlap must be within [0.70, 0.85]");
  if (image_width <= 0 || image_height <= 0) problems.emplace_back("image dimensions must be positive");
  if (!(fx > 0.0) || !(fy > 0.0)) problems.emplace_back("focal lengths must be positive");
  if (!problems.empty()) {
    std::string msg = "invalid flight spec:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ConfigError(msg);
  }
}

namespace {

std::vector<double> axis_positions(double extent, double footprint, double spacing, const char* axis,
                                   std::vector<std::string>& warnings) {
  if (extent < footprint) {
    warnings.push_back(std::string("extent along ") + axis + " is smaller than one footprint; using a single centered view");
    return {0.5 * extent};
  }
  const int n = static_cast<int>(std::floor((extent - footprint) / spacing + 1e-6)) + 4;
  std::vector<double> out;
  const double start = 0.5 * extent - 0.5 * (n - 1) * spacing;
  for (int i = 0; i < n; ++i) out.push_back(start + i * spacing);
  return out;
}

}  // namespace

FlightPlan plan_flight(const FlightSpec& spec, double extent_x, double extent_y, double ground_z) {
  spec.validate();
  if (!(extent_x > 0.0) || !(extent_y > 0.0)) throw ArgumentError("plan_flight: extent must be positive");
  FlightPlan plan;
  const double fx_m = spec.footprint_x(), fy_m = spec.footprint_y();
  const auto xs = axis_positions(extent_x, fx_m, fx_m * (1.0 - spec.overlap), "x", plan.warnings);
  const auto ys = axis_positions(extent_y, fy_m, fy_m * (1.0 - spec.overlap), "y", plan.warnings);
  Eigen::Matrix3d R;
  R << 1, 0, 0, 0, -1, 0, 0, 0, -1;
  const double z = ground_z + spec.flown_altitude();
  int id = 0;
  for (std::size_t row = 0; row < ys.size(); ++row) {
    for (std::size_t k = 0; k < xs.size(); ++k) {
      const double x = row % 2 == 0 ? xs[k] : xs[xs.size() - 1 - k];
      CameraView v;
      char name[64];
      std::snprintf(name, sizeof name, "%s_%04d", spec.id_prefix.c_str(), id++);
      v.image_id = name;
      v.width = spec.image_width;
      v.height = spec.image_height;
      v.fx = spec.fx;
      v.fy = spec.fy;
      v.cx = 0.5 * spec.image_width;
      v.cy = 0.5 * spec.image_height;
      v.rotation = R;
      v.translation = -R * Eigen::Vector3d(x, ys[row], z);
      plan.views.push_back(std::move(v));
    }
  }
  return plan;
}

std::vector<CameraView> perturb_poses(const std::vector<CameraView>& views, const SceneSpec& spec) {
  std::vector<CameraView> out = views;
  if (spec.pose_error_deg == 0.0) return out;
  const double sd = spec.pose_error_deg * std::numbers::pi / 180.0;
  Rng rng(derive_seed(spec.seed, 77));
  for (auto& v : out) {
    const Eigen::Vector3d c = v.center();
    const Eigen::Vector3d w(rng.normal(), rng.normal(), rng.normal());
    v.rotation = Eigen::AngleAxisd(sd * w.norm(), w.normalized()).toRotationMatrix() * v.rotation;
    v.translation = -v.rotation * c;
  }
  return out;
}

std::vector<RenderedView> render_dataset(const std::vector<CameraView>& views, const TriangleMesh& mesh,
                                         const SceneSpec& spec) {
  if (!mesh.colors) throw ArgumentError("render_dataset: mesh has no vertex colors");
  std::vector<RenderedView> out(views.size());
  parallel_for(views.size(), [&](std::size_t i) {
    const RasterBuffers rb = rasterize(views[i], mesh);
    RenderedView& r = out[i];
    r.depth = depth_from(rb);
    r.color = color_from(rb, mesh);
    r.labels = LabelMask(rb.width, rb.height, MaterialLabel::Unlabeled);
    for (int y = 0; y < rb.height; ++y) {
      for (int x = 0; x < rb.width; ++x) {
        if (!rb.covered(x, y)) continue;
        const Eigen::Vector3d p = surface_point(rb, mesh, x, y);
        r.labels.at(x, y) = region_label(spec, p.x(), p.y()).value_or(MaterialLabel::Unlabeled);
        if (spec.haze_distance > 0.0) {
          const double keep = std::exp(-r.depth.at(x, y) / spec.haze_distance);
          Rgb& c = r.color.at(x, y);
          c = {clamp_channel(keep * c.r + (1.0 - keep) * spec.haze_color.r),
               clamp_channel(keep * c.g + (1.0 - keep) * spec.haze_color.g),
               clamp_channel(keep * c.b + (1.0 - keep) * spec.haze_color.b)};
        }
      }
    }
  });
  return out;
}

}  // namespace groundseg
