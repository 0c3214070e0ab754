#include "groundseg/export.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "groundseg/error.hpp"

namespace groundseg {

LabelMask backproject_labels(const PointCloud& cloud, const CameraView& view, const DepthMap& depth,
                             const BackprojectConfig& cfg) {
  if (!cloud.has_labels()) throw ArgumentError("backproject_labels: cloud has no labels");
  if (depth.width != view.width || depth.height != view.height) {
    throw ArgumentError("backproject_labels: depth map " + std::to_string(depth.width) + "x" +
                        std::to_string(depth.height) + " does not match view " + view.image_id + " (" +
                        std::to_string(view.width) + "x" + std::to_string(view.height) + ")");
  }
  if (cfg.splat_radius < 0) throw ArgumentError("backproject_labels: splat_radius must be >= 0");
  const int r = cfg.splat_radius;
  LabelMask mask(view.width, view.height, MaterialLabel::Unlabeled);
  // Best (squared splat distance, point depth) per pixel; point order breaks ties.
  std::vector<int> best_dist(mask.pixels.size(), std::numeric_limits<int>::max());
  std::vector<double> best_depth(mask.pixels.size(), kNoSurface);
  const auto& labels = cloud.labels();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (!is_labeled(labels[i])) continue;
    const auto proj = project(view, cloud.position(i));
    if (!proj) continue;
    const auto px = nearest_pixel(view, proj->pixel);
    if (!px) continue;
    for (int dy = -r; dy <= r; ++dy) {
      for (int dx = -r; dx <= r; ++dx) {
        const int d2 = dx * dx + dy * dy;
        if (d2 > r * r) continue;
        const int x = px->x() + dx, y = px->y() + dy;
        if (!mask.contains(x, y)) continue;
        const double surface = depth.at(x, y);
        if (!std::isfinite(surface) || std::abs(proj->depth - surface) > cfg.depth_prune_threshold) continue;
        const std::size_t k = static_cast<std::size_t>(y) * mask.width + x;
        if (d2 < best_dist[k] || (d2 == best_dist[k] && proj->depth < best_depth[k])) {
          best_dist[k] = d2;
          best_depth[k] = proj->depth;
          mask.pixels[k] = labels[i];
        }
      }
    }
  }
  return mask;
}

std::optional<std::pair<int, int>> RasterGrid::cell_of(double x, double y) const {
  const double fc = std::floor((x - origin_x) / cell_size);
  const double fr = std::floor((y - origin_y) / cell_size);
  if (fc < 0 || fr < 0 || fc >= width || fr >= height) return std::nullopt;
  return std::make_pair(static_cast<int>(fc), height - 1 - static_cast<int>(fr));
}

RasterGrid grid_for(const PointCloud& cloud, double cell_size) {
  if (cloud.empty()) throw ArgumentError("raster export: empty cloud");
  if (!(cell_size > 0.0)) throw ArgumentError("raster export: cell_size must be positive");
  const Eigen::Vector3d lo = cloud.min_corner(), hi = cloud.max_corner();
  RasterGrid g;
  g.cell_size = cell_size;
  g.origin_x = lo.x();
  g.origin_y = lo.y();
  g.width = static_cast<int>(std::floor((hi.x() - lo.x()) / cell_size)) + 1;
  g.height = static_cast<int>(std::floor((hi.y() - lo.y()) / cell_size)) + 1;
  return g;
}

namespace {

void check_grid(const RasterGrid& g) {
  if (g.width <= 0 || g.height <= 0 || !(g.cell_size > 0.0)) throw ArgumentError("raster export: invalid grid");
}

std::size_t cell_index(const RasterGrid& g, const std::pair<int, int>& cr) {
  return static_cast<std::size_t>(cr.second) * g.width + cr.first;
}

}  // namespace

Raster export_dem(const PointCloud& cloud, double cell_size) { return export_dem(cloud, grid_for(cloud, cell_size)); }

Raster export_dem(const PointCloud& cloud, const RasterGrid& grid) {
  if (cloud.empty()) throw ArgumentError("export_dem: empty cloud");
  check_grid(grid);
  const std::size_t n = static_cast<std::size_t>(grid.width) * grid.height;
  std::vector<double> sum(n, 0.0);
  std::vector<std::size_t> count(n, 0);
  for (const auto& p : cloud.positions()) {
    const auto c = grid.cell_of(p.x(), p.y());
    if (!c) continue;
    const std::size_t k = cell_index(grid, *c);
    sum[k] += p.z();
    ++count[k];
  }
  Raster r{grid, std::vector<double>(n, kNoData)};
  for (std::size_t k = 0; k < n; ++k) {
    if (count[k]) r.values[k] = sum[k] / static_cast<double>(count[k]);
  }
  return r;
}

MaterialMasks export_material_masks(const PointCloud& cloud, double cell_size) {
  return export_material_masks(cloud, grid_for(cloud, cell_size));
}

MaterialMasks export_material_masks(const PointCloud& cloud, const RasterGrid& grid) {
  if (!cloud.has_labels()) throw ArgumentError("export_material_masks: cloud has no labels");
  check_grid(grid);
  const std::size_t n = static_cast<std::size_t>(grid.width) * grid.height;
  std::vector<std::array<std::size_t, kNumClasses>> votes(n, std::array<std::size_t, kNumClasses>{});
  bool any = false;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const MaterialLabel l = cloud.labels()[i];
    if (!is_labeled(l)) continue;
    const auto c = grid.cell_of(cloud.position(i).x(), cloud.position(i).y());
    if (!c) continue;
    ++votes[cell_index(grid, *c)][static_cast<std::size_t>(label_index(l))];
    any = true;
  }
  if (!any) throw ArgumentError("export_material_masks: cloud has no labeled points");
  MaterialMasks m{{grid, std::vector<double>(n, kNoData)},
                  {grid, std::vector<double>(n, kNoData)},
                  {grid, std::vector<double>(n, kNoData)}};
  std::array<Raster*, kNumClasses> out{&m.bare_earth, &m.road, &m.grass};
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < kNumClasses; ++c) {
      if (votes[k][c] > votes[k][best]) best = c;
    }
    if (votes[k][best] == 0) continue;
    for (std::size_t c = 0; c < kNumClasses; ++c) out[c]->values[k] = c == best ? 1.0 : 0.0;
  }
  return m;
}

Orthophoto export_orthophoto(const PointCloud& cloud, double cell_size) {
  return export_orthophoto(cloud, grid_for(cloud, cell_size));
}

Orthophoto export_orthophoto(const PointCloud& cloud, const RasterGrid& grid) {
  if (!cloud.has_colors()) throw ArgumentError("export_orthophoto: cloud has no colors");
  check_grid(grid);
  Orthophoto o{grid, RgbImage(grid.width, grid.height), {}};
  o.valid.assign(o.image.pixels.size(), 0);
  std::vector<double> top(o.image.pixels.size(), -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.position(i);
    const auto c = grid.cell_of(p.x(), p.y());
    if (!c) continue;
    const std::size_t k = cell_index(grid, *c);
    if (!o.valid[k] || p.z() > top[k]) {
      top[k] = p.z();
      o.valid[k] = 1;
      o.image.pixels[k] = cloud.colors()[i];
    }
  }
  return o;
}

Orthophoto export_orthophoto(const TriangleMesh& mesh, const RasterGrid& grid) {
  if (!mesh.colors) throw ArgumentError("export_orthophoto: mesh has no vertex colors");
  check_grid(grid);
  Orthophoto o{grid, RgbImage(grid.width, grid.height), {}};
  o.valid.assign(o.image.pixels.size(), 0);
  std::vector<double> top(o.image.pixels.size(), -std::numeric_limits<double>::infinity());
  const auto& col = *mesh.colors;
  for (const auto& t : mesh.triangles) {
    const Eigen::Vector3d& a = mesh.vertices[t[0]];
    const Eigen::Vector3d& b = mesh.vertices[t[1]];
    const Eigen::Vector3d& c = mesh.vertices[t[2]];
    const double det = (b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y());
    if (std::abs(det) < 1e-15) continue;  // vertical in plan view
    const double xmin = std::min({a.x(), b.x(), c.x()}), xmax = std::max({a.x(), b.x(), c.x()});
    const double ymin = std::min({a.y(), b.y(), c.y()}), ymax = std::max({a.y(), b.y(), c.y()});
    const int c0 = std::max(0, static_cast<int>(std::ceil((xmin - grid.origin_x) / grid.cell_size - 0.5)));
    const int c1 = std::min(grid.width - 1, static_cast<int>(std::floor((xmax - grid.origin_x) / grid.cell_size - 0.5)));
    const int r0 = std::max(0, static_cast<int>(std::ceil((ymin - grid.origin_y) / grid.cell_size - 0.5)));
    const int r1 = std::min(grid.height - 1, static_cast<int>(std::floor((ymax - grid.origin_y) / grid.cell_size - 0.5)));
    for (int rr = r0; rr <= r1; ++rr) {
      const double y = grid.origin_y + (rr + 0.5) * grid.cell_size;
      for (int cc = c0; cc <= c1; ++cc) {
        const double x = grid.origin_x + (cc + 0.5) * grid.cell_size;
        const double w1 = ((x - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (y - a.y())) / det;
        const double w2 = ((b.x() - a.x()) * (y - a.y()) - (x - a.x()) * (b.y() - a.y())) / det;
        const double w0 = 1.0 - w1 - w2;
        if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;
        const double z = w0 * a.z() + w1 * b.z() + w2 * c.z();
        const std::size_t k = static_cast<std::size_t>(grid.height - 1 - rr) * grid.width + cc;
        if (o.valid[k] && z <= top[k]) continue;
        top[k] = z;
        o.valid[k] = 1;
        auto mix = [&](std::uint8_t Rgb::*ch) {
          const double v = w0 * (col[t[0]].*ch) + w1 * (col[t[1]].*ch) + w2 * (col[t[2]].*ch);
          return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
        };
        o.image.pixels[k] = Rgb{mix(&Rgb::r), mix(&Rgb::g), mix(&Rgb::b)};
      }
    }
  }
  return o;
}

void write_esri_ascii(const Raster& raster, const std::filesystem::path& path) {
  check_grid(raster.grid);
  std::ofstream os(path);
  if (!os) throw IoError("cannot write raster " + path.string());
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  const auto& g = raster.grid;
  os << "ncols " << g.width << "\nnrows " << g.height << "\nxllcorner " << num(g.origin_x) << "\nyllcorner "
     << num(g.origin_y) << "\ncellsize " << num(g.cell_size) << "\nNODATA_value " << num(kNoData) << "\n";
  for (int r = 0; r < g.height; ++r) {
    for (int c = 0; c < g.width; ++c) {
      if (c) os << ' ';
      os << num(raster.at(c, r));
    }
    os << '\n';
  }
  if (!os) throw IoError("failed writing raster " + path.string());
}

Raster read_esri_ascii(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw MissingInputError("raster not found: " + path.string());
  Raster r;
  double nodata = kNoData;
  const char* keys[] = {"ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "NODATA_value"};
  for (const char* expected : keys) {
    std::string key;
    double v;
    if (!(is >> key >> v) || key != expected) {
      throw ParseError(path.string() + ": expected header key '" + expected + "'");
    }
    if (key == "ncols") r.grid.width = static_cast<int>(v);
    if (key == "nrows") r.grid.height = static_cast<int>(v);
    if (key == "xllcorner") r.grid.origin_x = v;
    if (key == "yllcorner") r.grid.origin_y = v;
    if (key == "cellsize") r.grid.cell_size = v;
    if (key == "NODATA_value") nodata = v;
  }
  check_grid(r.grid);
  r.values.resize(static_cast<std::size_t>(r.grid.width) * r.grid.height);
  for (std::size_t i = 0; i < r.values.size(); ++i) {
    if (!(is >> r.values[i])) {
      throw ParseError(path.string() + ": expected " + std::to_string(r.values.size()) + " cell values, got " +
                       std::to_string(i));
    }
    if (r.values[i] == nodata) r.values[i] = kNoData;
  }
  return r;
}

void write_world_file(const RasterGrid& grid, const std::filesystem::path& path) {
  check_grid(grid);
  std::ofstream os(path);
  if (!os) throw IoError("cannot write world file " + path.string());
  char buf[256];
  std::snprintf(buf, sizeof buf, "%.17g\n0\n0\n%.17g\n%.17g\n%.17g\n", grid.cell_size, -grid.cell_size,
                grid.origin_x + 0.5 * grid.cell_size, grid.origin_y + (grid.height - 0.5) * grid.cell_size);
  os << buf;
  if (!os) throw IoError("failed writing world file " + path.string());
}

}  // namespace groundseg
