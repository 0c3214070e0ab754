#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "groundseg/camera.hpp"
#include "groundseg/image.hpp"
#include "groundseg/mesh.hpp"
#include "groundseg/point_cloud.hpp"

namespace groundseg {

struct BackprojectConfig {
  /// Each projected point labels the pixels within this many pixels (disk).
  int splat_radius = 1;
  double depth_prune_threshold = 1.0;
};

/// Projects labeled points into one view. A point labels pixel q when q lies
/// within splat_radius of the point's pixel and |point depth - depth(q)| is
/// within the prune threshold. Among points competing for a pixel, the one
/// splatted from closer in the image wins, then the one nearer the camera,
/// then the lower point index. Pixels nobody reaches stay Unlabeled.
LabelMask backproject_labels(const PointCloud& cloud, const CameraView& view, const DepthMap& depth,
                             const BackprojectConfig& cfg = {});

/// North-up raster geometry. (origin_x, origin_y) is the lower-left corner;
/// row 0 is the northernmost row.
struct RasterGrid {
  int width = 0;
  int height = 0;
  double cell_size = 0.0;
  double origin_x = 0.0;
  double origin_y = 0.0;

  /// Cell containing (x, y), if inside the grid.
  std::optional<std::pair<int, int>> cell_of(double x, double y) const;
  bool operator==(const RasterGrid&) const = default;
};

/// The grid over a cloud's xy bounds, anchored at its minimum corner.
RasterGrid grid_for(const PointCloud& cloud, double cell_size);

inline constexpr double kNoData = -9999.0;

struct Raster {
  RasterGrid grid;
  /// Row-major, row 0 north; kNoData for empty cells.
  std::vector<double> values;

  double at(int col, int row) const { return values[static_cast<std::size_t>(row) * grid.width + col]; }
};

Raster export_dem(const PointCloud& cloud, double cell_size);
Raster export_dem(const PointCloud& cloud, const RasterGrid& grid);

struct MaterialMasks {
  Raster bare_earth;
  Raster road;
  Raster grass;
};

/// Per-cell majority of labeled points (ties to the smaller label); the
/// winning class's mask is 1, the others 0, and cells without labeled
/// points are kNoData in all three.
MaterialMasks export_material_masks(const PointCloud& cloud, double cell_size);
MaterialMasks export_material_masks(const PointCloud& cloud, const RasterGrid& grid);

struct Orthophoto {
  RasterGrid grid;
  RgbImage image;
  /// 1 where a surface was found.
  std::vector<std::uint8_t> valid;
};

/// Color of the highest point per cell (ties to the lower index).
Orthophoto export_orthophoto(const PointCloud& cloud, double cell_size);
Orthophoto export_orthophoto(const PointCloud& cloud, const RasterGrid& grid);
/// Top-down orthographic render: the highest surface over each cell center.
Orthophoto export_orthophoto(const TriangleMesh& mesh, const RasterGrid& grid);

/// Esri ASCII grid with ncols/nrows/xllcorner/yllcorner/cellsize/NODATA_value.
void write_esri_ascii(const Raster& raster, const std::filesystem::path& path);
Raster read_esri_ascii(const std::filesystem::path& path);

/// Six-line world file: cellsize, 0, 0, -cellsize, then the center of the
/// upper-left cell.
void write_world_file(const RasterGrid& grid, const std::filesystem::path& path);

}  // namespace groundseg
