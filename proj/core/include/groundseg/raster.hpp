#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "groundseg/camera.hpp"
#include "groundseg/image.hpp"
#include "groundseg/mesh.hpp"

namespace groundseg {

/// Z-buffer output shared by every render_* function so depth, color and
/// label layers have identical coverage.
struct RasterBuffers {
  int width = 0;
  int height = 0;
  /// Minimum camera-frame depth over all covering triangles, kNoSurface if none.
  std::vector<double> depth;
  /// Winning triangle per pixel (-1 if uncovered): nearest, and among
  /// candidates within 1e-9 m of each other the lowest index.
  std::vector<std::int32_t> triangle;
  /// Perspective-correct barycentric weights of the pixel center on the
  /// winning triangle.
  std::vector<std::array<double, 3>> barycentric;

  bool covered(int x, int y) const { return triangle[static_cast<std::size_t>(y) * width + x] >= 0; }
};

/// Near clipping plane distance in meters.
inline constexpr double kNearPlane = 1e-3;

RasterBuffers rasterize(const CameraView& view, const TriangleMesh& mesh);

DepthMap render_depth(const CameraView& view, const TriangleMesh& mesh);

/// Requires per-vertex colors; uncovered pixels are black.
RgbImage render_color(const CameraView& view, const TriangleMesh& mesh);

DepthMap depth_from(const RasterBuffers& buffers);
RgbImage color_from(const RasterBuffers& buffers, const TriangleMesh& mesh);
/// World-frame surface point seen at a covered pixel.
Eigen::Vector3d surface_point(const RasterBuffers& buffers, const TriangleMesh& mesh, int x, int y);

}  // namespace groundseg
