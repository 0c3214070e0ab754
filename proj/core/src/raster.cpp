#include "groundseg/raster.hpp"

#include <algorithm>
#include <cmath>

#include "groundseg/error.hpp"

namespace groundseg {
namespace {

struct ClipVertex {
  Eigen::Vector3d cam;
  Eigen::Vector3d bary;  // weights on the original triangle's corners
};

constexpr double kTieEpsilon = 1e-9;

// Sutherland-Hodgman against z >= kNearPlane; at most 4 output vertices.
int clip_near(const ClipVertex (&in)[3], ClipVertex (&out)[4]) {
  int n = 0;
  for (int i = 0; i < 3; ++i) {
    const auto& a = in[i];
    const auto& b = in[(i + 1) % 3];
    const bool a_in = a.cam.z() >= kNearPlane;
    const bool b_in = b.cam.z() >= kNearPlane;
    if (a_in) out[n++] = a;
    if (a_in != b_in) {
      const double t = (kNearPlane - a.cam.z()) / (b.cam.z() - a.cam.z());
      out[n++] = {a.cam + t * (b.cam - a.cam), a.bary + t * (b.bary - a.bary)};
    }
  }
  return n;
}

class Rasterizer {
 public:
  Rasterizer(const CameraView& view, RasterBuffers& buf) : view_(view), buf_(buf) {}

  void draw(const ClipVertex& a, const ClipVertex& b, const ClipVertex& c, std::int32_t tri) {
    const Eigen::Vector2d sa = screen(a.cam), sb = screen(b.cam), sc = screen(c.cam);
    const double area = edge(sa, sb, sc);
    if (!(std::abs(area) > 1e-12)) return;

    const double min_x = std::min({sa.x(), sb.x(), sc.x()});
    const double max_x = std::max({sa.x(), sb.x(), sc.x()});
    const double min_y = std::min({sa.y(), sb.y(), sc.y()});
    const double max_y = std::max({sa.y(), sb.y(), sc.y()});
    const double x0 = std::max(0.0, std::ceil(min_x - 0.5));
    const double x1 = std::min(view_.width - 1.0, std::floor(max_x - 0.5));
    const double y0 = std::max(0.0, std::ceil(min_y - 0.5));
    const double y1 = std::min(view_.height - 1.0, std::floor(max_y - 0.5));
    if (x0 > x1 || y0 > y1) return;

    const double inv_area = 1.0 / area;
    const double iz_a = 1.0 / a.cam.z(), iz_b = 1.0 / b.cam.z(), iz_c = 1.0 / c.cam.z();
    for (int y = static_cast<int>(y0); y <= static_cast<int>(y1); ++y) {
      for (int x = static_cast<int>(x0); x <= static_cast<int>(x1); ++x) {
        const Eigen::Vector2d p(x + 0.5, y + 0.5);
        const double w0 = edge(sb, sc, p) * inv_area;
        const double w1 = edge(sc, sa, p) * inv_area;
        const double w2 = edge(sa, sb, p) * inv_area;
        if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;
        const double inv_z = w0 * iz_a + w1 * iz_b + w2 * iz_c;
        const double z = 1.0 / inv_z;
        const auto idx = static_cast<std::size_t>(y) * buf_.width + x;
        buf_.depth[idx] = std::min(buf_.depth[idx], z);

        const auto cur = buf_.triangle[idx];
        const double cur_z = selected_z_[idx];
        const bool take = cur < 0 || z < cur_z - kTieEpsilon ||
                          (std::abs(z - cur_z) <= kTieEpsilon && tri < cur);
        if (!take) continue;
        const Eigen::Vector3d pc(w0 * iz_a * z, w1 * iz_b * z, w2 * iz_c * z);
        const Eigen::Vector3d orig = pc.x() * a.bary + pc.y() * b.bary + pc.z() * c.bary;
        buf_.triangle[idx] = tri;
        selected_z_[idx] = z;
        buf_.barycentric[idx] = {orig.x(), orig.y(), orig.z()};
      }
    }
  }

  void reset() { selected_z_.assign(buf_.depth.size(), kNoSurface); }

 private:
  Eigen::Vector2d screen(const Eigen::Vector3d& p) const {
    return {view_.fx * p.x() / p.z() + view_.cx, view_.fy * p.y() / p.z() + view_.cy};
  }
  static double edge(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& p) {
    return (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
  }

  const CameraView& view_;
  RasterBuffers& buf_;
  std::vector<double> selected_z_;
};

}  // namespace

RasterBuffers rasterize(const CameraView& view, const TriangleMesh& mesh) {
  view.validate();
  if (mesh.empty()) throw ArgumentError("rasterize: mesh has no triangles");

  RasterBuffers buf;
  buf.width = view.width;
  buf.height = view.height;
  const auto n = static_cast<std::size_t>(view.width) * view.height;
  buf.depth.assign(n, kNoSurface);
  buf.triangle.assign(n, -1);
  buf.barycentric.assign(n, {0.0, 0.0, 0.0});

  std::vector<Eigen::Vector3d> cam(mesh.vertices.size());
  for (std::size_t i = 0; i < cam.size(); ++i) cam[i] = view.to_camera(mesh.vertices[i]);

  Rasterizer r(view, buf);
  r.reset();
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    if (tri[0] >= cam.size() || tri[1] >= cam.size() || tri[2] >= cam.size()) {
      throw ArgumentError("rasterize: triangle " + std::to_string(t) + " has an out-of-range index");
    }
    const ClipVertex v[3] = {{cam[tri[0]], Eigen::Vector3d::UnitX()},
                             {cam[tri[1]], Eigen::Vector3d::UnitY()},
                             {cam[tri[2]], Eigen::Vector3d::UnitZ()}};
    const auto id = static_cast<std::int32_t>(t);
    if (v[0].cam.z() >= kNearPlane && v[1].cam.z() >= kNearPlane && v[2].cam.z() >= kNearPlane) {
      r.draw(v[0], v[1], v[2], id);
      continue;
    }
    ClipVertex poly[4];
    const int m = clip_near(v, poly);
    for (int k = 1; k + 1 < m; ++k) r.draw(poly[0], poly[k], poly[k + 1], id);
  }
  return buf;
}

DepthMap depth_from(const RasterBuffers& buffers) {
  DepthMap d(buffers.width, buffers.height);
  d.pixels = buffers.depth;
  return d;
}

RgbImage color_from(const RasterBuffers& buffers, const TriangleMesh& mesh) {
  if (!mesh.colors) throw ArgumentError("render_color: mesh has no vertex colors");
  const auto& colors = *mesh.colors;
  RgbImage img(buffers.width, buffers.height);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    const auto t = buffers.triangle[i];
    if (t < 0) continue;
    const auto& tri = mesh.triangles[static_cast<std::size_t>(t)];
    const auto& w = buffers.barycentric[i];
    double c[3] = {0.0, 0.0, 0.0};
    for (int k = 0; k < 3; ++k) {
      const auto& vc = colors[tri[k]];
      c[0] += w[k] * vc.r;
      c[1] += w[k] * vc.g;
      c[2] += w[k] * vc.b;
    }
    auto q = [](double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); };
    img.pixels[i] = {q(c[0]), q(c[1]), q(c[2])};
  }
  return img;
}

Eigen::Vector3d surface_point(const RasterBuffers& buffers, const TriangleMesh& mesh, int x, int y) {
  const auto idx = static_cast<std::size_t>(y) * buffers.width + x;
  const auto t = buffers.triangle[idx];
  if (t < 0) throw ArgumentError("surface_point: pixel is not covered");
  const auto& tri = mesh.triangles[static_cast<std::size_t>(t)];
  const auto& w = buffers.barycentric[idx];
  return w[0] * mesh.vertices[tri[0]] + w[1] * mesh.vertices[tri[1]] + w[2] * mesh.vertices[tri[2]];
}

DepthMap render_depth(const CameraView& view, const TriangleMesh& mesh) {
  return depth_from(rasterize(view, mesh));
}

RgbImage render_color(const CameraView& view, const TriangleMesh& mesh) {
  if (!mesh.colors) throw ArgumentError("render_color: mesh has no vertex colors");
  if (mesh.empty()) throw ArgumentError("render_color: mesh has no triangles");
  return color_from(rasterize(view, mesh), mesh);
}

}  // namespace groundseg
