#include "groundseg/camera.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <Eigen/Dense>

#include "groundseg/error.hpp"

namespace groundseg {

void CameraView::validate() const {
  const auto where = "camera '" + image_id + "': ";
  if (width <= 0 || height <= 0) throw ArgumentError(where + "image size must be positive");
  if (!(fx > 0.0) || !(fy > 0.0)) throw ArgumentError(where + "focal lengths must be positive");
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
    throw ArgumentError(where + "principal point outside the image");
  }
  if (!rotation.allFinite() || !translation.allFinite()) {
    throw ArgumentError(where + "non-finite extrinsics");
  }
  if ((rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-9) {
    throw ArgumentError(where + "rotation is not orthonormal");
  }
  if (std::abs(rotation.determinant() - 1.0) > 1e-9) {
    throw ArgumentError(where + "rotation determinant is not +1");
  }
}

std::optional<Projection> project(const CameraView& view, const Eigen::Vector3d& world_point) {
  const Eigen::Vector3d p = view.to_camera(world_point);
  if (p.z() <= 0.0) return std::nullopt;
  return Projection{{view.fx * p.x() / p.z() + view.cx, view.fy * p.y() / p.z() + view.cy}, p.z()};
}

Eigen::Vector3d view_ray(const CameraView& view, const Eigen::Vector2d& pixel) {
  if (!(pixel.x() >= 0.0 && pixel.x() <= view.width && pixel.y() >= 0.0 && pixel.y() <= view.height)) {
    throw ArgumentError("view_ray: pixel (" + std::to_string(pixel.x()) + ", " + std::to_string(pixel.y()) +
                        ") outside " + std::to_string(view.width) + "x" + std::to_string(view.height));
  }
  const Eigen::Vector3d cam((pixel.x() - view.cx) / view.fx, (pixel.y() - view.cy) / view.fy, 1.0);
  return (view.rotation.transpose() * cam).normalized();
}

std::optional<Eigen::Vector2i> nearest_pixel(const CameraView& view, const Eigen::Vector2d& pixel) {
  if (!(pixel.x() >= 0.0 && pixel.y() >= 0.0)) return std::nullopt;
  const double fx = std::floor(pixel.x());
  const double fy = std::floor(pixel.y());
  if (fx >= view.width || fy >= view.height) return std::nullopt;
  return Eigen::Vector2i(static_cast<int>(fx), static_cast<int>(fy));
}

std::vector<CameraView> read_cameras(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingInputError("cannot open camera file " + path.string());
  std::vector<CameraView> views;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    const auto bad = [&](const std::string& what) {
      return ParseError(path.string() + ": line " + std::to_string(line_no) + ": " + what);
    };
    if (tok.size() != 20) throw bad("expected 20 fields, found " + std::to_string(tok.size()));
    auto num = [&](std::size_t i) {
      try {
        std::size_t used = 0;
        const double v = std::stod(tok[i], &used);
        if (used == tok[i].size() && std::isfinite(v)) return v;
      } catch (const std::exception&) {
      }
      throw bad("bad number '" + tok[i] + "' in field " + std::to_string(i + 1));
    };
    CameraView v;
    v.image_id = tok[0];
    const double w = num(1), h = num(2);
    if (w != std::floor(w) || h != std::floor(h)) throw bad("image size must be integral");
    v.width = static_cast<int>(w);
    v.height = static_cast<int>(h);
    v.fx = num(3);
    v.fy = num(4);
    v.cx = num(5);
    v.cy = num(6);
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) v.rotation(r, c) = num(7 + 3 * r + c);
    }
    v.translation = {num(16), num(17), num(18)};
    if (tok[19] != "-") v.image_path = tok[19];
    try {
      v.validate();
    } catch (const ArgumentError& e) {
      throw bad(e.what());
    }
    views.push_back(std::move(v));
  }
  return views;
}

void write_cameras(const std::vector<CameraView>& views, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "# image_id width height fx fy cx cy r00 r01 r02 r10 r11 r12 r20 r21 r22 tx ty tz image_path\n";
  char buf[64];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, " %.17g", v);
    out << buf;
  };
  for (const auto& v : views) {
    out << v.image_id << ' ' << v.width << ' ' << v.height;
    put(v.fx);
    put(v.fy);
    put(v.cx);
    put(v.cy);
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) put(v.rotation(r, c));
    }
    for (int i = 0; i < 3; ++i) put(v.translation[i]);
    out << ' ' << (v.image_path ? v.image_path->generic_string() : std::string("-")) << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace groundseg
