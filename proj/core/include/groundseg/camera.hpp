#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace groundseg {

/// Distortion-free pinhole view. Extrinsics map world to camera,
/// x_cam = rotation * x_world + translation, with +Z forward, +X right and
/// +Y down in the image. Pixel (i, j) covers [i, i+1) x [j, j+1) and is
/// sampled at its center (i + 0.5, j + 0.5).
struct CameraView {
  std::string image_id;
  int width = 0;
  int height = 0;
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  std::optional<std::filesystem::path> image_path;

  /// Throws ArgumentError unless R is orthonormal with det +1 (1e-9),
  /// fx, fy > 0 and the principal point lies inside the image.
  void validate() const;

  Eigen::Vector3d center() const { return -rotation.transpose() * translation; }
  Eigen::Vector3d to_camera(const Eigen::Vector3d& world) const { return rotation * world + translation; }
};

struct Projection {
  Eigen::Vector2d pixel;
  double depth = 0.0;
};

/// nullopt when the point is at or behind the camera plane.
std::optional<Projection> project(const CameraView& view, const Eigen::Vector3d& world_point);

/// Unit world-frame direction through image coordinate `pixel`.
/// Throws ArgumentError outside [0, width] x [0, height].
Eigen::Vector3d view_ray(const CameraView& view, const Eigen::Vector2d& pixel);

/// Integer pixel whose center is nearest to `pixel`, or nullopt out of bounds.
std::optional<Eigen::Vector2i> nearest_pixel(const CameraView& view, const Eigen::Vector2d& pixel);

/// Camera file: one record per view,
/// `image_id width height fx fy cx cy r00 r01 r02 r10 r11 r12 r20 r21 r22 tx ty tz image_path`,
/// whitespace separated, '#' starts a comment, "-" for a missing image path.
std::vector<CameraView> read_cameras(const std::filesystem::path& path);
void write_cameras(const std::vector<CameraView>& views, const std::filesystem::path& path);

}  // namespace groundseg
