#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <string>

#include "groundseg/camera.hpp"
#include "groundseg/mesh.hpp"
#include "groundseg/nn/layers.hpp"
#include "groundseg/nn/models.hpp"
#include "groundseg/point_cloud.hpp"
#include "groundseg/rng.hpp"

namespace groundseg::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

nn::Tensor random_tensor(std::vector<int> shape, Rng& rng, double scale = 1.0);

PointCloud random_cloud(std::size_t n, Rng& rng, const Eigen::Vector3d& lo, const Eigen::Vector3d& hi,
                        bool labeled = true, bool colored = true);

/// Nadir camera at `center` looking down -Z.
CameraView nadir_camera(const Eigen::Vector3d& center, int width = 40, int height = 30, double focal = 30.0,
                        const std::string& id = "cam");

/// Camera at `center` looking at `target` with world +Z as the up hint.
CameraView look_at_camera(const Eigen::Vector3d& center, const Eigen::Vector3d& target, int width, int height,
                          double focal, const std::string& id);

/// Regular heightfield over [0, nx*step] x [0, ny*step].
TriangleMesh heightfield_mesh(int nx, int ny, double step, const std::function<double(double, double)>& height);

/// Norm-wise relative error |a - n| / (|a| + |n|), 0 when both vanish.
double relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric);

/// Central-difference gradient of f at x for every entry of x.
std::vector<double> numeric_gradient(const std::function<double()>& f, std::span<double> x, double eps = 1e-4);

/// L = sum(r * layer(x)) for a random r. Compares d L / d x and every
/// parameter gradient with central differences; returns the worst relative
/// error. before_forward runs ahead of every forward pass.
double check_layer(nn::Layer& layer, nn::Tensor x, Rng& rng, nn::Mode mode,
                   const std::function<void()>& before_forward = {});

/// Relative error of d loss / d input for a whole model in train mode under
/// weighted cross-entropy, with the dropout streams pinned across evaluations.
double end_to_end_input_error(nn::Model& model, nn::Tensor x, const std::vector<std::uint8_t>& targets);

}  // namespace groundseg::testing
