#include "support.hpp"

#include "groundseg/nn/train.hpp"

#include <Eigen/Geometry>
#include <unistd.h>

#include <algorithm>
#include <atomic>

using namespace groundseg::nn;

namespace groundseg::testing {

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          ("groundseg_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

nn::Tensor random_tensor(std::vector<int> shape, Rng& rng, double scale) {
  nn::Tensor t(std::move(shape));
  for (auto& v : t.values()) v = scale * rng.uniform(-1.0, 1.0);
  return t;
}

PointCloud random_cloud(std::size_t n, Rng& rng, const Eigen::Vector3d& lo, const Eigen::Vector3d& hi, bool labeled,
                        bool colored) {
  std::vector<Eigen::Vector3d> pts;
  std::vector<Rgb> colors;
  std::vector<MaterialLabel> labels;
  for (std::size_t i = 0; i < n; ++i) {
    pts.emplace_back(rng.uniform(lo.x(), hi.x()), rng.uniform(lo.y(), hi.y()), rng.uniform(lo.z(), hi.z()));
    colors.push_back(Rgb{static_cast<std::uint8_t>(rng.below(256)), static_cast<std::uint8_t>(rng.below(256)),
                         static_cast<std::uint8_t>(rng.below(256))});
    labels.push_back(static_cast<MaterialLabel>(rng.below(3)));
  }
  return PointCloud(std::move(pts), colored ? std::optional(std::move(colors)) : std::nullopt,
                    labeled ? std::optional(std::move(labels)) : std::nullopt);
}

CameraView nadir_camera(const Eigen::Vector3d& center, int width, int height, double focal, const std::string& id) {
  CameraView v;
  v.image_id = id;
  v.width = width;
  v.height = height;
  v.fx = v.fy = focal;
  v.cx = 0.5 * width;
  v.cy = 0.5 * height;
  v.rotation << 1, 0, 0, 0, -1, 0, 0, 0, -1;
  v.translation = -v.rotation * center;
  return v;
}

CameraView look_at_camera(const Eigen::Vector3d& center, const Eigen::Vector3d& target, int width, int height,
                          double focal, const std::string& id) {
  const Eigen::Vector3d z = (target - center).normalized();
  Eigen::Vector3d up = Eigen::Vector3d::UnitZ();
  if (std::abs(z.dot(up)) > 0.99) up = Eigen::Vector3d::UnitY();
  const Eigen::Vector3d x = z.cross(-up).normalized();
  const Eigen::Vector3d y = z.cross(x);
  CameraView v;
  v.image_id = id;
  v.width = width;
  v.height = height;
  v.fx = v.fy = focal;
  v.cx = 0.5 * width;
  v.cy = 0.5 * height;
  v.rotation.row(0) = x.transpose();
  v.rotation.row(1) = y.transpose();
  v.rotation.row(2) = z.transpose();
  v.translation = -v.rotation * center;
  return v;
}

TriangleMesh heightfield_mesh(int nx, int ny, double step, const std::function<double(double, double)>& height) {
  TriangleMesh m;
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) m.vertices.emplace_back(i * step, j * step, height(i * step, j * step));
  }
  auto id = [nx](int i, int j) { return static_cast<std::uint32_t>(j * (nx + 1) + i); };
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      m.triangles.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      m.triangles.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  }
  return m;
}

double relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric) {
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    na += analytic[i] * analytic[i];
    nn += numeric[i] * numeric[i];
  }
  const double den = std::sqrt(na) + std::sqrt(nn);
  return den == 0.0 ? 0.0 : std::sqrt(diff) / den;
}

std::vector<double> numeric_gradient(const std::function<double()>& f, std::span<double> x, double eps) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + eps;
    const double fp = f();
    x[i] = keep - eps;
    const double fm = f();
    x[i] = keep;
    g[i] = (fp - fm) / (2.0 * eps);
  }
  return g;
}

double check_layer(Layer& layer, Tensor x, Rng& rng, Mode mode, const std::function<void()>& before_forward) {
  auto run = [&](const Tensor& in) {
    if (before_forward) before_forward();
    return layer.forward(in, mode);
  };
  const Tensor y0 = run(x);
  const Tensor r = random_tensor(y0.shape(), rng);
  auto loss = [&]() {
    const Tensor y = run(x);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += r[i] * y[i];
    return s;
  };
  std::vector<Parameter*> params;
  layer.collect_parameters(params);
  for (auto* p : params) p->zero_grad();
  run(x);
  const Tensor gx = layer.backward(r);
  std::vector<std::vector<double>> analytic_params;
  for (auto* p : params) analytic_params.emplace_back(p->grad.values().begin(), p->grad.values().end());

  double worst = relative_error({gx.values().begin(), gx.values().end()}, numeric_gradient(loss, x.values()));
  for (std::size_t k = 0; k < params.size(); ++k) {
    worst = std::max(worst, relative_error(analytic_params[k], numeric_gradient(loss, params[k]->value.values())));
  }
  return worst;
}

double end_to_end_input_error(Model& model, Tensor x, const std::vector<std::uint8_t>& targets) {
  const std::vector<double> w{0.8, 1.1, 1.1};
  auto loss = [&]() {
    model.reseed_dropout(5);
    return softmax_cross_entropy(model.forward(x, Mode::Train), targets, w).loss;
  };
  model.reseed_dropout(5);
  model.zero_grad();
  const auto r = softmax_cross_entropy(model.forward(x, Mode::Train), targets, w);
  const Tensor gx = model.backward(r.grad);
  return relative_error({gx.values().begin(), gx.values().end()}, numeric_gradient(loss, x.values()));
}


}  // namespace groundseg::testing
