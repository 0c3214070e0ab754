#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace groundseg::nn {

/// Dense row-major double tensor. Spatial operators work on rank-5
/// tensors laid out [N, C, D, H, W] with W fastest; images use D = 1.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape, double fill = 0.0);

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  void fill(double v);
  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  std::string shape_string() const;

  /// Elements per [n, c] plane of a rank-5 tensor.
  std::size_t plane() const;

 private:
  std::vector<int> shape_;
  std::vector<double> values_;
};

std::string shape_string(const std::vector<int>& shape);

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor velocity;

  Parameter() = default;
  Parameter(std::string n, Tensor v);
  void zero_grad() { grad.fill(0.0); }
};

enum class Mode { Train, Eval };

}  // namespace groundseg::nn
