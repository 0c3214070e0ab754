#include "groundseg/nn/tensor.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

#include "groundseg/error.hpp"

namespace groundseg::nn {

std::string shape_string(const std::vector<int>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(std::vector<int> shape, double fill) : shape_(std::move(shape)) {
  std::size_t n = 1;
  for (const int d : shape_) {
    if (d <= 0) throw ArgumentError("Tensor: non-positive dimension in shape " + nn::shape_string(shape_));
    n *= static_cast<std::size_t>(d);
  }
  values_.assign(n, fill);
}

void Tensor::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

std::string Tensor::shape_string() const { return nn::shape_string(shape_); }

std::size_t Tensor::plane() const {
  if (rank() != 5) throw ArgumentError("Tensor::plane: expected rank 5, got " + shape_string());
  return static_cast<std::size_t>(shape_[2]) * shape_[3] * shape_[4];
}

Parameter::Parameter(std::string n, Tensor v)
    : name(std::move(n)), value(std::move(v)), grad(value.shape()), velocity(value.shape()) {}

}  // namespace groundseg::nn
