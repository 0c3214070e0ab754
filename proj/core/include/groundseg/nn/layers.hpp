#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <utility>
#include <string>
#include <vector>

#include "groundseg/nn/tensor.hpp"
#include "groundseg/rng.hpp"

namespace groundseg::nn {

/// A differentiable operator on rank-5 tensors. forward() caches what
/// backward() needs, so calls must alternate forward -> backward.
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor forward(const Tensor& x, Mode mode) = 0;
  /// Accumulates parameter gradients and returns d(loss)/d(input).
  virtual Tensor backward(const Tensor& grad_out) = 0;
  virtual void collect_parameters(std::vector<Parameter*>& /*out*/) {}
  /// Non-trainable state that must be checkpointed (batchnorm running stats).
  virtual void collect_buffers(std::vector<std::pair<std::string, Tensor*>>& /*out*/) {}
  virtual std::string name() const = 0;
};

using Extent3 = std::array<int, 3>;

/// Stride-1 convolution with odd kernel extents and zero "same" padding.
/// Weights [out, in, kd, kh, kw], bias [out].
class Conv final : public Layer {
 public:
  Conv(int in_channels, int out_channels, Extent3 kernel);
  /// Fan-in scaled uniform weights in +-sqrt(6 / fan_in), zero bias.
  void initialize(Rng& rng);

  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect_parameters(std::vector<Parameter*>& out) override;
  std::string name() const override { return "conv"; }

  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }

 private:
  int in_;
  int out_;
  Extent3 kernel_;
  Parameter weight_;
  Parameter bias_;
  Tensor input_;
};

class ReLU final : public Layer {
 public:
  Tensor forward(const Tensor& x, Mode mode) override;
  /// The derivative at exactly zero is taken as zero.
  Tensor backward(const Tensor& grad_out) override;
  std::string name() const override { return "relu"; }

 private:
  Tensor input_;
};

/// Non-overlapping max pooling; ties route the gradient to the first maximum.
class MaxPool final : public Layer {
 public:
  explicit MaxPool(Extent3 window);
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  std::string name() const override { return "maxpool"; }

 private:
  Extent3 window_;
  std::vector<int> input_shape_;
  std::vector<std::uint32_t> argmax_;
};

/// Nearest-neighbor upsampling by integer factors.
class Upsample final : public Layer {
 public:
  explicit Upsample(Extent3 factor);
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  std::string name() const override { return "upsample"; }

 private:
  Extent3 factor_;
  std::vector<int> input_shape_;
};

/// Per-channel normalization over batch and space. Train mode uses batch
/// statistics (at least two values per channel) and updates running
/// estimates with momentum 0.1; eval mode uses the running estimates.
class BatchNorm final : public Layer {
 public:
  explicit BatchNorm(int channels, double eps = 1e-5, double momentum = 0.1);
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect_parameters(std::vector<Parameter*>& out) override;
  void collect_buffers(std::vector<std::pair<std::string, Tensor*>>& out) override;
  std::string name() const override { return "batchnorm"; }

  Parameter& gamma() { return gamma_; }
  Parameter& beta() { return beta_; }

 private:
  int channels_;
  double eps_;
  double momentum_;
  Parameter gamma_;
  Parameter beta_;
  Tensor running_mean_;
  Tensor running_var_;
  Mode last_mode_ = Mode::Eval;
  Tensor normalized_;
  std::vector<double> inv_std_;
};

/// Inverted dropout: kept activations are scaled by 1 / (1 - rate).
/// Identity in eval mode or when rate is 0.
class Dropout final : public Layer {
 public:
  Dropout(double rate, std::uint64_t seed);
  void reseed(std::uint64_t seed) { rng_ = Rng(seed); }
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  std::string name() const override { return "dropout"; }

 private:
  double rate_;
  Rng rng_;
  std::vector<double> mask_;
  bool active_ = false;
};

Tensor concat_channels(const Tensor& a, const Tensor& b);
/// Inverse of concat_channels for gradients: first `a_channels` go to the first tensor.
std::pair<Tensor, Tensor> split_channels(const Tensor& g, int a_channels);

struct LossResult {
  double loss = 0.0;
  Tensor grad;
  std::size_t count = 0;
};

/// Class-weighted softmax cross-entropy over the channel axis of
/// [N, K, D, H, W] logits. `targets` holds one label code per (n, d, h, w);
/// code 255 is ignored. The loss is sum(w[t] * -log p_t) / count.
LossResult softmax_cross_entropy(const Tensor& logits, std::span<const std::uint8_t> targets,
                                 std::span<const double> class_weights);

/// Softmax over channels, same shape as the logits.
Tensor softmax_channels(const Tensor& logits);

}  // namespace groundseg::nn
