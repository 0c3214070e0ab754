#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "groundseg/nn/layers.hpp"

namespace groundseg::nn {

/// Layers applied in order.
class Sequential {
 public:
  template <typename L, typename... Args>
  L& add(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *layer;
    layers_.push_back(std::move(layer));
    return ref;
  }

  Tensor forward(const Tensor& x, Mode mode);
  Tensor backward(const Tensor& grad_out);
  void collect_parameters(std::vector<Parameter*>& out);
  void collect_buffers(std::vector<std::pair<std::string, Tensor*>>& out);
  const std::vector<std::unique_ptr<Layer>>& layers() const { return layers_; }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

/// A trainable network mapping a rank-5 input to per-location class logits.
class Model {
 public:
  virtual ~Model() = default;
  virtual Tensor forward(const Tensor& x, Mode mode) = 0;
  /// Takes d(loss)/d(logits) and returns d(loss)/d(input).
  virtual Tensor backward(const Tensor& grad_logits) = 0;
  /// Parameters and buffers in a fixed layer order (the checkpoint order).
  virtual std::vector<Parameter*> parameters() = 0;
  virtual std::vector<std::pair<std::string, Tensor*>> buffers() = 0;
  /// Resets every dropout stream; a no-op for models without dropout.
  virtual void reseed_dropout(std::uint64_t /*seed*/) {}
  /// key=value lines echoing the configuration.
  virtual std::vector<std::pair<std::string, std::string>> describe() const = 0;

  void zero_grad();
};

struct Net3DConfig {
  std::vector<int> encoder_channels{8, 16, 32, 32};
  double dropout_rate = 0.5;
  bool use_batchnorm = true;
  int num_classes = 3;
  /// Occupancy plus fused feature channels.
  int input_channels = 9;

  void validate() const;
  /// Chunk extents must be multiples of this.
  int divisor() const { return 1 << (static_cast<int>(encoder_channels.size()) - 1); }
};

/// Encoder/decoder over voxel chunks [N, 1 + C, Z, Y, X]. Encoder level l
/// applies (maxpool 2, dropout when l > 0) then conv3 + batchnorm + relu.
/// Each decoder level upsamples, concatenates the encoder output of the
/// same depth and applies conv3 + batchnorm + relu. A 1x1x1 conv yields
/// logits at full chunk resolution.
class UNet3D final : public Model {
 public:
  UNet3D(Net3DConfig cfg, std::uint64_t seed);

  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_logits) override;
  std::vector<Parameter*> parameters() override;
  std::vector<std::pair<std::string, Tensor*>> buffers() override;
  void reseed_dropout(std::uint64_t seed) override;
  std::vector<std::pair<std::string, std::string>> describe() const override;

  const Net3DConfig& config() const { return cfg_; }

 private:
  struct DecoderLevel {
    Upsample upsample{{2, 2, 2}};
    Sequential block;
    int up_channels = 0;
  };

  Net3DConfig cfg_;
  std::vector<Sequential> encoder_;
  std::vector<Dropout*> dropouts_;
  std::vector<DecoderLevel> decoder_;  // decoder_[l] produces level l, l < L-1
  std::unique_ptr<Conv> head_;
};

struct Backbone2DConfig {
  int out_channels = 8;
  int feature_height = 32;
  int feature_width = 41;
  int num_classes = 3;
  int input_height = 64;
  int input_width = 82;
  int hidden_channels = 16;

  void validate() const;
  /// Number of 2x downsampling stages from input to feature resolution.
  int levels() const;
};

/// Image backbone over [N, 3, 1, H, W]: a conv stem, one maxpool + conv
/// stage per halving, then a feature conv whose activations are the
/// feature tap, and a 1x1 segmentation head used for the proxy loss.
class Backbone2D final : public Model {
 public:
  Backbone2D(Backbone2DConfig cfg, std::uint64_t seed);

  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_logits) override;
  std::vector<Parameter*> parameters() override;
  std::vector<std::pair<std::string, Tensor*>> buffers() override;
  std::vector<std::pair<std::string, std::string>> describe() const override;

  /// Feature tap of the last forward pass, [N, C, 1, H_f, W_f].
  const Tensor& features() const { return features_; }
  const Backbone2DConfig& config() const { return cfg_; }

 private:
  Backbone2DConfig cfg_;
  Sequential trunk_;
  std::unique_ptr<Conv> head_;
  Tensor features_;
};

}  // namespace groundseg::nn
