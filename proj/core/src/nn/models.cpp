#include "groundseg/nn/models.hpp"

#include <sstream>

#include "groundseg/error.hpp"

namespace groundseg::nn {

Tensor Sequential::forward(const Tensor& x, Mode mode) {
  Tensor y = x;
  for (auto& l : layers_) y = l->forward(y, mode);
  return y;
}

Tensor Sequential::backward(const Tensor& grad_out) {
  Tensor g = grad_out;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
  return g;
}

void Sequential::collect_parameters(std::vector<Parameter*>& out) {
  for (auto& l : layers_) l->collect_parameters(out);
}

void Sequential::collect_buffers(std::vector<std::pair<std::string, Tensor*>>& out) {
  for (auto& l : layers_) l->collect_buffers(out);
}

void Model::zero_grad() {
  for (auto* p : parameters()) p->zero_grad();
}

namespace {

void add_conv_block(Sequential& s, int in, int out, Extent3 kernel, bool batchnorm, Rng& rng) {
  s.add<Conv>(in, out, kernel).initialize(rng);
  if (batchnorm) s.add<BatchNorm>(out);
  s.add<ReLU>();
}

std::string join(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

}  // namespace

// ---------------------------------------------------------------- UNet3D

void Net3DConfig::validate() const {
  std::vector<std::string> problems;
  if (encoder_channels.empty()) problems.emplace_back("encoder_channels must be non-empty");
  for (const int c : encoder_channels) {
    if (c <= 0) problems.emplace_back("encoder_channels entries must be positive");
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) problems.emplace_back("dropout_rate must be in [0, 1)");
  if (num_classes < 2) problems.emplace_back("num_classes must be at least 2");
  if (input_channels < 1) problems.emplace_back("input_channels must be positive");
  if (!problems.empty()) {
    std::string msg = "invalid Net3DConfig:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ConfigError(msg);
  }
}

UNet3D::UNet3D(Net3DConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  Rng rng(seed);
  const int L = static_cast<int>(cfg_.encoder_channels.size());
  const Extent3 k3{3, 3, 3};
  encoder_.resize(static_cast<std::size_t>(L));
  int in = cfg_.input_channels;
  for (int l = 0; l < L; ++l) {
    auto& enc = encoder_[static_cast<std::size_t>(l)];
    if (l > 0) {
      enc.add<MaxPool>(Extent3{2, 2, 2});
      if (cfg_.dropout_rate > 0.0) {
        dropouts_.push_back(&enc.add<Dropout>(cfg_.dropout_rate, derive_seed(seed, 1000 + dropouts_.size())));
      }
    }
    const int out = cfg_.encoder_channels[static_cast<std::size_t>(l)];
    add_conv_block(enc, in, out, k3, cfg_.use_batchnorm, rng);
    in = out;
  }
  decoder_.resize(static_cast<std::size_t>(L - 1));
  int cur = cfg_.encoder_channels.back();
  for (int l = L - 2; l >= 0; --l) {
    auto& dec = decoder_[static_cast<std::size_t>(l)];
    const int skip = cfg_.encoder_channels[static_cast<std::size_t>(l)];
    dec.up_channels = cur;
    add_conv_block(dec.block, cur + skip, skip, k3, cfg_.use_batchnorm, rng);
    cur = skip;
  }
  head_ = std::make_unique<Conv>(cur, cfg_.num_classes, Extent3{1, 1, 1});
  head_->initialize(rng);
}

Tensor UNet3D::forward(const Tensor& x, Mode mode) {
  if (x.rank() != 5 || x.dim(1) != cfg_.input_channels) {
    throw ArgumentError("unet3d: expected [N," + std::to_string(cfg_.input_channels) + ",Z,Y,X] input, got " +
                        x.shape_string());
  }
  const int div = cfg_.divisor();
  if (x.dim(2) % div || x.dim(3) % div || x.dim(4) % div) {
    throw ConfigError("unet3d: chunk extents " + x.shape_string() + " must be divisible by " + std::to_string(div));
  }
  const std::size_t L = encoder_.size();
  std::vector<Tensor> skips(L);
  Tensor h = x;
  for (std::size_t l = 0; l < L; ++l) {
    h = encoder_[l].forward(h, mode);
    skips[l] = h;
  }
  for (std::size_t l = L - 1; l-- > 0;) {
    auto& dec = decoder_[l];
    h = dec.block.forward(concat_channels(dec.upsample.forward(h, mode), skips[l]), mode);
  }
  return head_->forward(h, mode);
}

Tensor UNet3D::backward(const Tensor& grad_logits) {
  const std::size_t L = encoder_.size();
  std::vector<Tensor> skip_grads(L);
  Tensor g = head_->backward(grad_logits);
  for (std::size_t l = 0; l + 1 < L; ++l) {
    auto& dec = decoder_[l];
    auto [g_up, g_skip] = split_channels(dec.block.backward(g), dec.up_channels);
    skip_grads[l] = std::move(g_skip);
    g = dec.upsample.backward(g_up);
  }
  for (std::size_t l = L; l-- > 0;) {
    if (l + 1 < L) {
      const Tensor& s = skip_grads[l];
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += s[i];
    }
    g = encoder_[l].backward(g);
  }
  return g;
}

std::vector<Parameter*> UNet3D::parameters() {
  std::vector<Parameter*> out;
  for (auto& e : encoder_) e.collect_parameters(out);
  for (std::size_t l = decoder_.size(); l-- > 0;) decoder_[l].block.collect_parameters(out);
  head_->collect_parameters(out);
  return out;
}

std::vector<std::pair<std::string, Tensor*>> UNet3D::buffers() {
  std::vector<std::pair<std::string, Tensor*>> out;
  for (auto& e : encoder_) e.collect_buffers(out);
  for (std::size_t l = decoder_.size(); l-- > 0;) decoder_[l].block.collect_buffers(out);
  return out;
}

void UNet3D::reseed_dropout(std::uint64_t seed) {
  for (std::size_t i = 0; i < dropouts_.size(); ++i) dropouts_[i]->reseed(derive_seed(seed, 1000 + i));
}

std::vector<std::pair<std::string, std::string>> UNet3D::describe() const {
  std::ostringstream rate;
  rate << cfg_.dropout_rate;
  return {{"model", "unet3d"},
          {"encoder_channels", join(cfg_.encoder_channels)},
          {"dropout_rate", rate.str()},
          {"use_batchnorm", cfg_.use_batchnorm ? "true" : "false"},
          {"num_classes", std::to_string(cfg_.num_classes)},
          {"input_channels", std::to_string(cfg_.input_channels)}};
}

// ---------------------------------------------------------------- Backbone2D

int Backbone2DConfig::levels() const {
  if (feature_height <= 0 || input_height % feature_height) return -1;
  int ratio = input_height / feature_height;
  int k = 0;
  while (ratio > 1 && ratio % 2 == 0) {
    ratio /= 2;
    ++k;
  }
  return ratio == 1 ? k : -1;
}

void Backbone2DConfig::validate() const {
  std::vector<std::string> problems;
  if (out_channels <= 0) problems.emplace_back("out_channels must be positive");
  if (hidden_channels <= 0) problems.emplace_back("hidden_channels must be positive");
  if (num_classes < 2) problems.emplace_back("num_classes must be at least 2");
  if (feature_height <= 0 || feature_width <= 0) problems.emplace_back("feature_resolution must be positive");
  if (input_height <= 0 || input_width <= 0) problems.emplace_back("input resolution must be positive");
  if (problems.empty()) {
    const int k = levels();
    if (k < 0 || input_width != feature_width * (1 << k)) {
      problems.emplace_back("input resolution " + std::to_string(input_height) + "x" + std::to_string(input_width) +
                            " is not a power-of-two multiple of feature resolution " +
                            std::to_string(feature_height) + "x" + std::to_string(feature_width));
    }
  }
  if (!problems.empty()) {
    std::string msg = "invalid Backbone2DConfig:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ConfigError(msg);
  }
}

Backbone2D::Backbone2D(Backbone2DConfig cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(seed);
  const Extent3 k2{1, 3, 3};
  add_conv_block(trunk_, 3, cfg_.hidden_channels, k2, true, rng);
  for (int l = 0; l < cfg_.levels(); ++l) {
    trunk_.add<MaxPool>(Extent3{1, 2, 2});
    add_conv_block(trunk_, cfg_.hidden_channels, cfg_.hidden_channels, k2, true, rng);
  }
  add_conv_block(trunk_, cfg_.hidden_channels, cfg_.out_channels, k2, true, rng);
  head_ = std::make_unique<Conv>(cfg_.out_channels, cfg_.num_classes, Extent3{1, 1, 1});
  head_->initialize(rng);
}

Tensor Backbone2D::forward(const Tensor& x, Mode mode) {
  if (x.rank() != 5 || x.dim(1) != 3 || x.dim(2) != 1 || x.dim(3) != cfg_.input_height ||
      x.dim(4) != cfg_.input_width) {
    throw ArgumentError("backbone2d: expected [N,3,1," + std::to_string(cfg_.input_height) + "," +
                        std::to_string(cfg_.input_width) + "] images, got " + x.shape_string());
  }
  features_ = trunk_.forward(x, mode);
  return head_->forward(features_, mode);
}

Tensor Backbone2D::backward(const Tensor& grad_logits) { return trunk_.backward(head_->backward(grad_logits)); }

std::vector<Parameter*> Backbone2D::parameters() {
  std::vector<Parameter*> out;
  trunk_.collect_parameters(out);
  head_->collect_parameters(out);
  return out;
}

std::vector<std::pair<std::string, Tensor*>> Backbone2D::buffers() {
  std::vector<std::pair<std::string, Tensor*>> out;
  trunk_.collect_buffers(out);
  return out;
}

std::vector<std::pair<std::string, std::string>> Backbone2D::describe() const {
  return {{"model", "backbone2d"},
          {"out_channels", std::to_string(cfg_.out_channels)},
          {"feature_resolution", std::to_string(cfg_.feature_height) + "," + std::to_string(cfg_.feature_width)},
          {"input_resolution", std::to_string(cfg_.input_height) + "," + std::to_string(cfg_.input_width)},
          {"hidden_channels", std::to_string(cfg_.hidden_channels)},
          {"num_classes", std::to_string(cfg_.num_classes)}};
}

}  // namespace groundseg::nn
