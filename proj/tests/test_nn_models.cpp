#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "groundseg/error.hpp"
#include "groundseg/nn/checkpoint.hpp"
#include "groundseg/nn/models.hpp"
#include "groundseg/nn/train.hpp"
#include "support.hpp"

using namespace groundseg;
using namespace groundseg::nn;
using groundseg::testing::numeric_gradient;
using groundseg::testing::random_tensor;
using groundseg::testing::relative_error;
using groundseg::testing::TempDir;
using groundseg::testing::end_to_end_input_error;

namespace {

Net3DConfig small_net3d() {
  Net3DConfig c;
  c.encoder_channels = {3, 4, 4};
  c.input_channels = 2;
  return c;
}

std::vector<std::uint8_t> random_targets(std::size_t n, Rng& rng) {
  std::vector<std::uint8_t> t(n);
  for (auto& v : t) v = static_cast<std::uint8_t>(rng.below(5) == 0 ? 255 : rng.below(3));
  return t;
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (const double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

TEST(UNet3D, LogitShapeAtFullChunkResolution) {
  Net3DConfig cfg;
  cfg.input_channels = 9;
  UNet3D net(cfg, 1);
  const Tensor y = net.forward(Tensor({1, 9, 16, 32, 32}), Mode::Eval);
  EXPECT_EQ(y.shape(), (std::vector<int>{1, 3, 16, 32, 32}));
}

TEST(UNet3D, IndivisibleChunkIsConfigError) {
  UNet3D net(small_net3d(), 1);
  EXPECT_THROW(net.forward(Tensor({1, 2, 6, 8, 8}), Mode::Eval), ConfigError);
}

TEST(UNet3D, EvalIsBitwiseDeterministic) {
  Rng rng(2);
  UNet3D net(small_net3d(), 3);
  const Tensor x = random_tensor({1, 2, 4, 8, 8}, rng);
  const Tensor a = net.forward(x, Mode::Eval);
  const Tensor b = net.forward(x, Mode::Eval);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
}

TEST(UNet3D, EndToEndGradientMatchesFiniteDifferences) {
  Rng rng(4);
  UNet3D net(small_net3d(), 5);
  const Tensor x = random_tensor({2, 2, 4, 4, 4}, rng);
  EXPECT_LT(end_to_end_input_error(net, x, random_targets(2 * 64, rng)), 1e-3);
}

TEST(UNet3D, ParameterGradientsMatchFiniteDifferences) {
  Rng rng(6);
  Net3DConfig cfg = small_net3d();
  cfg.dropout_rate = 0.0;
  UNet3D net(cfg, 7);
  const Tensor x = random_tensor({2, 2, 4, 4, 4}, rng);
  const auto targets = random_targets(2 * 64, rng);
  const std::vector<double> w{1, 1, 1};
  net.zero_grad();
  net.backward(softmax_cross_entropy(net.forward(x, Mode::Train), targets, w).grad);
  auto loss = [&]() { return softmax_cross_entropy(net.forward(x, Mode::Train), targets, w).loss; };
  for (auto* p : net.parameters()) {
    const std::vector<double> analytic(p->grad.values().begin(), p->grad.values().end());
    const auto numeric = numeric_gradient(loss, p->value.values());
    // A conv bias feeding batch norm cancels out; both gradients are round-off.
    if (max_abs(analytic) < 1e-9 && max_abs(numeric) < 1e-7) continue;
    EXPECT_LT(relative_error(analytic, numeric), 1e-3) << p->name;
  }
}

TEST(Backbone2D, ShapeContractAtPaperResolution) {
  Backbone2DConfig cfg;
  cfg.input_height = 256;
  cfg.input_width = 328;
  Backbone2D net(cfg, 1);
  EXPECT_EQ(cfg.levels(), 3);
  const Tensor logits = net.forward(Tensor({1, 3, 1, 256, 328}), Mode::Eval);
  EXPECT_EQ(net.features().shape(), (std::vector<int>{1, 8, 1, 32, 41}));
  EXPECT_EQ(logits.shape(), (std::vector<int>{1, 3, 1, 32, 41}));
}

TEST(Backbone2D, ResolutionMismatchThrows) {
  Backbone2D net(Backbone2DConfig{}, 1);
  EXPECT_THROW(net.forward(Tensor({1, 3, 1, 64, 80}), Mode::Eval), ArgumentError);
  Backbone2DConfig bad;
  bad.input_width = 80;
  EXPECT_THROW(Backbone2D(bad, 1), ConfigError);
}

TEST(Backbone2D, UniformInputGivesConstantInteriorFeatures) {
  Backbone2DConfig cfg;
  cfg.input_height = 32;
  cfg.input_width = 40;
  cfg.feature_height = 8;
  cfg.feature_width = 10;
  Backbone2D net(cfg, 2);
  Tensor x({1, 3, 1, 32, 40});
  const std::size_t plane = 32 * 40;
  for (std::size_t i = 0; i < plane; ++i) {
    x[i] = 0.2;
    x[plane + i] = -0.1;
    x[2 * plane + i] = 0.3;
  }
  // Running statistics from a warm-up batch make eval mode non-trivial.
  Rng rng(3);
  net.forward(random_tensor({2, 3, 1, 32, 40}, rng), Mode::Train);
  net.forward(x, Mode::Eval);
  const Tensor& f = net.features();
  // The receptive field reaches the border from cells within 2 of it.
  for (int c = 0; c < f.dim(1); ++c) {
    const double ref = f[static_cast<std::size_t>(c) * 80 + 3 * 10 + 3];
    for (int r = 3; r < 5; ++r) {
      for (int q = 3; q < 7; ++q) EXPECT_NEAR(f[static_cast<std::size_t>(c) * 80 + r * 10 + q], ref, 1e-6);
    }
  }
}

TEST(Backbone2D, ProxyLossGradientMatchesFiniteDifferences) {
  Rng rng(5);
  Backbone2DConfig cfg;
  cfg.input_height = 8;
  cfg.input_width = 8;
  cfg.feature_height = 4;
  cfg.feature_width = 4;
  cfg.hidden_channels = 4;
  cfg.out_channels = 3;
  Backbone2D net(cfg, 6);
  const Tensor x = random_tensor({2, 3, 1, 8, 8}, rng);
  EXPECT_LT(end_to_end_input_error(net, x, random_targets(2 * 16, rng)), 1e-3);
}

TEST(ClassWeights, InverseFrequencyMeanNormalized) {
  ClassHistogram h;
  h.frequencies = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  for (const double w : class_weights_from_histogram(h)) EXPECT_NEAR(w, 1.0, 1e-12);
  h.frequencies = {0.52, 0.24, 0.24};
  const auto w = class_weights_from_histogram(h);
  EXPECT_NEAR(w[0], 0.5625, 1e-3);
  EXPECT_NEAR(w[1], 1.2188, 1e-3);
  EXPECT_NEAR(w[2], 1.2188, 1e-3);
  EXPECT_NEAR((w[0] + w[1] + w[2]) / 3.0, 1.0, 1e-9);
}

TEST(ClassWeights, MeanIsOneForRandomHistograms) {
  Rng rng(7);
  for (int i = 0; i < 100; ++i) {
    ClassHistogram h;
    const double a = rng.uniform(0.01, 1), b = rng.uniform(0.01, 1), c = rng.uniform(0.01, 1);
    h.frequencies = {a / (a + b + c), b / (a + b + c), c / (a + b + c)};
    const auto w = class_weights_from_histogram(h);
    EXPECT_NEAR((w[0] + w[1] + w[2]) / 3.0, 1.0, 1e-9);
    EXPECT_NEAR(w[0] * h.frequencies[0], w[1] * h.frequencies[1], 1e-9);
  }
}

TEST(ClassWeights, ZeroFrequencyExplains) {
  ClassHistogram h;
  h.frequencies = {0.5, 0.5, 0.0};
  try {
    class_weights_from_histogram(h);
    FAIL();
  } catch (const ArgumentError& e) {
    EXPECT_NE(std::string(e.what()).find("smooth"), std::string::npos);
  }
}

namespace {

/// Two occupied voxels per chunk: feature channel +1 means class 0, -1 class 2.
std::vector<Sample> separable_dataset() {
  std::vector<Sample> s;
  for (int k = 0; k < 4; ++k) {
    Sample a{Tensor({1, 2, 2, 2, 2}), std::vector<std::uint8_t>(8, 255)};
    const double sign = k % 2 == 0 ? 1.0 : -1.0;
    a.input[0] = 1.0;
    a.input[8] = sign;
    a.targets[0] = sign > 0 ? 0 : 2;
    a.input[7] = 1.0;
    a.input[15] = -sign;
    a.targets[7] = sign > 0 ? 2 : 0;
    s.push_back(std::move(a));
  }
  return s;
}

}  // namespace

TEST(Train, SeparableToyConverges) {
  Net3DConfig cfg;
  cfg.encoder_channels = {4, 4};
  cfg.input_channels = 2;
  cfg.dropout_rate = 0.0;
  UNet3D net(cfg, 11);
  TrainConfig tc;
  tc.epochs = 30;
  tc.batch_size = 4;
  tc.learning_rate = 0.05;
  const auto data = separable_dataset();
  const std::vector<double> w{1, 1, 1};
  const auto r = train(net, data, w, tc);
  for (int e = 1; e < 10; ++e) EXPECT_LT(r.epoch_loss[e], r.epoch_loss[e - 1]) << "epoch " << e;
  int correct = 0, total = 0;
  for (const auto& s : data) {
    const auto pred = argmax_classes(predict_logits(net, s.input));
    for (std::size_t v = 0; v < 8; ++v) {
      if (s.targets[v] == 255) continue;
      ++total;
      correct += pred[v] == s.targets[v];
    }
  }
  EXPECT_EQ(correct, total);
}

TEST(Train, ZeroLearningRateLeavesParameters) {
  UNet3D net(small_net3d(), 12);
  std::vector<std::vector<double>> before;
  for (auto* p : net.parameters()) before.emplace_back(p->value.values().begin(), p->value.values().end());
  Rng rng(13);
  std::vector<Sample> data{{random_tensor({1, 2, 8, 8, 8}, rng), random_targets(512, rng)}};
  TrainConfig tc;
  tc.learning_rate = 0.0;
  tc.epochs = 3;
  const std::vector<double> w{1, 1, 1};
  train(net, data, w, tc);
  const auto params = net.parameters();
  for (std::size_t k = 0; k < params.size(); ++k) {
    for (std::size_t i = 0; i < before[k].size(); ++i) EXPECT_EQ(params[k]->value[i], before[k][i]);
  }
}

TEST(Train, FixedSeedIsBitwiseReproducible) {
  Rng rng(14);
  std::vector<Sample> data;
  for (int i = 0; i < 3; ++i) data.push_back({random_tensor({1, 2, 8, 8, 8}, rng), random_targets(512, rng)});
  TrainConfig tc;
  tc.epochs = 3;
  tc.batch_size = 2;
  const std::vector<double> w{1, 1, 1};
  UNet3D a(small_net3d(), 15), b(small_net3d(), 15);
  train(a, data, w, tc);
  train(b, data, w, tc);
  const auto pa = a.parameters(), pb = b.parameters();
  for (std::size_t k = 0; k < pa.size(); ++k) {
    for (std::size_t i = 0; i < pa[k]->value.size(); ++i) ASSERT_EQ(pa[k]->value[i], pb[k]->value[i]);
  }
}

TEST(Train, NonFiniteLossReportsContext) {
  Rng rng(16);
  std::vector<Sample> data{{random_tensor({1, 2, 8, 8, 8}, rng), random_targets(512, rng)}};
  data[0].input[0] = std::nan("");
  UNet3D net(small_net3d(), 17);
  TrainConfig tc;
  tc.epochs = 1;
  const std::vector<double> w{1, 1, 1};
  try {
    train(net, data, w, tc);
    FAIL();
  } catch (const NumericalError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("lr="), std::string::npos);
    EXPECT_NE(msg.find("epoch=0"), std::string::npos);
    EXPECT_NE(msg.find("batch=0"), std::string::npos);
  }
}

TEST(Checkpoint, RoundTripRestoresEveryTensor) {
  TempDir dir("ckpt");
  Rng rng(18);
  UNet3D a(small_net3d(), 19);
  a.forward(random_tensor({2, 2, 4, 4, 4}, rng), Mode::Train);  // move the running statistics
  save_checkpoint(dir / "a.ckpt", a, 19, 7);
  UNet3D b(small_net3d(), 20);
  const auto info = load_checkpoint(dir / "a.ckpt", b);
  EXPECT_EQ(info.seed, 19u);
  EXPECT_EQ(info.epoch, 7);
  EXPECT_EQ(info.config.at("encoder_channels"), "3,4,4");
  const auto pa = a.parameters(), pb = b.parameters();
  for (std::size_t k = 0; k < pa.size(); ++k) {
    for (std::size_t i = 0; i < pa[k]->value.size(); ++i) ASSERT_EQ(pa[k]->value[i], pb[k]->value[i]);
  }
  const auto ba = a.buffers(), bb = b.buffers();
  for (std::size_t k = 0; k < ba.size(); ++k) {
    for (std::size_t i = 0; i < ba[k].second->size(); ++i) ASSERT_EQ((*ba[k].second)[i], (*bb[k].second)[i]);
  }
}

TEST(Checkpoint, MismatchedModelIsRejected) {
  TempDir dir("ckpt_bad");
  UNet3D a(small_net3d(), 1);
  save_checkpoint(dir / "a.ckpt", a, 1, 0);
  Net3DConfig other = small_net3d();
  other.encoder_channels = {3, 5, 4};
  UNet3D b(other, 1);
  EXPECT_THROW(load_checkpoint(dir / "a.ckpt", b), ParseError);
}
