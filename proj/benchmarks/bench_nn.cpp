#include <benchmark/benchmark.h>

#include "groundseg/nn/models.hpp"
#include "groundseg/rng.hpp"

using namespace groundseg;
using namespace groundseg::nn;

namespace {

Tensor random_input(std::vector<int> shape, std::uint64_t seed) {
  Tensor t(std::move(shape));
  Rng rng(seed);
  for (auto& v : t.values()) v = rng.uniform(-1.0, 1.0);
  return t;
}

}  // namespace

static void BM_ConvForward3d(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  Conv conv(c, c, {3, 3, 3});
  Rng rng(1);
  conv.initialize(rng);
  const Tensor x = random_input({1, c, 8, 32, 32}, 2);
  for (auto _ : state) benchmark::DoNotOptimize(conv.forward(x, Mode::Eval));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(x.size()));
}
BENCHMARK(BM_ConvForward3d)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);

static void BM_UNet3DTrainStep(benchmark::State& state) {
  Net3DConfig cfg;
  cfg.input_channels = 9;
  UNet3D net(cfg, 3);
  const Tensor x = random_input({1, 9, 8, 32, 32}, 4);
  std::vector<std::uint8_t> targets(8 * 32 * 32, 0);
  for (std::size_t i = 0; i < targets.size(); ++i) targets[i] = static_cast<std::uint8_t>(i % 3);
  const std::vector<double> w{1.0, 1.0, 1.0};
  for (auto _ : state) {
    net.zero_grad();
    net.backward(softmax_cross_entropy(net.forward(x, Mode::Train), targets, w).grad);
  }
}
BENCHMARK(BM_UNet3DTrainStep)->Unit(benchmark::kMillisecond);

static void BM_BackboneForward(benchmark::State& state) {
  Backbone2DConfig cfg;
  Backbone2D net(cfg, 5);
  const Tensor x = random_input({1, 3, 1, cfg.input_height, cfg.input_width}, 6);
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(x, Mode::Eval));
}
BENCHMARK(BM_BackboneForward)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
