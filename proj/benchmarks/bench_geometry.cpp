#include <benchmark/benchmark.h>

#include "groundseg/association.hpp"
#include "groundseg/fusion.hpp"
#include "groundseg/pipeline.hpp"
#include "groundseg/raster.hpp"
#include "groundseg/voxel_grid.hpp"

using namespace groundseg;

namespace {

// One 40 m scene flown at the low altitude, built once.
struct Scene40 {
  PipelineConfig cfg;
  SyntheticDataset data;
  PreparedScene prepared;

  Scene40() {
    cfg.extent_x = cfg.extent_y = 40.0;
    cfg.altitudes = {70.0};
    data = make_synthetic_dataset(cfg, train_scene_seed(cfg));
    prepared = prepare_scene(cfg, data);
  }
};

const Scene40& scene() {
  static const Scene40 s;
  return s;
}

std::vector<FeatureMap2D> constant_maps(const Scene40& s, int channels) {
  std::vector<FeatureMap2D> maps;
  for (std::size_t i = 0; i < s.data.views.size(); ++i) {
    FeatureMap2D m;
    m.view_index = static_cast<int>(i);
    m.image_width = s.data.views[i].width;
    m.image_height = s.data.views[i].height;
    m.width = m.image_width / 2;
    m.height = m.image_height / 2;
    m.channels = channels;
    m.values.assign(static_cast<std::size_t>(m.width * m.height * channels), 0.0);
    for (std::size_t k = 0; k < m.values.size(); ++k) m.values[k] = static_cast<double>((k * 2654435761u) % 1000) / 1000.0;
    maps.push_back(std::move(m));
  }
  return maps;
}

}  // namespace

static void BM_RenderDepth(benchmark::State& state) {
  const auto& s = scene();
  const auto& view = s.data.views[s.data.views.size() / 2];
  for (auto _ : state) benchmark::DoNotOptimize(render_depth(view, s.data.scene.mesh));
  state.counters["triangles"] = static_cast<double>(s.data.scene.mesh.triangles.size());
}
BENCHMARK(BM_RenderDepth)->Unit(benchmark::kMillisecond);

static void BM_Downsample(benchmark::State& state) {
  const auto& s = scene();
  for (auto _ : state) benchmark::DoNotOptimize(downsample_grid(s.data.scene.cloud, s.cfg.downsample_spacing));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(s.data.scene.cloud.size()));
}
BENCHMARK(BM_Downsample)->Unit(benchmark::kMillisecond);

static void BM_Voxelize(benchmark::State& state) {
  const auto& s = scene();
  const ChunkSpec spec = s.cfg.chunk_spec_for(s.prepared.cloud);
  for (auto _ : state) benchmark::DoNotOptimize(voxelize(s.prepared.cloud, spec));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(s.prepared.cloud.size()));
}
BENCHMARK(BM_Voxelize)->Unit(benchmark::kMillisecond);

static void BM_Associate(benchmark::State& state) {
  const auto& s = scene();
  std::vector<DepthMap> depths;
  for (const auto& r : s.data.renders) depths.push_back(r.depth);
  for (auto _ : state) benchmark::DoNotOptimize(associate(s.prepared.grid, s.data.views, depths, s.cfg.association));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(s.prepared.grid.occupied_count()));
}
BENCHMARK(BM_Associate)->Unit(benchmark::kMillisecond);

static void BM_Fuse(benchmark::State& state) {
  const auto& s = scene();
  const auto maps = constant_maps(s, 8);
  const auto mode = state.range(0) ? PoolingMode::DepthPool : PoolingMode::MaxPool;
  for (auto _ : state) benchmark::DoNotOptimize(fuse(s.prepared.association, maps, mode));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(s.prepared.association.size()));
  state.SetLabel(state.range(0) ? "depth-pool" : "max-pool");
}
BENCHMARK(BM_Fuse)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);
