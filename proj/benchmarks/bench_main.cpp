#include "radardepth/densify.hpp"
#include "radardepth/geometry.hpp"
#include "radardepth/radar_prep.hpp"
#include "radardepth/synthscene.hpp"
#include "radardepth/tinydepth.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace radardepth;

namespace {

ModelConfig desk_model() {
  ModelConfig cfg;
  cfg.base_width = 8;
  cfg.max_width = 32;
  cfg.stages = 4;
  return cfg;
}

FeatureMap random_input(int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  FeatureMap in(1, h, w);
  for (double& x : in.data) x = u(rng);
  return in;
}

Rendering desk_frame() {
  auto scene = stock_scene(7);
  return render(scene, desk_intrinsics(), scene.ego_pose(5));
}

}  // namespace

static void BM_Forward(benchmark::State& state) {
  TinyDepthNet net(desk_model(), 1);
  auto in = random_input(88, 200, 2);
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(in));
}
BENCHMARK(BM_Forward)->Unit(benchmark::kMillisecond);

static void BM_ForwardBackward(benchmark::State& state) {
  TinyDepthNet net(desk_model(), 1);
  auto in = random_input(88, 200, 2);
  std::vector<double> upstream(88 * 200, 1e-3);
  for (auto _ : state) {
    auto out = net.forward(in);
    benchmark::DoNotOptimize(net.backward(out.cache.get(), upstream, 5e-4));
  }
}
BENCHMARK(BM_ForwardBackward)->Unit(benchmark::kMillisecond);

static void BM_DensifyLidar(benchmark::State& state) {
  auto scene = stock_scene(7);
  auto k = desk_intrinsics();
  auto pose = scene.ego_pose(5);
  auto frame = render(scene, k, pose);
  std::mt19937_64 rng(3);
  auto lidar = project_to_depth(sample_lidar(scene, pose, LidarConfig{}, rng), k);
  DensifyOptions opt;
  opt.tol = std::pow(10.0, -static_cast<double>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(densify_depth(frame.image, lidar, opt));
}
BENCHMARK(BM_DensifyLidar)->Arg(6)->Arg(8)->Unit(benchmark::kMillisecond);

static void BM_ProjectToDepth(benchmark::State& state) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> x(-20, 20), y(-3, 1), z(1, 80);
  PointCloud c;
  for (int i = 0; i < state.range(0); ++i) c.points.emplace_back(x(rng), y(rng), z(rng));
  auto k = desk_intrinsics();
  for (auto _ : state) benchmark::DoNotOptimize(project_to_depth(c, k));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ProjectToDepth)->Arg(1000)->Arg(100000);

static void BM_HeightExtend(benchmark::State& state) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> x(-20, 20), z(1, 80);
  PointCloud c;
  for (int i = 0; i < 500; ++i) c.points.emplace_back(x(rng), -0.5, z(rng));
  for (auto _ : state) benchmark::DoNotOptimize(height_extend(c));
}
BENCHMARK(BM_HeightExtend);

static void BM_Render(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(desk_frame());
}
BENCHMARK(BM_Render)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
