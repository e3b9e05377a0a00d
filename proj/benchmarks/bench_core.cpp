#include "scenarios.hpp"

#include <fte/dmp.hpp>
#include <fte/metrics.hpp>
#include <fte/obstacle.hpp>
#include <fte/scene.hpp>

#include <benchmark/benchmark.h>

#include <random>

namespace {

using namespace fte;

void BM_Density(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const auto n = static_cast<std::size_t>(state.range(0));
  const GaussianScene scene(testing::random_blobs(rng, n, 1.0, 0.01, 0.05), 0.0);
  std::vector<Vec3> queries;
  for (int i = 0; i < 1024; ++i) {
    queries.push_back(testing::random_in_ball(rng, 1.0));
  }
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(density(scene, queries[i++ & 1023]));
  }
}
BENCHMARK(BM_Density)->Arg(100)->Arg(1000)->Arg(10000)->Arg(100000);

void BM_DensityGradient(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const GaussianScene scene(testing::random_blobs(rng, 10000, 1.0, 0.01, 0.05), 0.0);
  const Vec3 x = testing::random_in_ball(rng, 0.5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(density_gradient(scene, x));
  }
}
BENCHMARK(BM_DensityGradient);

void BM_DtwPositions(benchmark::State& state) {
  std::mt19937_64 rng(3);
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<Vec3> a(n), b(n);
  for (auto& p : a) p = testing::random_in_ball(rng, 1.0);
  for (auto& p : b) p = testing::random_in_ball(rng, 1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(dtw_positions(a, b).cost);
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_DtwPositions)->RangeMultiplier(2)->Range(64, 1024)->Complexity(benchmark::oNSquared);

void BM_FitDmp(benchmark::State& state) {
  const Trajectory segment = testing::transfer_demo().segment(0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_dmp(segment));
  }
}
BENCHMARK(BM_FitDmp)->Unit(benchmark::kMillisecond);

void BM_Rollout(benchmark::State& state) {
  const DmpModel model = fit_dmp(testing::transfer_demo().segment(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(rollout(model, model.start, model.goal, {}));
  }
}
BENCHMARK(BM_Rollout)->Unit(benchmark::kMillisecond);

void BM_CoupledRollout(benchmark::State& state) {
  const Trajectory demo = testing::transfer_demo();
  const DmpModel model = fit_dmp(demo.segment(0));
  const GaussianScene scene =
      testing::single_blob_scene(testing::transfer_obstacle_center(demo, 0.45, 0.01), 0.015);
  ObstacleParams params;
  params.rho_th = 0.2;
  for (auto _ : state) {
    benchmark::DoNotOptimize(coupled_rollout(model, model.start, model.goal, scene, params, {}));
  }
}
BENCHMARK(BM_CoupledRollout)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
