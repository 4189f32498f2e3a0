#include <benchmark/benchmark.h>

#include <vector>

#include "partforge/geometry.hpp"
#include "partforge/primitives.hpp"
#include "partforge/rng.hpp"

using namespace partforge;

namespace {

const Mesh& bench_mesh() {
  static const Mesh mesh = [] {
    const Mesh sphere = make_uv_sphere({-0.4, 0.0, 0.0}, 0.45, 64, 32);
    const Mesh box = make_box({0.1, -0.3, -0.3}, {0.8, 0.3, 0.3});
    const Mesh cyl = make_cylinder({0.0, 0.5, 0.0}, 0.15, 0.6);
    return concat_meshes({&sphere, &box, &cyl});
  }();
  return mesh;
}

std::vector<Vec3> bench_cloud(std::size_t n) {
  Rng rng(7);
  std::vector<Vec3> pts(n);
  for (auto& p : pts) p = Vec3{2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0};
  return pts;
}

GridSpec bench_grid(int resolution) { return fit_grid(bench_mesh().bounds(), resolution, 0.1); }

void BM_Udf_Parallel(benchmark::State& state) {
  const auto spec = bench_grid(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(compute_udf(bench_mesh(), spec));
}

void BM_Udf_Reference(benchmark::State& state) {
  const auto spec = bench_grid(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(reference::compute_udf(bench_mesh(), spec));
}

void BM_Fps_Parallel(benchmark::State& state) {
  const auto pts = bench_cloud(static_cast<std::size_t>(state.range(0)));
  const auto k = static_cast<std::size_t>(state.range(1));
  for (auto _ : state) {
    benchmark::DoNotOptimize(farthest_point_sample(std::span<const Vec3>(pts), k, StartRule::FirstIndex));
  }
}

void BM_Fps_Reference(benchmark::State& state) {
  const auto pts = bench_cloud(static_cast<std::size_t>(state.range(0)));
  const auto k = static_cast<std::size_t>(state.range(1));
  for (auto _ : state) {
    benchmark::DoNotOptimize(reference::farthest_point_sample(std::span<const Vec3>(pts), k, StartRule::FirstIndex));
  }
}

void BM_Sample_Parallel(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const bool visibility = state.range(1) != 0;
  for (auto _ : state) benchmark::DoNotOptimize(sample_surface(bench_mesh(), n, 11, visibility));
}

void BM_Sample_Reference(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const bool visibility = state.range(1) != 0;
  for (auto _ : state) benchmark::DoNotOptimize(reference::sample_surface(bench_mesh(), n, 11, visibility));
}

}  // namespace

BENCHMARK(BM_Udf_Parallel)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Udf_Reference)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Fps_Parallel)->Args({8192, 2048})->Args({30000, 8192})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Fps_Reference)->Args({8192, 2048})->Args({30000, 8192})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Sample_Parallel)->Args({8192, 0})->Args({8192, 1})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Sample_Reference)->Args({8192, 0})->Args({8192, 1})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
