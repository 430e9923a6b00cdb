#include "sppm/rng.hpp"
#include "sppm/sampling.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace sppm;

std::vector<Vector> gradients(int n, int d) {
  CounterRng rng(9, 0);
  std::vector<Vector> g;
  for (int i = 0; i < n; ++i) g.push_back(Vector::NullaryExpr(d, [&] { return rng.uniform() - 0.5; }));
  return g;
}

void BM_NiceConstants(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto g = gradients(n, 10);
  const std::vector<double> mu(static_cast<std::size_t>(n), 0.1);
  for (auto _ : state) benchmark::DoNotOptimize(sampling_constants(scheme::Nice{n / 2}, mu, g));
}

void BM_OptimalClustering(benchmark::State& state) {
  const auto g = gradients(9, 4);
  for (auto _ : state) benchmark::DoNotOptimize(optimal_ss_clustering(g, 3));
}

void BM_Draw(benchmark::State& state, SamplingScheme s) {
  const CohortSampler sampler(std::move(s), 100);
  CounterRng rng(1, 0);
  for (auto _ : state) benchmark::DoNotOptimize(sampler.draw(rng));
}

Partition tens() {
  Partition p(10);
  for (int i = 0; i < 100; ++i) p[static_cast<std::size_t>(i / 10)].push_back(i);
  return p;
}

}  // namespace

BENCHMARK(BM_NiceConstants)->Arg(8)->Arg(16)->Arg(20);
BENCHMARK(BM_OptimalClustering);
BENCHMARK_CAPTURE(BM_Draw, nice10, SamplingScheme{scheme::Nice{10}});
BENCHMARK_CAPTURE(BM_Draw, stratified10, SamplingScheme{scheme::Stratified{tens()}});
