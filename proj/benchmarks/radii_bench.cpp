#include <benchmark/benchmark.h>

#include "selfnorm/radii.hpp"

namespace {

void BM_BennettRadius(benchmark::State& state) {
  double c = 0.1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(selfnorm::bennett_radius(1.0, c, 0.1));
    c = c < 100.0 ? c * 1.1 : 0.1;
  }
}
BENCHMARK(BM_BennettRadius);

void BM_MixedBennettRadius(benchmark::State& state) {
  const selfnorm::RadiusConfig cfg;
  const double nu = static_cast<double>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(selfnorm::mixed_bennett_radius(nu, cfg));
}
BENCHMARK(BM_MixedBennettRadius)->Arg(0)->Arg(10)->Arg(1000)->Arg(100000);

void BM_VarianceUcb(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(selfnorm::variance_ucb(0.09 * static_cast<double>(n), n, 1.0, 0.05));
}
BENCHMARK(BM_VarianceUcb)->Arg(10)->Arg(10000);

}  // namespace
