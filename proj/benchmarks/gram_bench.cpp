#include <vector>

#include <benchmark/benchmark.h>

#include "selfnorm/gram.hpp"
#include "selfnorm/rng.hpp"
#include "selfnorm/tracker.hpp"

namespace {

const selfnorm::KernelSpec kRbf{selfnorm::KernelFamily::Rbf, 0.01, 1};

// Cost of growing a Gram state to n points, refactors included.
void BM_GramAppend(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    selfnorm::Rng rng(1);
    selfnorm::GramState gram(kRbf, 0.05);
    for (std::size_t i = 0; i < n; ++i) {
      const double x = rng.uniform();
      benchmark::DoNotOptimize(gram.append({&x, 1}));
    }
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_GramAppend)->RangeMultiplier(2)->Range(128, 2048)->Complexity();

void BM_KernelTrackerStream(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    selfnorm::Rng rng(2);
    selfnorm::KernelTracker tracker(selfnorm::GramState(kRbf, 0.05));
    for (std::size_t i = 0; i < n; ++i) {
      const double x = rng.uniform();
      tracker.step({&x, 1}, rng.rademacher(), 1.0);
    }
    benchmark::DoNotOptimize(tracker.self_norm_stat());
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_KernelTrackerStream)->RangeMultiplier(2)->Range(128, 2048)->Complexity();

void BM_RidgeNormQuery(benchmark::State& state) {
  selfnorm::Rng rng(3);
  selfnorm::GramState gram(kRbf, 0.05);
  for (std::int64_t i = 0; i < state.range(0); ++i) {
    const double x = rng.uniform();
    gram.append({&x, 1});
  }
  double q = 0.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(gram.ridge_norm_sq({&q, 1}));
    q = q < 1.0 ? q + 0.001 : 0.0;
  }
}
BENCHMARK(BM_RidgeNormQuery)->Arg(100)->Arg(1000);

}  // namespace
