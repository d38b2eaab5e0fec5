// Hot paths: Sturm bisection on long truncations, Chen's delta, the Poisson
// solve and the simulation inner loop.

#include <benchmark/benchmark.h>

#include "bdclt/chain.hpp"
#include "bdclt/observable.hpp"
#include "bdclt/simulate.hpp"
#include "bdclt/spectral.hpp"

namespace {

using namespace bdclt;

void BM_TopEigenvalue(benchmark::State& state) {
  const auto chain = build_chain(LampertiDrift{0.25, 0.5});
  const auto j = jacobi_matrix(chain, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(top_eigenvalue(j, 0));
}
BENCHMARK(BM_TopEigenvalue)->RangeMultiplier(10)->Range(1000, 100000)->Unit(benchmark::kMillisecond);

void BM_ChenDelta(benchmark::State& state) {
  const auto chain = build_chain(LampertiDrift{0.25, 0.5});
  for (auto _ : state) {
    benchmark::DoNotOptimize(chen_delta(chain, static_cast<std::size_t>(state.range(0))).value);
  }
}

BENCHMARK(BM_ChenDelta)->RangeMultiplier(10)->Range(1000, 1000000)->Unit(benchmark::kMillisecond);

void BM_Sigma2Resolvent(benchmark::State& state) {
  const auto chain = build_chain(LampertiDrift{0.25, 0.5});
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto pi = normalize(chain, stationary_weights(chain, 2 * m));
  const auto v = center(table_observable({1.0, 2.0, -1.0}), pi);
  for (auto _ : state) benchmark::DoNotOptimize(sigma2_resolvent(v, chain, m).sigma2);
}
BENCHMARK(BM_Sigma2Resolvent)->RangeMultiplier(4)->Range(1024, 65536)->Unit(benchmark::kMillisecond);

void BM_SimulationSteps(benchmark::State& state) {
  const auto chain = build_chain(ConstantDrift{1.0 / 3.0});
  const auto pi = stationary_law(chain);
  const auto v = center(indicator_observable(0, pi.truncation()), pi);
  SimConfig cfg;
  cfg.replicas = 64;
  cfg.steps = static_cast<std::size_t>(state.range(0));
  cfg.pilot_steps = 1000;
  cfg.threads = 1;
  for (auto _ : state) benchmark::DoNotOptimize(variance_growth(v, chain, pi, cfg).sigma2_mc);
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(cfg.replicas * cfg.steps));
}
BENCHMARK(BM_SimulationSteps)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
