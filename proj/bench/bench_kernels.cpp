#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "dualdiv/mc_oracle.hpp"
#include "dualdiv/renewal.hpp"

using namespace dualdiv;

namespace {

// Exponential-jump kernel g(y) = q + e^{-y}, tilted by 1, with simple
// midpoint cell moments; only the solver cost matters here.
renewal::Problem make_problem(std::size_t cells, std::vector<double>& rise,
                              std::vector<double>& fall) {
  const double h = 40.0 / cells;
  rise.assign(cells, 0.0);
  fall.assign(cells, 0.0);
  for (std::size_t k = 0; k < cells; ++k) {
    const double y = (k + 0.5) * h;
    const double g = std::exp(-y) * (0.1 + std::exp(-y)) * h / 2;
    rise[k] = g;
    fall[k] = g;
  }
  return {0.5, 0.0, 1.0, h, rise, fall};
}

void BM_RenewalSerial(benchmark::State& state) {
  std::vector<double> rise, fall;
  const auto p = make_problem(state.range(0), rise, fall);
  for (auto _ : state) benchmark::DoNotOptimize(renewal::solve_serial(p));
  state.SetComplexityN(state.range(0));
}

void BM_RenewalParallel(benchmark::State& state) {
  std::vector<double> rise, fall;
  const auto p = make_problem(state.range(0), rise, fall);
  for (auto _ : state) benchmark::DoNotOptimize(renewal::solve(p));
  state.SetComplexityN(state.range(0));
}

ModelSpec bench_model(double sigma) {
  return ModelSpec::from_c0(0.5, sigma, ExponentialJumps{1.0, 1.0});
}

void BM_EstimateSerial(benchmark::State& state) {
  const auto m = bench_model(state.range(1) / 10.0);
  SimConfig cfg;
  cfg.n_paths = state.range(0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(estimate_value_serial(m, PolicyParams{0.1, 0.3, 1.0}, 2.0, cfg));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_EstimateParallel(benchmark::State& state) {
  const auto m = bench_model(state.range(1) / 10.0);
  SimConfig cfg;
  cfg.n_paths = state.range(0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(estimate_value(m, PolicyParams{0.1, 0.3, 1.0}, 2.0, cfg));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_RenewalSerial)->RangeMultiplier(2)->Range(1024, 8192)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RenewalParallel)->RangeMultiplier(2)->Range(1024, 8192)->Unit(benchmark::kMillisecond);
// Second argument is 10·σ.
BENCHMARK(BM_EstimateSerial)->Args({20000, 0})->Args({2000, 4})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EstimateParallel)->Args({20000, 0})->Args({2000, 4})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
