#include <benchmark/benchmark.h>

#include "ctid/experiment.hpp"

namespace {

ctid::ExperimentConfig bench_config() {
  ctid::ExperimentConfig c = ctid::builtin_experiment("section5");
  c.scenario.duration = 100.0;
  c.outputs.snapshot_times.clear();
  return c;
}

void BM_MonteCarloSerial(benchmark::State& state) {
  const auto c = bench_config();
  const auto runs = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    auto r = ctid::run_monte_carlo_serial([&c](std::uint64_t s) { return ctid::experiment_run(c, s); }, runs, 1);
    benchmark::DoNotOptimize(r);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_MonteCarloParallel(benchmark::State& state) {
  const auto c = bench_config();
  const auto runs = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    auto r = ctid::run_monte_carlo([&c](std::uint64_t s) { return ctid::experiment_run(c, s); }, runs, 1);
    benchmark::DoNotOptimize(r);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_EstimatorSample(benchmark::State& state) {
  const auto c = bench_config();
  const ctid::Record rec = ctid::simulate(c.scenario);
  for (auto _ : state) {
    auto tr = ctid::track(rec, c.estimator, 1);
    benchmark::DoNotOptimize(tr);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(rec.size()));
}

}  // namespace

BENCHMARK(BM_MonteCarloSerial)->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MonteCarloParallel)->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EstimatorSample)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
