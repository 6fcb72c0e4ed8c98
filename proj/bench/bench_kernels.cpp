#include <numbers>
#include <vector>

#include <benchmark/benchmark.h>

#include "eprb/coincidence.hpp"
#include "eprb/efficiency.hpp"
#include "eprb/quantum_reference.hpp"
#include "eprb/simulator.hpp"
#include "eprb/statistics.hpp"

namespace {

eprb::SimulationConfig bench_config(std::uint64_t pairs) {
  eprb::SimulationConfig cfg;
  cfg.pair_count = pairs;
  cfg.seed = 7;
  return cfg;
}

const std::pair<eprb::StationDataset, eprb::StationDataset>& shared_data() {
  static const auto data = eprb::run_simulation(bench_config(200'000));
  return data;
}

void BM_SimulateSerial(benchmark::State& state) {
  const auto cfg = bench_config(static_cast<std::uint64_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(eprb::run_simulation_serial(cfg));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_SimulateParallel(benchmark::State& state) {
  const auto cfg = bench_config(static_cast<std::uint64_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(eprb::run_simulation(cfg));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_HistogramSerial(benchmark::State& state) {
  const auto& [ds1, ds2] = shared_data();
  for (auto _ : state) benchmark::DoNotOptimize(eprb::lag_histogram_serial(ds1, ds2));
}

void BM_HistogramParallel(benchmark::State& state) {
  const auto& [ds1, ds2] = shared_data();
  for (auto _ : state) benchmark::DoNotOptimize(eprb::lag_histogram(ds1, ds2));
}

std::vector<eprb::Ticks> sweep_windows() {
  std::vector<eprb::Ticks> w;
  for (eprb::Ticks t = 2; t <= 512; t *= 2) w.push_back(t);
  return w;
}

void BM_SweepSerial(benchmark::State& state) {
  const auto& [ds1, ds2] = shared_data();
  const auto windows = sweep_windows();
  for (auto _ : state) benchmark::DoNotOptimize(eprb::window_sweep_serial(ds1, ds2, windows, {}));
}

void BM_SweepParallel(benchmark::State& state) {
  const auto& [ds1, ds2] = shared_data();
  const auto windows = sweep_windows();
  for (auto _ : state) benchmark::DoNotOptimize(eprb::window_sweep(ds1, ds2, windows, {}));
}

void BM_ConsistencyTable(benchmark::State& state) {
  const auto table = eprb::StateTable::from_state(eprb::QuantumState::singlet(), 0.0, std::numbers::pi / 4,
                                                   std::numbers::pi / 8, 3 * std::numbers::pi / 8);
  const auto measured = eprb::forward_table({0.1, -0.05}, table);
  for (auto _ : state) benchmark::DoNotOptimize(eprb::consistency_table(measured));
}

}  // namespace

BENCHMARK(BM_SimulateSerial)->Arg(100'000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SimulateParallel)->Arg(100'000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_HistogramSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_HistogramParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SweepSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SweepParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConsistencyTable)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
