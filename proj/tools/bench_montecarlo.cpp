// Copyright (c) 2026 The cprsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Benchmark: serial vs OpenMP-parallel Monte-Carlo fan-out. Both paths run
// identical per-seed work; the parallel path only distributes seeds, so
// this measures the fan-out speedup on analytic-mode runs.

#include <benchmark/benchmark.h>

#include "cprsim/simulator.hpp"

namespace {

cprsim::SimConfig bench_config() {
  cprsim::SimConfig config;
  config.costs.o_save = 0.094;
  config.costs.o_load = 0.042;
  config.costs.o_res = 0.042;
  config.costs.t_fail = 28.0;
  config.costs.t_total = 56.0;
  config.costs.n_emb = 8;
  config.process = cprsim::FailureProcess::uniform_hazard(1.0 / 28.0);
  config.policy.strategy = cprsim::Strategy::CprVanilla;
  config.master_seed = 20260822;
  return config;
}

void BM_MonteCarloSerial(benchmark::State& state) {
  const auto config = bench_config();
  const int n_seeds = static_cast<int>(state.range(0));
  for (auto _ : state) {
    auto reports = cprsim::monte_carlo(config, n_seeds, cprsim::ExecutionMode::Serial);
    benchmark::DoNotOptimize(reports.data());
  }
  state.SetItemsProcessed(state.iterations() * n_seeds);
}

void BM_MonteCarloParallel(benchmark::State& state) {
  const auto config = bench_config();
  const int n_seeds = static_cast<int>(state.range(0));
  for (auto _ : state) {
    auto reports = cprsim::monte_carlo(config, n_seeds, cprsim::ExecutionMode::Parallel);
    benchmark::DoNotOptimize(reports.data());
  }
  state.SetItemsProcessed(state.iterations() * n_seeds);
}

}  // namespace

BENCHMARK(BM_MonteCarloSerial)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MonteCarloParallel)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
