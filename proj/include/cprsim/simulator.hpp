// Copyright (c) 2026 The cprsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Discrete-event harness tying failure schedules, checkpoint policies, and
// cost accounting into per-run reports. Two modes:
//  - Analytic: pure time bookkeeping on the work axis (fast Monte Carlo);
//  - Coupled: drives a toy training session so checkpoint policy choices
//    show up in model quality, not just in hours.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cprsim/checkpoint_engine.hpp"
#include "cprsim/cost_model.hpp"
#include "cprsim/failure_model.hpp"
#include "cprsim/report.hpp"
#include "cprsim/toy_trainer.hpp"

namespace cprsim {

enum class SimMode { Analytic, Coupled };
enum class ExecutionMode { Serial, Parallel };

/// Full description of one experiment family. `policy.t_save == 0` means
/// "derive the interval": the cost-optimal full interval for FullRecovery
/// and PartialNaive, the target-PLS interval for the CPR strategies.
struct SimConfig {
  CostParameters costs;
  FailureProcess process;
  CheckpointPolicy policy;
  SimMode mode = SimMode::Analytic;
  /// Failed-fraction menu sampled uniformly per failure event.
  std::vector<double> fraction_set = {0.5, 0.25, 0.125};
  int n_seeds = 1;
  uint64_t master_seed = 1;
  double target_pls = 0.1;
  /// choose_strategy margin, as a fraction of t_total.
  double margin_fraction = 0.01;
  /// Fraction of embedding parameters covered by the prioritized tables
  /// (analytic mode's stand-in for the real table inventory).
  double prioritized_fraction = 0.996;
  std::optional<ToyTrainerConfig> trainer;

  void validate() const;
};

/// The checkpoint interval run() will actually use (resolves t_save == 0).
double resolved_interval(const SimConfig& config);

/// One deterministic run: samples a failure trace from (config, seed),
/// walks saves and failures in time order, and charges the ledger.
SimulationReport run(const SimConfig& config, uint64_t seed);

/// Same as run() but with a caller-supplied failure trace (the trace's
/// horizon must equal costs.t_total). run(config, seed) is exactly
/// run_with_trace(config, <trace sampled from the seed>, seed).
SimulationReport run_with_trace(const SimConfig& config, const FailureTrace& trace,
                                uint64_t seed);

/// n_seeds independent runs with seeds split from config.master_seed.
/// Parallel execution fans runs across OpenMP threads; the report order is
/// by seed index either way.
std::vector<SimulationReport> monte_carlo(const SimConfig& config, int n_seeds,
                                          ExecutionMode exec = ExecutionMode::Serial);

struct StrategyComparison {
  Strategy strategy = Strategy::FullRecovery;
  double interval_hours = 0.0;
  RunAggregate aggregate;
  std::vector<SimulationReport> reports;
};

/// Runs every strategy over the same seed list. Failure traces and failed-
/// shard draws depend only on the seed, never on the policy, so rows are
/// comparable seed-for-seed (common random numbers).
std::vector<StrategyComparison> compare_strategies(const SimConfig& config,
                                                   std::span<const Strategy> strategies,
                                                   ExecutionMode exec = ExecutionMode::Serial);

/// Rebuilds ledger, overhead fraction, and final PLS from a report's event
/// log alone. run() output must replay to itself exactly.
SimulationReport replay_report(const SimConfig& config, const SimulationReport& original);

}  // namespace cprsim
