// Copyright (c) 2026 The cprsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Closed-form overhead accounting for checkpoint/recovery strategies:
// expected overhead of full and partial recovery, optimal save intervals,
// the full-vs-partial decision rule, and node-count scalability sweeps.

#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "cprsim/failure_model.hpp"

namespace cprsim {

/// Overhead constants and horizon parameters for the closed-form models.
/// Times are hours; n_emb is the number of embedding parameter-server
/// shards over which tables are partitioned.
struct CostParameters {
  double o_save = 0.0;  ///< cost of one full checkpoint save
  double o_load = 0.0;  ///< cost of one checkpoint load on failure
  double o_res = 0.0;   ///< rescheduling cost per failure
  double t_fail = 1.0;  ///< mean time between failures
  double t_total = 1.0; ///< training horizon
  int n_emb = 1;

  /// Throws std::invalid_argument on out-of-range fields.
  void validate() const;
};

/// The six recovery strategies the simulator can execute.
enum class Strategy { FullRecovery, PartialNaive, CprVanilla, CprScar, CprMfu, CprSsu };

std::string_view strategy_name(Strategy strategy);
std::optional<Strategy> parse_strategy(std::string_view name);

/// True for every strategy that restores only failed shards.
bool is_partial_strategy(Strategy strategy);

/// True for the priority-save variants (partial-row saves of hot tables).
bool is_priority_strategy(Strategy strategy);

enum class RecoveryChoice { FullRecovery, PartialRecovery };

std::string_view recovery_choice_name(RecoveryChoice choice);

/// Outcome of the full-vs-partial planning comparison.
struct StrategyDecision {
  RecoveryChoice chosen = RecoveryChoice::FullRecovery;
  double interval_hours = 0.0;  ///< save interval of the chosen strategy
  double predicted_overhead_full = 0.0;
  double predicted_overhead_partial = 0.0;
  double target_pls = 0.0;
};

/// Expected total overhead of full recovery at save interval t_save:
/// saving + (load + lost + reschedule) per expected failure. The lost term
/// is t_save/2 (uniform failure placement within an interval).
double full_overhead(const CostParameters& p, double t_save);

/// Expected total overhead of partial recovery: as full_overhead but with
/// no lost-computation term (survivors keep their progress).
double partial_overhead(const CostParameters& p, double t_save);

/// Interval minimizing full_overhead: sqrt(2 * o_save * t_fail).
/// Throws std::domain_error when o_save == 0 (interval unbounded).
double optimal_full_interval(const CostParameters& p);

/// Save interval that makes the expected portion-of-lost-samples equal
/// target_pls: 2 * target_pls * n_emb * t_fail.
double partial_interval_for_pls(double target_pls, int n_emb, double t_fail);

/// Variants that iterate the horizon to a fixed point t_eff = t_total +
/// overhead, for regimes where overhead is not small against the horizon.
double full_overhead_self_consistent(const CostParameters& p, double t_save);
double partial_overhead_self_consistent(const CostParameters& p, double t_save);

/// Compares full recovery at its optimal interval against partial recovery
/// at the PLS-derived interval; picks partial only when it wins by more
/// than `margin` hours.
StrategyDecision choose_strategy(const CostParameters& p, double target_pls, double margin);

struct ScalabilityPoint {
  int nodes = 0;
  double overhead_full = 0.0;
  double overhead_partial = 0.0;
};

/// Evaluates both overheads across node counts. For each n, the MTBF is
/// rescaled by mtbf_for_nodes relative to its value at base_nodes, and the
/// shard count scales proportionally with n. Full recovery reloads the
/// whole job regardless of n; partial recovery's per-failure load and
/// reschedule costs scale with the lost shard portion (base_n_emb /
/// n_emb(n)), since only the failed portion is reloaded and rescheduled.
std::vector<ScalabilityPoint> scalability_sweep(const CostParameters& base,
                                                const FailureProcess& process,
                                                std::span<const int> node_range,
                                                double target_pls);

}  // namespace cprsim
