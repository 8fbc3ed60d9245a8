// Copyright (c) 2026 The cprsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Per-run overhead ledger, event log, and report serialization shared by
// the simulator and the coupled trainer experiments.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cprsim/cost_model.hpp"

namespace cprsim {

/// The four overhead categories, in hours charged against the run.
struct OverheadLedger {
  double save_hours = 0.0;
  double load_hours = 0.0;
  double lost_hours = 0.0;
  double reschedule_hours = 0.0;

  double total() const { return save_hours + load_hours + lost_hours + reschedule_hours; }
};

enum class SimEventKind { Save, Failure };

/// One timeline entry: a save (with its charged cost) or a failure (with
/// the failed shards and per-event charges).
struct SimEvent {
  SimEventKind kind = SimEventKind::Save;
  double time_hours = 0.0;
  double charged_hours = 0.0;        ///< save cost, or load+lost+reschedule
  double lost_fraction = 0.0;        ///< failures only
  std::vector<int> failed_shards;    ///< failures only
  bool full_coverage = false;        ///< saves: counts as a PLS checkpoint tick
};

/// Everything one run reports.
struct SimulationReport {
  uint64_t seed = 0;
  Strategy strategy = Strategy::FullRecovery;
  double interval_hours = 0.0;
  OverheadLedger ledger;
  double final_pls = 0.0;
  double overhead_fraction = 0.0;  ///< ledger.total() / t_total
  std::vector<SimEvent> events;
  std::optional<double> auc;  ///< coupled mode only
};

/// Aggregate statistics over a batch of runs.
struct RunAggregate {
  size_t runs = 0;
  double mean_overhead_fraction = 0.0;
  double p50_overhead_fraction = 0.0;
  double p75_overhead_fraction = 0.0;
  double p95_overhead_fraction = 0.0;
  double mean_final_pls = 0.0;
  std::optional<double> mean_auc;
};

RunAggregate aggregate_reports(const std::vector<SimulationReport>& reports);

/// CSV header for per-run rows:
/// seed,strategy,interval_hours,save_hours,load_hours,lost_hours,
/// reschedule_hours,overhead_fraction,final_pls,auc
std::string report_csv_header();
std::string report_csv_row(const SimulationReport& report);
void write_reports_csv(std::ostream& out, const std::vector<SimulationReport>& reports);

}  // namespace cprsim
