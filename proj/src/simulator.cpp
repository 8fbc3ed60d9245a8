// Copyright (c) 2026 The cprsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "cprsim/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cprsim/pls.hpp"
#include "cprsim/rng.hpp"

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace cprsim {

namespace {

/// Work-axis sample rate used by analytic mode to translate event times
/// into PLS sample counts. It cancels out of every PLS ratio, so the value
/// only sets the rounding granularity.
constexpr double kAnalyticSamplesPerHour = 1e6;

/// Seed-stream tags. Traces and per-failure shard draws depend only on
/// (seed, tag), never on the policy, which is what makes strategy
/// comparisons common-random-number clean.
constexpr uint64_t kTraceStream = 0xfa11ULL;
constexpr uint64_t kFailureStreamBase = 0xe000ULL;

struct TimedEvent {
  double time_hours = 0.0;
  bool is_save = false;
  SaveKind kind = SaveKind::FullAll;
  double lost_fraction = 0.0;
  size_t failure_ordinal = 0;
};

std::vector<TimedEvent> merge_timeline(const std::vector<SaveAction>& saves,
                                       const FailureTrace& trace) {
  std::vector<TimedEvent> events;
  events.reserve(saves.size() + trace.events.size());
  for (const auto& a : saves) {
    events.push_back({a.time_hours, true, a.kind, 0.0, 0});
  }
  for (size_t i = 0; i < trace.events.size(); ++i) {
    events.push_back({trace.events[i].time_hours, false, SaveKind::FullAll,
                      trace.events[i].lost_fraction, i});
  }
  // Saves win ties: a failure at a checkpoint instant loses nothing.
  std::stable_sort(events.begin(), events.end(), [](const TimedEvent& a, const TimedEvent& b) {
    if (a.time_hours != b.time_hours) return a.time_hours < b.time_hours;
    return a.is_save && !b.is_save;
  });
  return events;
}

std::vector<int> draw_failed_shards(double fraction, int n_emb, Rng& rng) {
  const auto want = static_cast<int>(std::ceil(fraction * static_cast<double>(n_emb) - 1e-9));
  const int count = std::clamp(want, 1, n_emb);
  std::vector<int> pool(static_cast<size_t>(n_emb));
  for (int i = 0; i < n_emb; ++i) pool[static_cast<size_t>(i)] = i;
  for (int i = 0; i < count; ++i) {
    const auto j = i + static_cast<int>(uniform_below(rng, static_cast<uint64_t>(n_emb - i)));
    std::swap(pool[static_cast<size_t>(i)], pool[static_cast<size_t>(j)]);
  }
  pool.resize(static_cast<size_t>(count));
  std::sort(pool.begin(), pool.end());
  return pool;
}

SimulationReport run_analytic(const SimConfig& config, const FailureTrace& trace,
                              uint64_t seed) {
  const double t_total = config.costs.t_total;
  const int n_emb = config.costs.n_emb;
  const double interval = resolved_interval(config);

  CheckpointPolicy policy = config.policy;
  policy.t_save = interval;
  if (is_priority_strategy(policy.strategy) && policy.prioritized_tables.empty()) {
    // Analytic mode has no table inventory; the schedule only needs the
    // kinds, so a placeholder inventory is enough.
    policy.prioritized_tables = {0};
  }
  policy.validate();

  const auto events = merge_timeline(plan_schedule(policy, t_total), trace);

  const auto count_at = [](double t) {
    return static_cast<int64_t>(std::llround(t * kAnalyticSamplesPerHour));
  };
  PlsLedger pls(std::max<int64_t>(1, count_at(t_total)), n_emb);

  const double pf = config.prioritized_fraction;
  const auto save_cost = [&](SaveKind kind) {
    switch (kind) {
      case SaveKind::FullAll:
        return config.costs.o_save;
      case SaveKind::FullNonPrioritized:
        return config.costs.o_save * (1.0 - pf);
      case SaveKind::PartialPrioritized:
        return config.costs.o_save * pf * policy.r;
    }
    return config.costs.o_save;
  };

  SimulationReport report;
  report.seed = seed;
  report.strategy = policy.strategy;
  report.interval_hours = interval;

  const bool full_recovery = policy.strategy == Strategy::FullRecovery;
  double last_consistent = 0.0;
  for (const auto& e : events) {
    if (e.is_save) {
      const bool pls_tick = e.kind != SaveKind::PartialPrioritized;
      if (pls_tick) {
        pls.record_checkpoint_all(count_at(e.time_hours));
        last_consistent = e.time_hours;
      }
      const double cost = save_cost(e.kind);
      report.ledger.save_hours += cost;
      SimEvent ev;
      ev.kind = SimEventKind::Save;
      ev.time_hours = e.time_hours;
      ev.charged_hours = cost;
      ev.full_coverage = pls_tick;
      report.events.push_back(ev);
      continue;
    }
    SimEvent ev;
    ev.kind = SimEventKind::Failure;
    ev.time_hours = e.time_hours;
    ev.lost_fraction = e.lost_fraction;
    if (full_recovery) {
      const double lost = e.time_hours - last_consistent;
      report.ledger.lost_hours += lost;
      report.ledger.load_hours += config.costs.o_load;
      report.ledger.reschedule_hours += config.costs.o_res;
      ev.charged_hours = config.costs.o_load + config.costs.o_res + lost;
    } else {
      Rng shard_rng(split_seed(seed, kFailureStreamBase + e.failure_ordinal));
      ev.failed_shards = draw_failed_shards(e.lost_fraction, n_emb, shard_rng);
      pls.record_failure(count_at(e.time_hours), ev.failed_shards);
      report.ledger.load_hours += config.costs.o_load;
      report.ledger.reschedule_hours += config.costs.o_res;
      ev.charged_hours = config.costs.o_load + config.costs.o_res;
    }
    report.events.push_back(ev);
  }

  report.final_pls = full_recovery ? 0.0 : pls.pls();
  report.overhead_fraction = report.ledger.total() / t_total;
  return report;
}

SimulationReport run_coupled(const SimConfig& config, const FailureTrace& trace,
                             uint64_t seed) {
  const double interval = resolved_interval(config);
  ExperimentConfig exp;
  exp.trainer = *config.trainer;
  exp.costs = config.costs;
  exp.policy = config.policy;
  exp.policy.t_save = interval;

  const ExperimentResult result = run_failure_experiment(exp, trace, seed);

  SimulationReport report;
  report.seed = seed;
  report.strategy = config.policy.strategy;
  report.interval_hours = interval;
  report.ledger = result.ledger;
  report.final_pls = result.final_pls;
  report.overhead_fraction = result.overhead_fraction;
  report.events = result.events;
  report.auc = result.metrics.auc;
  return report;
}

}  // namespace

void SimConfig::validate() const {
  costs.validate();
  process.validate();
  if (policy.t_save != 0.0 && !(policy.t_save > 0.0)) {
    throw std::invalid_argument("SimConfig: policy.t_save must be positive or 0 (auto)");
  }
  if (policy.t_save > 0.0) {
    CheckpointPolicy check = policy;
    if (is_priority_strategy(check.strategy) && check.prioritized_tables.empty()) {
      check.prioritized_tables = {0};
    }
    check.validate();
  }
  if (fraction_set.empty()) {
    throw std::invalid_argument("SimConfig: fraction_set must not be empty");
  }
  for (double f : fraction_set) {
    if (!(f > 0.0) || f > 1.0) {
      throw std::invalid_argument("SimConfig: fractions must lie in (0, 1]");
    }
  }
  if (n_seeds < 1) throw std::invalid_argument("SimConfig: n_seeds must be >= 1");
  if (!(target_pls > 0.0)) throw std::invalid_argument("SimConfig: target_pls must be positive");
  if (margin_fraction < 0.0) {
    throw std::invalid_argument("SimConfig: margin_fraction must be >= 0");
  }
  if (!(prioritized_fraction > 0.0) || prioritized_fraction > 1.0) {
    throw std::invalid_argument("SimConfig: prioritized_fraction must lie in (0, 1]");
  }
  if (mode == SimMode::Coupled && !trainer.has_value()) {
    throw std::invalid_argument("SimConfig: coupled mode requires a trainer config");
  }
  if (trainer.has_value()) trainer->validate();
}

double resolved_interval(const SimConfig& config) {
  if (config.policy.t_save > 0.0) return config.policy.t_save;
  switch (config.policy.strategy) {
    case Strategy::FullRecovery:
    case Strategy::PartialNaive:
      return optimal_full_interval(config.costs);
    default:
      return partial_interval_for_pls(config.target_pls, config.costs.n_emb,
                                      config.costs.t_fail);
  }
}

SimulationReport run(const SimConfig& config, uint64_t seed) {
  config.validate();
  const FailureTrace trace =
      sample_failure_schedule(config.process, config.costs.t_total, config.fraction_set,
                              split_seed(seed, kTraceStream));
  if (config.mode == SimMode::Coupled) return run_coupled(config, trace, seed);
  return run_analytic(config, trace, seed);
}

SimulationReport run_with_trace(const SimConfig& config, const FailureTrace& trace,
                                uint64_t seed) {
  config.validate();
  trace.validate();
  if (std::abs(trace.horizon_hours - config.costs.t_total) > 1e-9) {
    throw std::invalid_argument("run_with_trace: trace horizon != costs.t_total");
  }
  if (config.mode == SimMode::Coupled) return run_coupled(config, trace, seed);
  return run_analytic(config, trace, seed);
}

std::vector<SimulationReport> monte_carlo(const SimConfig& config, int n_seeds,
                                          ExecutionMode exec) {
  if (n_seeds < 1) throw std::invalid_argument("monte_carlo: n_seeds must be >= 1");
  config.validate();
  std::vector<SimulationReport> reports(static_cast<size_t>(n_seeds));
  if (exec == ExecutionMode::Parallel) {
#if defined(_OPENMP)
#pragma omp parallel for schedule(dynamic)
#endif
    for (int i = 0; i < n_seeds; ++i) {
      reports[static_cast<size_t>(i)] =
          run(config, split_seed(config.master_seed, static_cast<uint64_t>(i)));
    }
  } else {
    for (int i = 0; i < n_seeds; ++i) {
      reports[static_cast<size_t>(i)] =
          run(config, split_seed(config.master_seed, static_cast<uint64_t>(i)));
    }
  }
  return reports;
}

std::vector<StrategyComparison> compare_strategies(const SimConfig& config,
                                                   std::span<const Strategy> strategies,
                                                   ExecutionMode exec) {
  std::vector<StrategyComparison> rows;
  rows.reserve(strategies.size());
  for (Strategy s : strategies) {
    SimConfig variant = config;
    variant.policy.strategy = s;
    StrategyComparison row;
    row.strategy = s;
    row.interval_hours = resolved_interval(variant);
    row.reports = monte_carlo(variant, config.n_seeds, exec);
    row.aggregate = aggregate_reports(row.reports);
    rows.push_back(std::move(row));
  }
  return rows;
}

SimulationReport replay_report(const SimConfig& config, const SimulationReport& original) {
  SimulationReport replay = original;
  replay.ledger = OverheadLedger{};

  const double t_total = config.costs.t_total;
  const int n_emb = config.costs.n_emb;
  const bool full_recovery = original.strategy == Strategy::FullRecovery;
  double last_consistent = 0.0;
  double pls = 0.0;
  std::vector<double> shard_checkpoint(static_cast<size_t>(n_emb), 0.0);
  for (const auto& e : original.events) {
    if (e.kind == SimEventKind::Save) {
      replay.ledger.save_hours += e.charged_hours;
      if (e.full_coverage) {
        last_consistent = e.time_hours;
        std::fill(shard_checkpoint.begin(), shard_checkpoint.end(), e.time_hours);
      }
      continue;
    }
    replay.ledger.load_hours += config.costs.o_load;
    replay.ledger.reschedule_hours += config.costs.o_res;
    if (full_recovery) {
      replay.ledger.lost_hours += e.time_hours - last_consistent;
    } else {
      for (int s : e.failed_shards) {
        pls += (e.time_hours - shard_checkpoint[static_cast<size_t>(s)]) /
               (t_total * static_cast<double>(n_emb));
      }
    }
  }
  replay.final_pls = full_recovery ? 0.0 : pls;
  replay.overhead_fraction = replay.ledger.total() / t_total;
  return replay;
}

}  // namespace cprsim
