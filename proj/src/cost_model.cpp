// Copyright (c) 2026 The cprsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "cprsim/cost_model.hpp"

#include <cmath>
#include <stdexcept>

namespace cprsim {

namespace {

void check_interval(double t_save) {
  if (!(t_save > 0.0)) throw std::domain_error("save interval must be positive");
}

double overhead_terms(const CostParameters& p, double t_save, bool include_lost,
                      double t_total) {
  const double saving = p.o_save * (t_total / t_save);
  const double per_failure = p.o_load + (include_lost ? t_save / 2.0 : 0.0) + p.o_res;
  return saving + per_failure * (t_total / p.t_fail);
}

double self_consistent(const CostParameters& p, double t_save, bool include_lost) {
  // Overheads displace training work, so the wall-clock horizon grows by the
  // overhead itself; iterate to the fixed point t_eff = t_total + overhead.
  double overhead = overhead_terms(p, t_save, include_lost, p.t_total);
  for (int it = 0; it < 1000; ++it) {
    const double next = overhead_terms(p, t_save, include_lost, p.t_total + overhead);
    if (std::abs(next - overhead) < 1e-10) return next;
    overhead = next;
  }
  return overhead;
}

}  // namespace

void CostParameters::validate() const {
  const auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("CostParameters: ") + what);
  };
  require(o_save >= 0.0 && o_load >= 0.0 && o_res >= 0.0, "overhead constants must be >= 0");
  require(t_fail > 0.0, "t_fail must be positive");
  require(t_total > 0.0, "t_total must be positive");
  require(n_emb >= 1, "n_emb must be >= 1");
}

std::string_view strategy_name(Strategy strategy) {
  switch (strategy) {
    case Strategy::FullRecovery: return "full_recovery";
    case Strategy::PartialNaive: return "partial_naive";
    case Strategy::CprVanilla: return "cpr_vanilla";
    case Strategy::CprScar: return "cpr_scar";
    case Strategy::CprMfu: return "cpr_mfu";
    case Strategy::CprSsu: return "cpr_ssu";
  }
  return "unknown";
}

std::optional<Strategy> parse_strategy(std::string_view name) {
  if (name == "full_recovery") return Strategy::FullRecovery;
  if (name == "partial_naive") return Strategy::PartialNaive;
  if (name == "cpr_vanilla") return Strategy::CprVanilla;
  if (name == "cpr_scar") return Strategy::CprScar;
  if (name == "cpr_mfu") return Strategy::CprMfu;
  if (name == "cpr_ssu") return Strategy::CprSsu;
  return std::nullopt;
}

bool is_partial_strategy(Strategy strategy) { return strategy != Strategy::FullRecovery; }

bool is_priority_strategy(Strategy strategy) {
  return strategy == Strategy::CprScar || strategy == Strategy::CprMfu ||
         strategy == Strategy::CprSsu;
}

std::string_view recovery_choice_name(RecoveryChoice choice) {
  return choice == RecoveryChoice::FullRecovery ? "full_recovery" : "partial_recovery";
}

double full_overhead(const CostParameters& p, double t_save) {
  p.validate();
  check_interval(t_save);
  return overhead_terms(p, t_save, /*include_lost=*/true, p.t_total);
}

double partial_overhead(const CostParameters& p, double t_save) {
  p.validate();
  check_interval(t_save);
  return overhead_terms(p, t_save, /*include_lost=*/false, p.t_total);
}

double optimal_full_interval(const CostParameters& p) {
  p.validate();
  if (!(p.o_save > 0.0)) {
    throw std::domain_error("optimal_full_interval: o_save must be positive");
  }
  return std::sqrt(2.0 * p.o_save * p.t_fail);
}

double partial_interval_for_pls(double target_pls, int n_emb, double t_fail) {
  if (!(target_pls > 0.0 && target_pls <= 1.0)) {
    throw std::domain_error("partial_interval_for_pls: target_pls must be in (0, 1]");
  }
  if (n_emb < 1) throw std::domain_error("partial_interval_for_pls: n_emb must be >= 1");
  if (!(t_fail > 0.0)) throw std::domain_error("partial_interval_for_pls: t_fail must be positive");
  return 2.0 * target_pls * static_cast<double>(n_emb) * t_fail;
}

double full_overhead_self_consistent(const CostParameters& p, double t_save) {
  p.validate();
  check_interval(t_save);
  return self_consistent(p, t_save, /*include_lost=*/true);
}

double partial_overhead_self_consistent(const CostParameters& p, double t_save) {
  p.validate();
  check_interval(t_save);
  return self_consistent(p, t_save, /*include_lost=*/false);
}

StrategyDecision choose_strategy(const CostParameters& p, double target_pls, double margin) {
  if (!(margin >= 0.0)) throw std::invalid_argument("choose_strategy: margin must be >= 0");
  const double t_full = optimal_full_interval(p);
  const double t_part = partial_interval_for_pls(target_pls, p.n_emb, p.t_fail);

  StrategyDecision d;
  d.target_pls = target_pls;
  d.predicted_overhead_full = full_overhead(p, t_full);
  d.predicted_overhead_partial = partial_overhead(p, t_part);
  if (d.predicted_overhead_partial + margin < d.predicted_overhead_full) {
    d.chosen = RecoveryChoice::PartialRecovery;
    d.interval_hours = t_part;
  } else {
    d.chosen = RecoveryChoice::FullRecovery;
    d.interval_hours = t_full;
  }
  return d;
}

std::vector<ScalabilityPoint> scalability_sweep(const CostParameters& base,
                                                const FailureProcess& process,
                                                std::span<const int> node_range,
                                                double target_pls) {
  base.validate();
  process.validate();
  if (node_range.empty()) {
    throw std::invalid_argument("scalability_sweep: node_range must be non-empty");
  }
  const double mtbf_at_base = mtbf_for_nodes(process, process.base_nodes);

  std::vector<ScalabilityPoint> points;
  points.reserve(node_range.size());
  for (int n : node_range) {
    const double ratio = mtbf_for_nodes(process, n) / mtbf_at_base;
    CostParameters p = base;
    p.t_fail = base.t_fail * ratio;

    ScalabilityPoint pt;
    pt.nodes = n;
    pt.overhead_full = full_overhead(p, optimal_full_interval(p));

    // Shards scale proportionally with nodes; keep the count real-valued so
    // the sweep stays smooth. Partial recovery reloads and reschedules only
    // the failed portion, which shrinks as 1/n_emb.
    const double n_emb_scaled = static_cast<double>(base.n_emb) * static_cast<double>(n) /
                                static_cast<double>(process.base_nodes);
    const double portion = static_cast<double>(base.n_emb) / n_emb_scaled;
    const double t_part = 2.0 * target_pls * n_emb_scaled * p.t_fail;
    check_interval(t_part);
    const double saving = p.o_save * (p.t_total / t_part);
    const double per_failure = (p.o_load + p.o_res) * portion;
    pt.overhead_partial = saving + per_failure * (p.t_total / p.t_fail);
    points.push_back(pt);
  }
  return points;
}

}  // namespace cprsim
