// Copyright (c) 2026 The cprsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Failure-time distributions: representation, maximum-likelihood fitting,
// node-count MTBF scaling, and renewal-process schedule sampling.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cprsim/rng.hpp"

namespace cprsim {

/// Distribution family of a failure-time model. UniformHazard is a constant
/// hazard rate (Poisson arrivals) used by the emulation configs; the other
/// four families are fit candidates for recorded traces.
enum class DistFamily { Gamma, Weibull, Exponential, LogNormal, UniformHazard };

std::string_view family_name(DistFamily family);
std::optional<DistFamily> parse_family(std::string_view name);

/// How MTBF scales with the number of nodes in a job.
enum class NodeScaling {
  LinearMTBF,        ///< MTBF(n) * n is constant.
  IndependentNodes,  ///< Each node fails independently with probability p per period.
};

std::string_view scaling_name(NodeScaling scaling);
std::optional<NodeScaling> parse_scaling(std::string_view name);

/// A parametric failure-time model plus its node-count scaling rule.
///
/// `params` layout by family: Gamma/Weibull {shape, scale}, Exponential
/// {rate}, LogNormal {mu, sigma}, UniformHazard {rate in events/hour}.
struct FailureProcess {
  DistFamily family = DistFamily::UniformHazard;
  /// Defaults to one failure per 28 hours so a default-constructed process
  /// is immediately usable.
  std::vector<double> params{1.0 / 28.0};
  int base_nodes = 1;
  NodeScaling scaling = NodeScaling::LinearMTBF;

  /// IndependentNodes scaling: per-node failure probability per period and
  /// the period length in hours.
  double node_failure_prob = 0.0;
  double period_hours = 1.0;

  /// Optional hazard multiplier over the first `burn_in_fraction` of the
  /// horizon (UniformHazard only; 1.0 disables it). Models an elevated
  /// early-phase failure rate without changing steady-state behavior.
  double burn_in_multiplier = 1.0;
  double burn_in_fraction = 0.0;

  static FailureProcess gamma(double shape, double scale);
  static FailureProcess weibull(double shape, double scale);
  static FailureProcess exponential(double rate);
  static FailureProcess lognormal(double mu, double sigma);
  static FailureProcess uniform_hazard(double events_per_hour);

  /// Throws std::invalid_argument on malformed parameters.
  void validate() const;

  /// Mean time to failure in hours at base_nodes (the distribution mean).
  double mean_hours() const;

  /// Draws one inter-failure gap in hours (ignores burn-in shaping).
  double sample_gap(Rng& rng) const;
};

/// One failure event: when it happens and what fraction of the embedding
/// shards it takes down.
struct FailureEvent {
  double time_hours = 0.0;
  double lost_fraction = 1.0;
};

/// An ordered failure schedule over a fixed horizon.
struct FailureTrace {
  std::vector<FailureEvent> events;
  double horizon_hours = 0.0;

  /// Throws std::invalid_argument if events are unordered or out of range.
  void validate() const;
};

/// Result of fitting one family to a sample of failure times.
struct FittedDistribution {
  DistFamily family = DistFamily::Exponential;
  std::vector<double> params;
  double survival_rmse = 0.0;
  double log_likelihood = 0.0;

  /// Fitted survival function S(t) = P(T > t).
  double survival(double t) const;
};

/// Thrown when maximum-likelihood fitting cannot proceed (degenerate sample
/// or non-convergence); the message names the family.
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Maximum-likelihood fit of `family` to strictly positive failure times.
/// survival_rmse scores the fit against the empirical step survival curve
/// evaluated at the sorted sample points. Convergence tolerance: 1e-8 on
/// log-likelihood.
FittedDistribution fit_distribution(std::span<const double> samples, DistFamily family);

/// MTBF in hours for a job of `n` nodes under the process's scaling rule.
/// LinearMTBF: mean_hours() * base_nodes / n. IndependentNodes:
/// period_hours / (1 - (1-p)^n); throws std::domain_error when p == 0
/// (infinite MTBF).
double mtbf_for_nodes(const FailureProcess& process, int n);

/// Samples a failure schedule as a renewal process: i.i.d. inter-failure
/// gaps, events past the horizon discarded, lost_fraction drawn uniformly
/// from `fraction_set`. Deterministic per seed.
FailureTrace sample_failure_schedule(const FailureProcess& process, double horizon_hours,
                                     std::span<const double> fraction_set, uint64_t seed);

/// How observed MTBF is computed from a collection of per-job traces; the
/// two interpretations differ when jobs see multiple failures.
enum class MtbfCountMode {
  FirstFailureOnly,  ///< Mean time of the first event, over traces that have one.
  AllFailures,       ///< Total horizon hours divided by total event count.
};

/// Observed MTBF from traces; throws std::domain_error when no events exist.
double observed_mtbf(std::span<const FailureTrace> traces, MtbfCountMode mode);

/// Reads a trace file: one time-to-failure in hours per line, `#` comments
/// and blank lines allowed. Throws std::runtime_error on I/O or parse error.
std::vector<double> load_trace_samples(const std::string& path);

/// Writes fit results as CSV with header
/// family,param1,param2,survival_rmse,log_likelihood,note. param2 and note
/// are empty where not applicable.
void write_fit_report_csv(std::ostream& out, std::span<const FittedDistribution> fits,
                          std::span<const std::string> notes = {});

}  // namespace cprsim
