// Copyright (c) 2026 The cprsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "cprsim/failure_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

namespace cprsim {

namespace {

constexpr double kLogLikelihoodTol = 1e-8;
constexpr int kMaxIterations = 200;

double mean_of(std::span<const double> xs) {
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double mean_log(std::span<const double> xs) {
  double acc = 0.0;
  for (double x : xs) acc += std::log(x);
  return acc / static_cast<double>(xs.size());
}

double gamma_log_likelihood(std::span<const double> xs, double shape, double scale) {
  const auto n = static_cast<double>(xs.size());
  double sum_x = 0.0, sum_log = 0.0;
  for (double x : xs) {
    sum_x += x;
    sum_log += std::log(x);
  }
  return (shape - 1.0) * sum_log - sum_x / scale - n * shape * std::log(scale) -
         n * std::lgamma(shape);
}

double weibull_log_likelihood(std::span<const double> xs, double shape, double scale) {
  const auto n = static_cast<double>(xs.size());
  double sum_log = 0.0, sum_pow = 0.0;
  for (double x : xs) {
    sum_log += std::log(x);
    sum_pow += std::pow(x / scale, shape);
  }
  return n * std::log(shape) - n * shape * std::log(scale) + (shape - 1.0) * sum_log - sum_pow;
}

std::vector<double> fit_gamma_params(std::span<const double> xs) {
  const double mean = mean_of(xs);
  const double s = std::log(mean) - mean_log(xs);
  if (!(s > 0.0)) {
    throw FitError("gamma fit failed: zero log-moment gap (degenerate sample)");
  }
  // Closed-form starting point, then Newton on ln(a) - digamma(a) = s.
  double a = (3.0 - s + std::sqrt((s - 3.0) * (s - 3.0) + 24.0 * s)) / (12.0 * s);
  double ll = gamma_log_likelihood(xs, a, mean / a);
  for (int it = 0; it < kMaxIterations; ++it) {
    const double f = std::log(a) - boost::math::digamma(a) - s;
    const double fprime = 1.0 / a - boost::math::trigamma(a);
    double next = a - f / fprime;
    if (!(next > 0.0)) next = a / 2.0;
    const double next_ll = gamma_log_likelihood(xs, next, mean / next);
    const bool converged = std::abs(next_ll - ll) < kLogLikelihoodTol;
    a = next;
    ll = next_ll;
    if (converged) break;
  }
  return {a, mean / a};
}

std::vector<double> fit_weibull_params(std::span<const double> xs) {
  const auto n = static_cast<double>(xs.size());
  const double lbar = mean_log(xs);
  double var_log = 0.0;
  for (double x : xs) {
    const double d = std::log(x) - lbar;
    var_log += d * d;
  }
  var_log /= n;
  if (!(var_log > 0.0)) {
    throw FitError("weibull fit failed: zero log-variance (degenerate sample)");
  }
  // Moment-matched starting point for the shape, then Newton on the profile
  // likelihood's stationarity condition.
  double k = 1.28254983016187 / std::sqrt(var_log);  // pi / sqrt(6 * var_log)
  auto scale_for = [&](double shape) {
    double sum_pow = 0.0;
    for (double x : xs) sum_pow += std::pow(x, shape);
    return std::pow(sum_pow / n, 1.0 / shape);
  };
  double ll = weibull_log_likelihood(xs, k, scale_for(k));
  for (int it = 0; it < kMaxIterations; ++it) {
    double sp = 0.0, spl = 0.0, spl2 = 0.0;
    for (double x : xs) {
      const double p = std::pow(x, k);
      const double lx = std::log(x);
      sp += p;
      spl += p * lx;
      spl2 += p * lx * lx;
    }
    const double g = spl / sp - 1.0 / k - lbar;
    const double gprime = (spl2 * sp - spl * spl) / (sp * sp) + 1.0 / (k * k);
    double next = k - g / gprime;
    if (!(next > 0.0)) next = k / 2.0;
    const double next_ll = weibull_log_likelihood(xs, next, scale_for(next));
    const bool converged = std::abs(next_ll - ll) < kLogLikelihoodTol;
    k = next;
    ll = next_ll;
    if (converged) break;
  }
  return {k, scale_for(k)};
}

}  // namespace

std::string_view family_name(DistFamily family) {
  switch (family) {
    case DistFamily::Gamma: return "gamma";
    case DistFamily::Weibull: return "weibull";
    case DistFamily::Exponential: return "exponential";
    case DistFamily::LogNormal: return "lognormal";
    case DistFamily::UniformHazard: return "uniform_hazard";
  }
  return "unknown";
}

std::optional<DistFamily> parse_family(std::string_view name) {
  if (name == "gamma") return DistFamily::Gamma;
  if (name == "weibull") return DistFamily::Weibull;
  if (name == "exponential") return DistFamily::Exponential;
  if (name == "lognormal") return DistFamily::LogNormal;
  if (name == "uniform_hazard") return DistFamily::UniformHazard;
  return std::nullopt;
}

std::string_view scaling_name(NodeScaling scaling) {
  switch (scaling) {
    case NodeScaling::LinearMTBF: return "linear_mtbf";
    case NodeScaling::IndependentNodes: return "independent_nodes";
  }
  return "unknown";
}

std::optional<NodeScaling> parse_scaling(std::string_view name) {
  if (name == "linear_mtbf") return NodeScaling::LinearMTBF;
  if (name == "independent_nodes") return NodeScaling::IndependentNodes;
  return std::nullopt;
}

FailureProcess FailureProcess::gamma(double shape, double scale) {
  FailureProcess p;
  p.family = DistFamily::Gamma;
  p.params = {shape, scale};
  p.validate();
  return p;
}

FailureProcess FailureProcess::weibull(double shape, double scale) {
  FailureProcess p;
  p.family = DistFamily::Weibull;
  p.params = {shape, scale};
  p.validate();
  return p;
}

FailureProcess FailureProcess::exponential(double rate) {
  FailureProcess p;
  p.family = DistFamily::Exponential;
  p.params = {rate};
  p.validate();
  return p;
}

FailureProcess FailureProcess::lognormal(double mu, double sigma) {
  FailureProcess p;
  p.family = DistFamily::LogNormal;
  p.params = {mu, sigma};
  p.validate();
  return p;
}

FailureProcess FailureProcess::uniform_hazard(double events_per_hour) {
  FailureProcess p;
  p.family = DistFamily::UniformHazard;
  p.params = {events_per_hour};
  p.validate();
  return p;
}

void FailureProcess::validate() const {
  const auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("FailureProcess: ") + what);
  };
  switch (family) {
    case DistFamily::Gamma:
    case DistFamily::Weibull:
      require(params.size() == 2, "expected {shape, scale}");
      require(params[0] > 0.0 && params[1] > 0.0, "shape and scale must be positive");
      break;
    case DistFamily::Exponential:
    case DistFamily::UniformHazard:
      require(params.size() == 1, "expected {rate}");
      require(params[0] > 0.0, "rate must be positive");
      break;
    case DistFamily::LogNormal:
      require(params.size() == 2, "expected {mu, sigma}");
      require(params[1] > 0.0, "sigma must be positive");
      break;
  }
  require(base_nodes >= 1, "base_nodes must be >= 1");
  require(std::isfinite(mean_hours()) && mean_hours() > 0.0, "distribution mean must be finite and positive");
  if (scaling == NodeScaling::IndependentNodes) {
    require(node_failure_prob >= 0.0 && node_failure_prob <= 1.0,
            "node_failure_prob must be in [0, 1]");
    require(period_hours > 0.0, "period_hours must be positive");
  }
  require(burn_in_multiplier > 0.0, "burn_in_multiplier must be positive");
  require(burn_in_fraction >= 0.0 && burn_in_fraction <= 1.0,
          "burn_in_fraction must be in [0, 1]");
  if (burn_in_multiplier != 1.0 && burn_in_fraction > 0.0 && family != DistFamily::UniformHazard) {
    throw std::invalid_argument("FailureProcess: burn-in shaping requires uniform_hazard");
  }
}

double FailureProcess::mean_hours() const {
  switch (family) {
    case DistFamily::Gamma: return params[0] * params[1];
    case DistFamily::Weibull: return params[1] * std::tgamma(1.0 + 1.0 / params[0]);
    case DistFamily::Exponential:
    case DistFamily::UniformHazard: return 1.0 / params[0];
    case DistFamily::LogNormal: return std::exp(params[0] + 0.5 * params[1] * params[1]);
  }
  return std::numeric_limits<double>::quiet_NaN();
}

double FailureProcess::sample_gap(Rng& rng) const {
  switch (family) {
    case DistFamily::Gamma: return sample_gamma(rng, params[0], params[1]);
    case DistFamily::Weibull: return sample_weibull(rng, params[0], params[1]);
    case DistFamily::Exponential:
    case DistFamily::UniformHazard: return sample_exponential(rng, params[0]);
    case DistFamily::LogNormal: return sample_lognormal(rng, params[0], params[1]);
  }
  return std::numeric_limits<double>::quiet_NaN();
}

void FailureTrace::validate() const {
  double prev = -std::numeric_limits<double>::infinity();
  for (const auto& e : events) {
    if (!(e.time_hours > prev)) {
      throw std::invalid_argument("FailureTrace: event times must be strictly increasing");
    }
    if (e.time_hours < 0.0 || e.time_hours > horizon_hours) {
      throw std::invalid_argument("FailureTrace: event time outside [0, horizon]");
    }
    if (!(e.lost_fraction > 0.0 && e.lost_fraction <= 1.0)) {
      throw std::invalid_argument("FailureTrace: lost_fraction must be in (0, 1]");
    }
    prev = e.time_hours;
  }
}

double FittedDistribution::survival(double t) const {
  if (t <= 0.0) return 1.0;
  switch (family) {
    case DistFamily::Gamma:
      return boost::math::gamma_q(params[0], t / params[1]);
    case DistFamily::Weibull:
      return std::exp(-std::pow(t / params[1], params[0]));
    case DistFamily::Exponential:
    case DistFamily::UniformHazard:
      return std::exp(-params[0] * t);
    case DistFamily::LogNormal:
      return 0.5 * std::erfc((std::log(t) - params[0]) / (params[1] * std::sqrt(2.0)));
  }
  return std::numeric_limits<double>::quiet_NaN();
}

FittedDistribution fit_distribution(std::span<const double> samples, DistFamily family) {
  if (family == DistFamily::UniformHazard) {
    throw FitError("uniform_hazard is not a fit candidate; fit exponential instead");
  }
  const std::string name(family_name(family));
  if (samples.size() < 3) {
    throw FitError(name + " fit failed: need at least 3 samples, got " +
                   std::to_string(samples.size()));
  }
  for (double x : samples) {
    if (!(x > 0.0) || !std::isfinite(x)) {
      throw FitError(name + " fit failed: samples must be strictly positive and finite");
    }
  }
  const auto [mn, mx] = std::minmax_element(samples.begin(), samples.end());
  if (*mn == *mx) {
    throw FitError(name + " fit failed: all samples identical (degenerate)");
  }

  FittedDistribution fit;
  fit.family = family;
  const auto n = static_cast<double>(samples.size());
  switch (family) {
    case DistFamily::Gamma: {
      fit.params = fit_gamma_params(samples);
      fit.log_likelihood = gamma_log_likelihood(samples, fit.params[0], fit.params[1]);
      break;
    }
    case DistFamily::Weibull: {
      fit.params = fit_weibull_params(samples);
      fit.log_likelihood = weibull_log_likelihood(samples, fit.params[0], fit.params[1]);
      break;
    }
    case DistFamily::Exponential: {
      const double rate = 1.0 / mean_of(samples);
      fit.params = {rate};
      double sum_x = std::accumulate(samples.begin(), samples.end(), 0.0);
      fit.log_likelihood = n * std::log(rate) - rate * sum_x;
      break;
    }
    case DistFamily::LogNormal: {
      const double mu = mean_log(samples);
      double var = 0.0;
      for (double x : samples) {
        const double d = std::log(x) - mu;
        var += d * d;
      }
      var /= n;
      if (!(var > 0.0)) throw FitError(name + " fit failed: zero log-variance");
      const double sigma = std::sqrt(var);
      fit.params = {mu, sigma};
      double ll = -0.5 * n * std::log(2.0 * M_PI) - n * std::log(sigma) - 0.5 * n;
      for (double x : samples) ll -= std::log(x);
      fit.log_likelihood = ll;
      break;
    }
    case DistFamily::UniformHazard:
      break;  // unreachable (rejected above)
  }

  // Score against the empirical step survival curve at the sorted points:
  // S_emp just after the i-th order statistic is (n - i) / n.
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  double sq = 0.0;
  for (size_t i = 0; i < sorted.size(); ++i) {
    const double emp = (n - static_cast<double>(i + 1)) / n;
    const double d = fit.survival(sorted[i]) - emp;
    sq += d * d;
  }
  fit.survival_rmse = std::sqrt(sq / n);
  return fit;
}

double mtbf_for_nodes(const FailureProcess& process, int n) {
  if (n < 1) throw std::invalid_argument("mtbf_for_nodes: n must be >= 1");
  switch (process.scaling) {
    case NodeScaling::LinearMTBF:
      return process.mean_hours() * static_cast<double>(process.base_nodes) /
             static_cast<double>(n);
    case NodeScaling::IndependentNodes: {
      const double p = process.node_failure_prob;
      if (p <= 0.0) {
        throw std::domain_error("mtbf_for_nodes: failure probability 0 gives infinite MTBF");
      }
      const double any_fail = 1.0 - std::pow(1.0 - p, static_cast<double>(n));
      return process.period_hours / any_fail;
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

FailureTrace sample_failure_schedule(const FailureProcess& process, double horizon_hours,
                                     std::span<const double> fraction_set, uint64_t seed) {
  if (!(horizon_hours >= 0.0)) {
    throw std::invalid_argument("sample_failure_schedule: horizon must be non-negative");
  }
  if (fraction_set.empty()) {
    throw std::invalid_argument("sample_failure_schedule: fraction_set must be non-empty");
  }
  for (double f : fraction_set) {
    if (!(f > 0.0 && f <= 1.0)) {
      throw std::invalid_argument("sample_failure_schedule: fractions must be in (0, 1]");
    }
  }
  process.validate();

  FailureTrace trace;
  trace.horizon_hours = horizon_hours;
  Rng rng(split_seed(seed, 0x7261ce));

  const bool shaped = process.family == DistFamily::UniformHazard &&
                      process.burn_in_multiplier != 1.0 && process.burn_in_fraction > 0.0;
  double t = 0.0;
  if (shaped) {
    // Piecewise-constant hazard: rate * multiplier on [0, cut), rate after.
    // Memorylessness lets each segment restart with a fresh exponential.
    const double rate = process.params[0];
    const double cut = process.burn_in_fraction * horizon_hours;
    double segment_rate = rate * process.burn_in_multiplier;
    for (;;) {
      const double gap = sample_exponential(rng, segment_rate);
      if (t < cut && t + gap >= cut && segment_rate != rate) {
        t = cut;
        segment_rate = rate;
        continue;
      }
      t += gap;
      if (t > horizon_hours) break;
      const double f = fraction_set[uniform_below(rng, fraction_set.size())];
      trace.events.push_back({t, f});
    }
  } else {
    for (;;) {
      t += process.sample_gap(rng);
      if (t > horizon_hours) break;
      const double f = fraction_set[uniform_below(rng, fraction_set.size())];
      trace.events.push_back({t, f});
    }
  }
  return trace;
}

double observed_mtbf(std::span<const FailureTrace> traces, MtbfCountMode mode) {
  switch (mode) {
    case MtbfCountMode::FirstFailureOnly: {
      double sum = 0.0;
      size_t count = 0;
      for (const auto& tr : traces) {
        if (!tr.events.empty()) {
          sum += tr.events.front().time_hours;
          ++count;
        }
      }
      if (count == 0) throw std::domain_error("observed_mtbf: no failure events in traces");
      return sum / static_cast<double>(count);
    }
    case MtbfCountMode::AllFailures: {
      double horizon = 0.0;
      size_t count = 0;
      for (const auto& tr : traces) {
        horizon += tr.horizon_hours;
        count += tr.events.size();
      }
      if (count == 0) throw std::domain_error("observed_mtbf: no failure events in traces");
      return horizon / static_cast<double>(count);
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

std::vector<double> load_trace_samples(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace file: " + path);
  std::vector<double> samples;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      line.erase(hash);
    }
    const auto begin = line.find_first_not_of(" \t\r");
    if (begin == std::string::npos) continue;
    const auto end = line.find_last_not_of(" \t\r");
    const std::string token = line.substr(begin, end - begin + 1);
    try {
      size_t used = 0;
      const double v = std::stod(token, &used);
      if (used != token.size()) throw std::invalid_argument(token);
      samples.push_back(v);
    } catch (const std::exception&) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": cannot parse failure time '" + token + "'");
    }
  }
  return samples;
}

void write_fit_report_csv(std::ostream& out, std::span<const FittedDistribution> fits,
                          std::span<const std::string> notes) {
  out << "family,param1,param2,survival_rmse,log_likelihood,note\n";
  std::ostringstream row;
  row.precision(17);
  for (size_t i = 0; i < fits.size(); ++i) {
    const auto& f = fits[i];
    row.str("");
    row << family_name(f.family) << ',';
    if (!f.params.empty()) row << f.params[0];
    row << ',';
    if (f.params.size() > 1) row << f.params[1];
    row << ',' << f.survival_rmse << ',' << f.log_likelihood << ',';
    if (i < notes.size()) row << notes[i];
    out << row.str() << '\n';
  }
}

}  // namespace cprsim
