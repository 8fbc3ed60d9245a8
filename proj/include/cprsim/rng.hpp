// Copyright (c) 2026 The cprsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace cprsim {

// All stochastic code in this library draws from std::mt19937_64 through the
// samplers below. The engine's output sequence is pinned by the standard, and
// the samplers are implemented here rather than via std::*_distribution, so a
// given seed produces the same stream on every platform.
using Rng = std::mt19937_64;

/// Derives an independent child seed from a master seed and a stream index.
/// Reports produced from one manifest seed split through this function are
/// reproducible regardless of execution order.
uint64_t split_seed(uint64_t master, uint64_t stream);

/// Uniform double in [0, 1).
double uniform01(Rng& rng);

/// Uniform integer in [0, n).
uint64_t uniform_below(Rng& rng, uint64_t n);

/// Standard normal via the polar method.
double sample_normal(Rng& rng);

double sample_exponential(Rng& rng, double rate);
double sample_gamma(Rng& rng, double shape, double scale);
double sample_weibull(Rng& rng, double shape, double scale);
double sample_lognormal(Rng& rng, double mu, double sigma);

/// Zipf(s) sampler over ranks 1..n, returned 0-based. Probability of rank k
/// is proportional to k^-s. Sampling is by inverse CDF on a precomputed
/// table, so draws cost O(log n).
class ZipfSampler {
 public:
  ZipfSampler(uint32_t n, double exponent);

  uint32_t operator()(Rng& rng) const;

  uint32_t size() const { return n_; }
  double exponent() const { return s_; }

  /// Exact probability of 0-based rank k.
  double pmf(uint32_t k) const;

  /// Exact total probability of the m most probable ranks.
  double top_mass(uint32_t m) const;

 private:
  uint32_t n_;
  double s_;
  std::vector<double> cdf_;
};

}  // namespace cprsim
