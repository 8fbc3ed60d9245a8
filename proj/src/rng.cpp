// Copyright (c) 2026 The cprsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "cprsim/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cprsim {

namespace {

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

uint64_t split_seed(uint64_t master, uint64_t stream) {
  return splitmix64(splitmix64(master) ^ splitmix64(stream * 0x9e3779b97f4a7c15ULL + 1));
}

double uniform01(Rng& rng) {
  // 53-bit mantissa, never returns 1.0.
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

uint64_t uniform_below(Rng& rng, uint64_t n) {
  if (n == 0) throw std::invalid_argument("uniform_below: n must be positive");
  // Rejection to avoid modulo bias.
  const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t v;
  do {
    v = rng();
  } while (v >= limit);
  return v % n;
}

double sample_normal(Rng& rng) {
  for (;;) {
    const double u = 2.0 * uniform01(rng) - 1.0;
    const double v = 2.0 * uniform01(rng) - 1.0;
    const double s = u * u + v * v;
    if (s > 0.0 && s < 1.0) {
      return u * std::sqrt(-2.0 * std::log(s) / s);
    }
  }
}

double sample_exponential(Rng& rng, double rate) {
  if (rate <= 0.0) throw std::invalid_argument("sample_exponential: rate must be positive");
  return -std::log1p(-uniform01(rng)) / rate;
}

double sample_gamma(Rng& rng, double shape, double scale) {
  if (shape <= 0.0 || scale <= 0.0) {
    throw std::invalid_argument("sample_gamma: shape and scale must be positive");
  }
  if (shape < 1.0) {
    // Boost the shape and correct with a power of a uniform.
    const double u = uniform01(rng);
    return sample_gamma(rng, shape + 1.0, scale) * std::pow(u, 1.0 / shape);
  }
  // Marsaglia-Tsang squeeze.
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = sample_normal(rng);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform01(rng);
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v * scale;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v * scale;
  }
}

double sample_weibull(Rng& rng, double shape, double scale) {
  if (shape <= 0.0 || scale <= 0.0) {
    throw std::invalid_argument("sample_weibull: shape and scale must be positive");
  }
  return scale * std::pow(-std::log1p(-uniform01(rng)), 1.0 / shape);
}

double sample_lognormal(Rng& rng, double mu, double sigma) {
  if (sigma <= 0.0) throw std::invalid_argument("sample_lognormal: sigma must be positive");
  return std::exp(mu + sigma * sample_normal(rng));
}

ZipfSampler::ZipfSampler(uint32_t n, double exponent) : n_(n), s_(exponent) {
  if (n == 0) throw std::invalid_argument("ZipfSampler: n must be positive");
  if (!(exponent > 0.0)) throw std::invalid_argument("ZipfSampler: exponent must be positive");
  cdf_.resize(n);
  double acc = 0.0;
  for (uint32_t k = 0; k < n; ++k) {
    acc += std::pow(static_cast<double>(k) + 1.0, -s_);
    cdf_[k] = acc;
  }
  const double total = cdf_.back();
  for (auto& c : cdf_) c /= total;
  cdf_.back() = 1.0;
}

uint32_t ZipfSampler::operator()(Rng& rng) const {
  const double u = uniform01(rng);
  const auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
  return static_cast<uint32_t>(it - cdf_.begin());
}

double ZipfSampler::pmf(uint32_t k) const {
  if (k >= n_) return 0.0;
  const double prev = k == 0 ? 0.0 : cdf_[k - 1];
  return cdf_[k] - prev;
}

double ZipfSampler::top_mass(uint32_t m) const {
  if (m == 0) return 0.0;
  if (m >= n_) return 1.0;
  return cdf_[m - 1];
}

}  // namespace cprsim
