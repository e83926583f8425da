#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <vector>

#include "rainbow/error.hpp"
#include "rainbow/flow.hpp"
#include "rainbow/random.hpp"
#include "rainbow/traffic.hpp"

namespace rainbow {

/// Zero-mean IPD noise between the watermarking point and the detector.
struct JitterModel {
  NoiseDist dist = NoiseDist::laplace;
  double scale = 0.002;  ///< seconds: Laplace b, Gaussian sigma or uniform half-width
  std::uint64_t seed = 0;

  void validate() const {
    if (!(scale >= 0.0) || !std::isfinite(scale)) throw InvalidArgument("jitter scale must be >= 0");
  }
};

/// The raw (pre-clipping) jitter realization for `n` IPDs.
inline std::vector<double> sample_jitter(std::size_t n, const JitterModel& m) {
  m.validate();
  std::vector<double> j(n, 0.0);
  if (m.scale == 0.0) return j;
  Rng rng(m.seed);
  for (auto& x : j) x = sample_noise(rng, m.dist, m.scale);
  return j;
}

/// output_i = max(0, ipds_i + j_i).
inline IpdVector apply_jitter(const IpdVector& ipds, const JitterModel& m) {
  if (m.scale == 0.0) {
    m.validate();
    return ipds;
  }
  const auto j = sample_jitter(ipds.size(), m);
  std::vector<double> out(ipds.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(0.0, ipds[i] + j[i]);
  return IpdVector(std::move(out));
}

/// Laplace(mu, b) density.
struct LaplaceDensity {
  double location = 0.0;
  double diversity = 1.0;

  double log_pdf(double x) const { return -std::log(2.0 * diversity) - std::abs(x - location) / diversity; }
  double pdf(double x) const { return std::exp(log_pdf(x)); }
};

/// Gaussian(mu, sigma) density.
struct GaussianDensity {
  double location = 0.0;
  double sigma = 1.0;

  double log_pdf(double x) const {
    const double z = (x - location) / sigma;
    return -0.5 * z * z - std::log(sigma) - 0.5 * std::log(2.0 * std::numbers::pi);
  }
  double pdf(double x) const { return std::exp(log_pdf(x)); }
};

/// Uniform(mu - h, mu + h) density.
struct UniformDensity {
  double location = 0.0;
  double half_width = 1.0;

  double log_pdf(double x) const {
    return std::abs(x - location) <= half_width ? -std::log(2.0 * half_width)
                                                : -std::numeric_limits<double>::infinity();
  }
  double pdf(double x) const { return std::exp(log_pdf(x)); }
};

/// Exponential(rate) density on x >= 0.
struct ExponentialDensity {
  double rate = 1.0;

  double log_pdf(double x) const {
    return x >= 0.0 ? std::log(rate) - rate * x : -std::numeric_limits<double>::infinity();
  }
  double pdf(double x) const { return std::exp(log_pdf(x)); }
};

/// Log-density of a jitter model's noise law. Requires scale > 0.
inline double jitter_log_pdf(const JitterModel& m, double x) {
  switch (m.dist) {
    case NoiseDist::laplace: return LaplaceDensity{0.0, m.scale}.log_pdf(x);
    case NoiseDist::gaussian: return GaussianDensity{0.0, m.scale}.log_pdf(x);
    case NoiseDist::uniform: return UniformDensity{0.0, m.scale}.log_pdf(x);
  }
  return 0.0;
}

/// Density of X - Y for X, Y i.i.d. Exponential(lambda): Laplace(0, 1/lambda).
inline LaplaceDensity h0_difference_density(double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw InvalidArgument("lambda must be > 0");
  return LaplaceDensity{0.0, 1.0 / lambda};
}

inline LaplaceDensity h0_difference_density(const ModelAParams& model) { return h0_difference_density(model.rate_lambda); }

}  // namespace rainbow
