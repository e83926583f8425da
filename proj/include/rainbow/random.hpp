#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <string_view>

#include "rainbow/error.hpp"

namespace rainbow {

/// SplitMix64 finalizer (Steele, Lea & Flood 2014). Bijective 64-bit mix.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// 64-bit FNV-1a of a role label.
constexpr std::uint64_t role_hash(std::string_view role) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : role) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// Seed fan-out: seed = splitmix64(splitmix64(splitmix64(master) ^ trial) ^ fnv1a(role)).
///
/// Each trial's randomness depends only on (master, trial, role), so adding
/// trials never reshuffles earlier ones.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t trial, std::string_view role) noexcept {
  return splitmix64(splitmix64(splitmix64(master) ^ trial) ^ role_hash(role));
}

/// Random source used by every generator.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. The variate transforms below are written out by hand because the
/// std:: distributions are implementation-defined, which would make results
/// differ between standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on the open interval (0, 1), 53-bit resolution.
  double uniform() {
    for (;;) {
      const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
      if (u > 0.0) return u;
    }
  }

  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Exponential with the given rate, by inversion.
  double exponential(double rate) { return -std::log(uniform()) / rate; }

  /// Laplace(0, scale), by inversion.
  double laplace(double scale) {
    const double u = uniform() - 0.5;
    return u < 0.0 ? scale * std::log1p(2.0 * u) : -scale * std::log1p(-2.0 * u);
  }

  /// Normal(0, sigma), Box-Muller (one variate per call; the pair's cosine half).
  double gaussian(double sigma) {
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    return sigma * r * std::cos(2.0 * std::numbers::pi * uniform());
  }

  /// Fair coin.
  bool bit() { return (engine_() >> 63) != 0; }

  /// Uniform integer in [0, n), n > 0 , rejection-sampled to avoid modulo bias.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    for (;;) {
      const std::uint64_t x = engine_();
      if (x < limit) return x % n;
    }
  }

 private:
  std::mt19937_64 engine_;
};

/// Zero-mean noise families used for jitter and model-B deviations.
enum class NoiseDist { laplace, gaussian, uniform };

inline std::string_view to_string(NoiseDist d) noexcept {
  switch (d) {
    case NoiseDist::laplace: return "laplace";
    case NoiseDist::gaussian: return "gaussian";
    case NoiseDist::uniform: return "uniform";
  }
  return "?";
}

inline NoiseDist parse_noise_dist(std::string_view s) {
  if (s == "laplace") return NoiseDist::laplace;
  if (s == "gaussian") return NoiseDist::gaussian;
  if (s == "uniform") return NoiseDist::uniform;
  throw InvalidArgument("unknown noise distribution '" + std::string(s) + "'");
}

/// One zero-mean draw. `scale` is the Laplace diversity b, the Gaussian
/// sigma, or the uniform half-width.
inline double sample_noise(Rng& rng, NoiseDist dist, double scale) {
  switch (dist) {
    case NoiseDist::laplace: return rng.laplace(scale);
    case NoiseDist::gaussian: return rng.gaussian(scale);
    case NoiseDist::uniform: return rng.uniform(-scale, scale);
  }
  return 0.0;
}

}  // namespace rainbow
