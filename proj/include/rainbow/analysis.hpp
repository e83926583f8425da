#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rainbow/channel.hpp"
#include "rainbow/detect.hpp"
#include "rainbow/error.hpp"
#include "rainbow/parallel.hpp"
#include "rainbow/random.hpp"
#include "rainbow/traffic.hpp"
#include "rainbow/watermark.hpp"

namespace rainbow {

// ---------------------------------------------------------------------------
// ROC / AUC

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;  ///< sorted by fpr, (0,0) first, (1,1) last
  double auc = 0.0;
  std::size_t n_h0 = 0;
  std::size_t n_h1 = 0;
};

namespace detail {

inline void check_scores(std::span<const double> s, const char* what) {
  if (s.empty()) throw InvalidArgument(std::string(what) + " scores are empty");
  for (double v : s)
    if (std::isnan(v)) throw InvalidArgument(std::string(what) + " scores contain NaN");
}

}  // namespace detail

/// Mann-Whitney AUC: P(h1 > h0) + P(h1 == h0) / 2.
inline double auc_mann_whitney(std::span<const double> h0, std::span<const double> h1) {
  detail::check_scores(h0, "H0");
  detail::check_scores(h1, "H1");
  std::vector<double> a(h0.begin(), h0.end()), b(h1.begin(), h1.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  // Twice the win count plus ties, accumulated exactly.
  std::uint64_t twice = 0;
  std::size_t lo = 0, hi = 0;
  for (double v : b) {
    while (lo < a.size() && a[lo] < v) ++lo;
    while (hi < a.size() && a[hi] <= v) ++hi;
    twice += 2 * lo + (hi - lo);
  }
  return static_cast<double>(twice) / (2.0 * static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

/// Threshold sweep over the pooled scores, decision rule score >= threshold.
inline RocCurve roc(std::span<const double> h0, std::span<const double> h1) {
  RocCurve curve;
  curve.auc = auc_mann_whitney(h0, h1);
  curve.n_h0 = h0.size();
  curve.n_h1 = h1.size();
  std::vector<double> a(h0.begin(), h0.end()), b(h1.begin(), h1.end());
  std::sort(a.begin(), a.end(), std::greater<>());
  std::sort(b.begin(), b.end(), std::greater<>());
  const double n0 = static_cast<double>(a.size()), n1 = static_cast<double>(b.size());
  curve.points.push_back({0.0, 0.0});
  std::size_t i = 0, j = 0;
  while (i < a.size() || j < b.size()) {
    const double v = (j == b.size() || (i < a.size() && a[i] >= b[j])) ? a[i] : b[j];
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    curve.points.push_back({static_cast<double>(i) / n0, static_cast<double>(j) / n1});
  }
  return curve;
}

/// Trapezoidal area under the ROC points.
inline double trapezoid_auc(const RocCurve& c) {
  double area = 0.0;
  for (std::size_t k = 1; k < c.points.size(); ++k)
    area += (c.points[k].fpr - c.points[k - 1].fpr) * (c.points[k].tpr + c.points[k - 1].tpr) / 2.0;
  return area;
}

// ---------------------------------------------------------------------------
// Neyman-Pearson threshold calibration

/// Smallest H0 score s such that the fraction of H0 scores >= s is at most
/// `target_fpr`. When even the largest score is tied more often than that,
/// the next double above it is returned (achieved FPR 0).
inline double calibrate_threshold(std::span<const double> h0, double target_fpr) {
  if (!(target_fpr > 0.0 && target_fpr < 1.0)) throw InvalidArgument("target FPR must be in (0, 1)");
  detail::check_scores(h0, "H0");
  const auto needed = static_cast<std::size_t>(std::ceil(1.0 / target_fpr - 1e-9));
  if (h0.size() < needed)
    throw CalibrationError("FPR " + format_double(target_fpr) + " needs at least " + std::to_string(needed) +
                           " H0 scores, got " + std::to_string(h0.size()));
  std::vector<double> s(h0.begin(), h0.end());
  std::sort(s.begin(), s.end(), std::greater<>());
  const auto allowed = static_cast<std::size_t>(std::floor(target_fpr * static_cast<double>(s.size()) + 1e-9));
  double threshold = std::nextafter(s.front(), std::numeric_limits<double>::infinity());
  std::size_t k = 0;
  while (k < s.size()) {
    const double v = s[k];
    std::size_t end = k;
    while (end < s.size() && s[end] == v) ++end;
    if (end > allowed) break;  // end = count of scores >= v
    threshold = v;
    k = end;
  }
  return threshold;
}

inline double fraction_at_or_above(std::span<const double> scores, double threshold) {
  if (scores.empty()) return 0.0;
  const auto c = std::count_if(scores.begin(), scores.end(), [&](double v) { return v >= threshold; });
  return static_cast<double>(c) / static_cast<double>(scores.size());
}

// ---------------------------------------------------------------------------
// Gaussian approximation of error rates

/// Standard normal upper tail, Q(z) = erfc(z / sqrt 2) / 2.
inline double q_function(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

enum class ErrorMethod { monte_carlo, gaussian_approx };

struct ErrorRates {
  double p_fa = 0.0;
  double p_md = 0.0;
  double threshold = 0.0;
  ErrorMethod method = ErrorMethod::monte_carlo;
};

inline ErrorRates gaussian_error_approx(double mu0, double sigma0, double mu1, double sigma1, double threshold) {
  if (!(sigma0 > 0.0) || !(sigma1 > 0.0)) throw InvalidArgument("gaussian_error_approx: sigmas must be > 0");
  return {q_function((threshold - mu0) / sigma0), q_function((mu1 - threshold) / sigma1), threshold,
          ErrorMethod::gaussian_approx};
}

/// Empirical error rates at a threshold.
inline ErrorRates empirical_error_rates(std::span<const double> h0, std::span<const double> h1, double threshold) {
  return {fraction_at_or_above(h0, threshold), 1.0 - fraction_at_or_above(h1, threshold), threshold,
          ErrorMethod::monte_carlo};
}

// ---------------------------------------------------------------------------
// Experiment scenarios

enum class TrafficModel { model_a, model_b, trace };

inline std::string_view to_string(TrafficModel m) noexcept {
  switch (m) {
    case TrafficModel::model_a: return "model_a";
    case TrafficModel::model_b: return "model_b";
    case TrafficModel::trace: return "trace";
  }
  return "?";
}

inline TrafficModel parse_traffic_model(std::string_view s) {
  if (s == "model_a") return TrafficModel::model_a;
  if (s == "model_b") return TrafficModel::model_b;
  if (s == "trace") return TrafficModel::trace;
  throw InvalidArgument("unknown scenario '" + std::string(s) + "'");
}

/// Everything needed to sample one H0/H1 trial pair.
struct Scenario {
  TrafficModel traffic = TrafficModel::model_a;
  double lambda = 10.0;
  std::size_t n_packets = 500;
  double deviation_sigma = 0.005;
  NoiseDist deviation_dist = NoiseDist::laplace;
  std::vector<Flow> trace_flows;  ///< pool for TrafficModel::trace
  double amplitude = 0.005;
  std::optional<double> base_offset;  ///< default: 10 * amplitude
  NoiseDist jitter_dist = NoiseDist::laplace;
  double jitter_scale = 0.002;

  void validate() const {
    ModelAParams{lambda, n_packets, 0}.validate();
    WatermarkParams{0, 1, amplitude}.validate();
    JitterModel{jitter_dist, jitter_scale, 0}.validate();
    if (!(deviation_sigma >= 0.0)) throw InvalidArgument("deviation_sigma must be >= 0");
    if (deviation_dist == NoiseDist::uniform) throw InvalidArgument("deviation_dist must be laplace or gaussian");
    if (base_offset && !(*base_offset >= 0.0)) throw InvalidArgument("base_offset must be >= 0");
    if (traffic == TrafficModel::trace && trace_flows.size() < 2)
      throw InvalidArgument("trace scenario needs at least 2 flows");
  }

  double effective_base_offset() const { return base_offset.value_or(10.0 * amplitude); }

  DetectorContext detector_context() const { return {lambda, JitterModel{jitter_dist, jitter_scale, 0}}; }
};

/// One sampled trial. Every detector sees the same flows:
///  - record:     incoming flow X as recorded, with its watermark
///  - active_h1:  IPDs of X's watermarked egress after the jitter channel
///  - passive_h1: IPDs of X's unwatermarked egress after the same jitter
///  - h0:         IPDs of an unrelated flow Y after its own jitter
struct Trial {
  WatermarkRecord record;
  IpdVector active_h1;
  IpdVector passive_h1;
  IpdVector h0;
  std::size_t clip_count = 0;
};

/// Samples trials of a scenario from a master seed. Trial t depends only on
/// (master_seed, t); the model-B base is one model-A draw per master seed.
class TrialSampler {
 public:
  TrialSampler(Scenario scenario, std::uint64_t master_seed)
      : scenario_(std::move(scenario)), master_(master_seed) {
    scenario_.validate();
    if (scenario_.traffic == TrafficModel::model_b)
      base_ = gen_model_a({scenario_.lambda, scenario_.n_packets, derive_seed(master_, 0, "model_b_base")}, "base");
  }

  const Scenario& scenario() const noexcept { return scenario_; }
  std::uint64_t master_seed() const noexcept { return master_; }
  const std::optional<Flow>& base() const noexcept { return base_; }

  Trial sample(std::uint64_t t) const {
    const auto [x, y] = draw_pair(t);
    const IpdVector x_ipds = ipd(x);
    WatermarkParams wp{derive_seed(master_, t, "watermark_key"), x_ipds.size(), scenario_.amplitude};
    auto embedded = embed(x, wp, scenario_.effective_base_offset());

    const JitterModel j1{scenario_.jitter_dist, scenario_.jitter_scale, derive_seed(master_, t, "jitter_h1")};
    const JitterModel j0{scenario_.jitter_dist, scenario_.jitter_scale, derive_seed(master_, t, "jitter_h0")};
    Trial trial;
    trial.clip_count = embedded.record.embed_stats.clip_count;
    trial.active_h1 = apply_jitter(ipd(embedded.outgoing), j1);
    trial.passive_h1 = apply_jitter(x_ipds, j1);
    trial.h0 = apply_jitter(ipd(y), j0);
    trial.record = std::move(embedded.record);
    return trial;
  }

 private:
  std::pair<Flow, Flow> draw_pair(std::uint64_t t) const {
    const auto sx = derive_seed(master_, t, "flow_x");
    const auto sy = derive_seed(master_, t, "flow_y");
    switch (scenario_.traffic) {
      case TrafficModel::model_a:
        return {gen_model_a({scenario_.lambda, scenario_.n_packets, sx}, "x"),
                gen_model_a({scenario_.lambda, scenario_.n_packets, sy}, "y")};
      case TrafficModel::model_b:
        return {gen_model_b({*base_, scenario_.deviation_sigma, scenario_.deviation_dist, sx}, "x"),
                gen_model_b({*base_, scenario_.deviation_sigma, scenario_.deviation_dist, sy}, "y")};
      case TrafficModel::trace: {
        const auto& pool = scenario_.trace_flows;
        Rng rng(derive_seed(master_, t, "trace_pick"));
        const auto i = rng.below(pool.size());
        auto k = rng.below(pool.size() - 1);
        if (k >= i) ++k;
        return {pool[i], pool[k]};
      }
    }
    throw InvalidArgument("bad traffic model");
  }

  Scenario scenario_;
  std::uint64_t master_;
  std::optional<Flow> base_;
};

/// H0/H1 scores of one detector over a batch of trials, indexed by trial.
/// Degenerate inputs are scored -inf and counted.
struct DetectorScores {
  DetectorKind detector = DetectorKind::slcorr;
  std::vector<double> h0;
  std::vector<double> h1;
  std::size_t degenerate = 0;
};

/// Score `n_h1` H1 trials and `n_h0` H0 trials (trial indices from 0) for
/// every detector. Results do not depend on `workers`.
inline std::vector<DetectorScores> run_trials(const TrialSampler& sampler, std::span<const DetectorKind> detectors,
                                              std::size_t n_h1, std::size_t n_h0, unsigned workers = 1) {
  const auto ctx = sampler.scenario().detector_context();
  const std::size_t n = std::max(n_h0, n_h1);
  const std::size_t d = detectors.size();
  std::vector<double> h0(n_h0 * d), h1(n_h1 * d);
  std::vector<unsigned char> bad0(n_h0 * d), bad1(n_h1 * d);
  parallel_for(n, workers, [&](std::size_t t) {
    const Trial trial = sampler.sample(t);
    for (std::size_t k = 0; k < d; ++k) {
      const auto kind = detectors[k];
      const auto eval = [&](const IpdVector& obs, double& out, unsigned char& bad) {
        try {
          out = score(kind, trial.record, obs, ctx).value;
        } catch (const DegenerateInput&) {
          out = -std::numeric_limits<double>::infinity();
          bad = 1;
        }
      };
      if (t < n_h1) eval(is_passive(kind) ? trial.passive_h1 : trial.active_h1, h1[t * d + k], bad1[t * d + k]);
      if (t < n_h0) eval(trial.h0, h0[t * d + k], bad0[t * d + k]);
    }
  });
  std::vector<DetectorScores> out(d);
  for (std::size_t k = 0; k < d; ++k) {
    out[k].detector = detectors[k];
    out[k].h0.resize(n_h0);
    out[k].h1.resize(n_h1);
    for (std::size_t t = 0; t < n_h0; ++t) {
      out[k].h0[t] = h0[t * d + k];
      out[k].degenerate += bad0[t * d + k];
    }
    for (std::size_t t = 0; t < n_h1; ++t) {
      out[k].h1[t] = h1[t * d + k];
      out[k].degenerate += bad1[t * d + k];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Score moments

struct ScoreMoments {
  double mu0 = 0.0, sigma0 = 0.0;
  double mu1 = 0.0, sigma1 = 0.0;
  std::size_t degenerate = 0;
};

namespace detail {

inline std::pair<double, double> mean_std(std::span<const double> v) {
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, v.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0};
}

inline void check_degenerate(const DetectorScores& s) {
  const std::size_t total = s.h0.size() + s.h1.size();
  if (s.degenerate * 100 > total)
    throw DegenerateInput(std::string(detector_name(s.detector)) + ": " + std::to_string(s.degenerate) + " of " +
                          std::to_string(total) + " trials degenerate (limit 1%)");
}

}  // namespace detail

/// Monte Carlo means and (n-1) standard deviations of a detector statistic
/// under H0 and H1.
inline ScoreMoments score_moments(DetectorKind detector, const Scenario& scenario, std::size_t n_trials,
                                  std::uint64_t seed, unsigned workers = 1) {
  if (n_trials < 30) throw InvalidArgument("score_moments needs at least 30 trials");
  const TrialSampler sampler(scenario, seed);
  const DetectorKind kinds[] = {detector};
  const auto s = run_trials(sampler, kinds, n_trials, n_trials, workers).front();
  detail::check_degenerate(s);
  ScoreMoments m;
  std::tie(m.mu0, m.sigma0) = detail::mean_std(s.h0);
  std::tie(m.mu1, m.sigma1) = detail::mean_std(s.h1);
  m.degenerate = s.degenerate;
  return m;
}

// ---------------------------------------------------------------------------
// Bootstrap

/// AUC of many resamples of a fixed (h0, h1) pair in O(n0 + n1) each.
class ResampledAuc {
 public:
  ResampledAuc(std::span<const double> h0, std::span<const double> h1) : n0_(h0.size()), n1_(h1.size()) {
    detail::check_scores(h0, "H0");
    detail::check_scores(h1, "H1");
    std::vector<std::size_t> order(n0_);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return h0[a] < h0[b]; });
    rank_of_h0_.resize(n0_);
    std::vector<double> sorted(n0_);
    for (std::size_t r = 0; r < n0_; ++r) {
      rank_of_h0_[order[r]] = r;
      sorted[r] = h0[order[r]];
    }
    lo_.resize(n1_);
    hi_.resize(n1_);
    for (std::size_t j = 0; j < n1_; ++j) {
      lo_[j] = static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), h1[j]) - sorted.begin());
      hi_[j] = static_cast<std::size_t>(std::upper_bound(sorted.begin(), sorted.end(), h1[j]) - sorted.begin());
    }
  }

  /// AUC of the resample that takes h0[i0[k]] and h1[i1[k]].
  double operator()(std::span<const std::size_t> i0, std::span<const std::size_t> i1) const {
    std::vector<std::uint64_t> prefix(n0_ + 1, 0);
    for (auto i : i0) ++prefix[rank_of_h0_[i] + 1];
    for (std::size_t r = 0; r < n0_; ++r) prefix[r + 1] += prefix[r];
    std::uint64_t twice = 0;
    for (auto j : i1) twice += 2 * prefix[lo_[j]] + (prefix[hi_[j]] - prefix[lo_[j]]);
    return static_cast<double>(twice) / (2.0 * static_cast<double>(i0.size()) * static_cast<double>(i1.size()));
  }

 private:
  std::size_t n0_, n1_;
  std::vector<std::size_t> rank_of_h0_;
  std::vector<std::size_t> lo_, hi_;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Percentile interval: the floor(alpha/2 * B)-th and ceil((1 - alpha/2) * B)-th order statistics.
inline Interval percentile_interval(std::vector<double> v, double confidence = 0.95) {
  if (v.empty()) throw InvalidArgument("percentile_interval: empty sample");
  std::sort(v.begin(), v.end());
  const double tail = (1.0 - confidence) / 2.0;
  const double b = static_cast<double>(v.size());
  auto lo = static_cast<std::size_t>(std::floor(tail * b));
  auto hi = static_cast<std::size_t>(std::ceil((1.0 - tail) * b));
  hi = hi == 0 ? 0 : hi - 1;
  return {v[std::min(lo, v.size() - 1)], v[std::min(hi, v.size() - 1)]};
}

// ---------------------------------------------------------------------------
// Detector comparison

struct DetectorReport {
  DetectorKind detector = DetectorKind::slcorr;
  double auc = 0.0;
  Interval auc_ci;
  double target_fpr = 0.0;
  double threshold = 0.0;
  double achieved_fpr = 0.0;
  double achieved_fnr = 0.0;
  std::size_t degenerate = 0;
  RocCurve roc;
};

struct PairwiseDifference {
  DetectorKind first = DetectorKind::slcorr;   ///< AUC(first) - AUC(second)
  DetectorKind second = DetectorKind::slcorr;
  double difference = 0.0;
  Interval ci;
};

struct ComparisonReport {
  Scenario scenario;
  std::size_t n_trials = 0;
  std::size_t bootstrap_resamples = 0;
  std::vector<DetectorReport> detectors;
  std::vector<PairwiseDifference> pairwise;

  const DetectorReport& at(DetectorKind k) const {
    for (const auto& r : detectors)
      if (r.detector == k) return r;
    throw InvalidArgument("detector not in report: " + std::string(detector_name(k)));
  }
  const PairwiseDifference& difference(DetectorKind first, DetectorKind second) const {
    for (const auto& p : pairwise)
      if (p.first == first && p.second == second) return p;
    throw InvalidArgument("pair not in report");
  }
};

struct CompareOptions {
  std::size_t n_trials = 2000;          ///< per hypothesis
  double target_fpr = 0.01;
  std::size_t bootstrap_resamples = 1000;
  std::uint64_t seed = 0;
  unsigned workers = 1;
};

/// Per-detector AUC with paired bootstrap 95% CIs, calibrated operating
/// point, and all pairwise AUC differences (listed order, i < j).
///
/// Bootstrap resample b draws trial indices with Rng(derive_seed(seed, b,
/// "bootstrap")); the same indices are used for every detector so that
/// differences are paired by trial.
inline ComparisonReport compare_detectors(const Scenario& scenario, std::span<const DetectorKind> detectors,
                                          const CompareOptions& opt) {
  if (detectors.empty()) throw InvalidArgument("compare_detectors: empty detector list");
  if (opt.bootstrap_resamples == 0) throw InvalidArgument("bootstrap_resamples must be > 0");
  const TrialSampler sampler(scenario, opt.seed);
  const auto scores = run_trials(sampler, detectors, opt.n_trials, opt.n_trials, opt.workers);

  ComparisonReport rep;
  rep.scenario = scenario;
  rep.n_trials = opt.n_trials;
  rep.bootstrap_resamples = opt.bootstrap_resamples;
  for (const auto& s : scores) {
    detail::check_degenerate(s);
    DetectorReport r;
    r.detector = s.detector;
    r.roc = roc(s.h0, s.h1);
    r.auc = r.roc.auc;
    r.target_fpr = opt.target_fpr;
    r.threshold = calibrate_threshold(s.h0, opt.target_fpr);
    const auto er = empirical_error_rates(s.h0, s.h1, r.threshold);
    r.achieved_fpr = er.p_fa;
    r.achieved_fnr = er.p_md;
    r.degenerate = s.degenerate;
    rep.detectors.push_back(std::move(r));
  }

  std::vector<ResampledAuc> resamplers;
  for (const auto& s : scores) resamplers.emplace_back(s.h0, s.h1);
  const std::size_t d = detectors.size(), B = opt.bootstrap_resamples, n = opt.n_trials;
  std::vector<double> boot(B * d);
  parallel_for(B, opt.workers, [&](std::size_t b) {
    Rng rng(derive_seed(opt.seed, b, "bootstrap"));
    std::vector<std::size_t> i0(n), i1(n);
    for (auto& i : i0) i = rng.below(n);
    for (auto& i : i1) i = rng.below(n);
    for (std::size_t k = 0; k < d; ++k) boot[b * d + k] = resamplers[k](i0, i1);
  });
  for (std::size_t k = 0; k < d; ++k) {
    std::vector<double> v(B);
    for (std::size_t b = 0; b < B; ++b) v[b] = boot[b * d + k];
    rep.detectors[k].auc_ci = percentile_interval(std::move(v));
  }
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i + 1; j < d; ++j) {
      std::vector<double> v(B);
      for (std::size_t b = 0; b < B; ++b) v[b] = boot[b * d + i] - boot[b * d + j];
      rep.pairwise.push_back(
          {detectors[i], detectors[j], rep.detectors[i].auc - rep.detectors[j].auc, percentile_interval(std::move(v))});
    }
  }
  return rep;
}

}  // namespace rainbow
