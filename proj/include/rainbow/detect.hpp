#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rainbow/channel.hpp"
#include "rainbow/error.hpp"
#include "rainbow/flow.hpp"
#include "rainbow/watermark.hpp"

namespace rainbow {

/// Detector output. Correlation-family values lie in [-1, 1]; LLR values are
/// unbounded and may be +/-inf.
struct DetectionScore {
  double value = 0.0;
  std::string detector_name;
  std::size_t n_used = 0;
};

struct Decision {
  bool linked = false;
  DetectionScore score;
  double threshold = 0.0;
};

/// Pearson correlation of two equal-length vectors.
///
/// Throws InvalidArgument on length mismatch or n < 2 and DegenerateInput
/// when either vector is constant.
inline double normalized_correlation(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InvalidArgument("correlation: length mismatch");
  if (x.size() < 2) throw InvalidArgument("correlation: need at least 2 samples");
  const auto constant = [](std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [&](double e) { return e == v.front(); });
  };
  if (constant(x) || constant(y)) throw DegenerateInput("correlation: zero-variance input");

  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw DegenerateInput("correlation: zero-variance input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

inline double normalized_correlation(const IpdVector& x, const IpdVector& y) {
  return normalized_correlation(x.span(), y.span());
}

/// Sum over i of h1(i) - h0(i), where both return log-densities.
template <class H1, class H0>
double log_likelihood_ratio(std::size_t n, H1&& h1_log_pdf, H0&& h0_log_pdf) {
  double llr = 0.0;
  for (std::size_t i = 0; i < n; ++i) llr += h1_log_pdf(i) - h0_log_pdf(i);
  return llr;
}

inline constexpr std::string_view kPassiveCorr = "PassiveCorr";
inline constexpr std::string_view kPassiveLrtA = "PassiveLRT-A";
inline constexpr std::string_view kSlCorr = "SLCorr";
inline constexpr std::string_view kNonblindLrtA = "NonblindLRT-A";

/// Passive correlation of incoming and outgoing IPDs (common prefix).
inline DetectionScore detect_passive(const IpdVector& in_ipds, const IpdVector& out_ipds) {
  const auto [in, out] = truncate_pair(in_ipds, out_ipds);
  return {normalized_correlation(in, out), std::string(kPassiveCorr), in.size()};
}

/// Passive LRT under model A.
///
/// H1: out = in + jitter. H0: out is an independent Poisson(lambda) flow.
/// value = sum_i [log f_jitter(out_i - in_i) - log f_Exp(lambda)(out_i)].
inline DetectionScore detect_passive_lrt_a(const IpdVector& in_ipds, const IpdVector& out_ipds, double lambda,
                                           const JitterModel& jitter) {
  if (!(lambda > 0.0)) throw InvalidArgument("lambda must be > 0");
  jitter.validate();
  const auto [in, out] = truncate_pair(in_ipds, out_ipds);
  DetectionScore s{0.0, std::string(kPassiveLrtA), in.size()};
  if (jitter.scale == 0.0) {
    if (in == out) {
      s.value = std::numeric_limits<double>::infinity();
      return s;
    }
    throw DegenerateInput("PassiveLRT-A: zero jitter scale");
  }
  const ExponentialDensity h0{lambda};
  s.value = log_likelihood_ratio(
      in.size(), [&](std::size_t i) { return jitter_log_pdf(jitter, out[i] - in[i]); },
      [&](std::size_t i) { return h0.log_pdf(out[i]); });
  return s;
}

namespace detail {

struct Aligned {
  std::vector<double> d;  // observed - recorded
  std::vector<double> w;
};

inline Aligned align_to_record(const WatermarkRecord& record, const IpdVector& observed) {
  if (record.watermark.empty()) throw InvalidArgument("record carries no watermark");
  const auto [rec, obs] = truncate_pair(record.recorded_ipds, observed);
  const std::size_t m = std::min(rec.size(), record.watermark.size());
  Aligned a;
  a.d.resize(m);
  a.w.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    a.d[i] = obs[i] - rec[i];
    a.w[i] = record.watermark[i];
  }
  return a;
}

}  // namespace detail

/// Subtract-then-linearly-correlate: Pearson correlation of
/// (observed - recorded) with the chip sequence over the watermark length.
inline DetectionScore detect_slcorr(const WatermarkRecord& record, const IpdVector& observed) {
  const auto a = detail::align_to_record(record, observed);
  if (a.d.size() < 2) throw InvalidArgument("SLCorr: effective length < 2");
  return {normalized_correlation(a.d, a.w), std::string(kSlCorr), a.d.size()};
}

/// Non-blind LRT under model A.
///
/// H1: d = w + jitter. H0: d is the difference of two independent Poisson
/// IPDs, i.e. Laplace(0, 1/lambda).
/// value = sum_i [log f_jitter(d_i - w_i) - log f_H0(d_i)].
inline DetectionScore detect_nonblind_lrt_a(const WatermarkRecord& record, const IpdVector& observed, double lambda,
                                            const JitterModel& jitter) {
  const auto h0 = h0_difference_density(lambda);
  jitter.validate();
  const auto a = detail::align_to_record(record, observed);
  DetectionScore s{0.0, std::string(kNonblindLrtA), a.d.size()};
  if (jitter.scale == 0.0) {
    if (a.d == a.w) {
      s.value = std::numeric_limits<double>::infinity();
      return s;
    }
    throw DegenerateInput("NonblindLRT-A: zero jitter scale");
  }
  s.value = log_likelihood_ratio(
      a.d.size(), [&](std::size_t i) { return jitter_log_pdf(jitter, a.d[i] - a.w[i]); },
      [&](std::size_t i) { return h0.log_pdf(a.d[i]); });
  return s;
}

/// linked iff value >= threshold.
inline Decision decide(const DetectionScore& score, double threshold) {
  return {score.value >= threshold, score, threshold};
}

enum class DetectorKind { passive_corr, passive_lrt_a, slcorr, nonblind_lrt_a };

inline constexpr DetectorKind kAllDetectors[] = {DetectorKind::passive_corr, DetectorKind::passive_lrt_a,
                                                 DetectorKind::slcorr, DetectorKind::nonblind_lrt_a};

inline std::string_view detector_name(DetectorKind k) noexcept {
  switch (k) {
    case DetectorKind::passive_corr: return kPassiveCorr;
    case DetectorKind::passive_lrt_a: return kPassiveLrtA;
    case DetectorKind::slcorr: return kSlCorr;
    case DetectorKind::nonblind_lrt_a: return kNonblindLrtA;
  }
  return "?";
}

inline DetectorKind parse_detector(std::string_view name) {
  for (auto k : kAllDetectors)
    if (detector_name(k) == name) return k;
  throw InvalidArgument("unknown detector '" + std::string(name) + "'");
}

/// Passive detectors never use the watermark.
inline bool is_passive(DetectorKind k) noexcept {
  return k == DetectorKind::passive_corr || k == DetectorKind::passive_lrt_a;
}

/// Model assumptions the LRT detectors are built on.
struct DetectorContext {
  double lambda = 10.0;
  JitterModel jitter;
};

/// Score `observed` against `record` with any detector. Passive detectors
/// use record.recorded_ipds and ignore the watermark.
inline DetectionScore score(DetectorKind kind, const WatermarkRecord& record, const IpdVector& observed,
                            const DetectorContext& ctx = {}) {
  switch (kind) {
    case DetectorKind::passive_corr: return detect_passive(record.recorded_ipds, observed);
    case DetectorKind::passive_lrt_a:
      return detect_passive_lrt_a(record.recorded_ipds, observed, ctx.lambda, ctx.jitter);
    case DetectorKind::slcorr: return detect_slcorr(record, observed);
    case DetectorKind::nonblind_lrt_a: return detect_nonblind_lrt_a(record, observed, ctx.lambda, ctx.jitter);
  }
  throw InvalidArgument("bad detector kind");
}

}  // namespace rainbow
