#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rainbow/error.hpp"

namespace rainbow {

/// Inter-packet delays in seconds. Values derived from a Flow are
/// non-negative; after channel or watermark arithmetic they may be any real.
class IpdVector {
 public:
  IpdVector() = default;
  explicit IpdVector(std::vector<double> values) : values_(std::move(values)) {}
  IpdVector(std::initializer_list<double> values) : values_(values) {}

  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }
  double operator[](std::size_t i) const { return values_[i]; }
  auto begin() const noexcept { return values_.begin(); }
  auto end() const noexcept { return values_.end(); }

  std::span<const double> span() const noexcept { return values_; }
  const std::vector<double>& values() const noexcept { return values_; }

  /// Prefix of length `n` (clamped to size()).
  IpdVector prefix(std::size_t n) const {
    n = std::min(n, values_.size());
    return IpdVector(std::vector<double>(values_.begin(), values_.begin() + static_cast<std::ptrdiff_t>(n)));
  }

  friend bool operator==(const IpdVector&, const IpdVector&) = default;

 private:
  std::vector<double> values_;
};

/// Arrival timestamps (seconds) of one direction of one connection.
///
/// Invariants: at least two packets, timestamps non-decreasing.
class Flow {
 public:
  Flow(std::string id, std::vector<double> timestamps) : id_(std::move(id)), packets_(std::move(timestamps)) {
    if (packets_.size() < 2) {
      throw InvalidArgument("flow '" + id_ + "' has " + std::to_string(packets_.size()) +
                            " packet(s); at least 2 are required");
    }
    for (std::size_t i = 1; i < packets_.size(); ++i) {
      if (packets_[i] < packets_[i - 1]) {
        throw InvalidArgument("flow '" + id_ + "': timestamp " + std::to_string(i) + " decreases");
      }
    }
  }

  const std::string& id() const noexcept { return id_; }
  const std::vector<double>& packets() const noexcept { return packets_; }
  std::size_t size() const noexcept { return packets_.size(); }
  double start() const noexcept { return packets_.front(); }

  friend bool operator==(const Flow&, const Flow&) = default;

 private:
  std::string id_;
  std::vector<double> packets_;
};

/// Element i is t[i+1] - t[i].
inline IpdVector ipd(const Flow& flow) {
  const auto& t = flow.packets();
  std::vector<double> out(t.size() - 1);
  for (std::size_t i = 0; i + 1 < t.size(); ++i) out[i] = t[i + 1] - t[i];
  return IpdVector(std::move(out));
}

/// Inverse of ipd() given the first timestamp.
///
/// Each timestamp is rebuilt as t[i] + ipd[i]. Floating-point addition does
/// not undo subtraction in general, so the exact round trip ipd(reconstruct)
/// == ipds is achieved by nudging each timestamp to the nearest double whose
/// difference from its predecessor reproduces the requested IPD bit for bit.
inline Flow reconstruct(double start, const IpdVector& ipds, std::string id = "reconstructed") {
  if (ipds.empty()) throw InvalidArgument("cannot reconstruct a flow from an empty IPD vector");
  std::vector<double> t;
  t.reserve(ipds.size() + 1);
  t.push_back(start);
  for (std::size_t i = 0; i < ipds.size(); ++i) {
    const double d = ipds[i];
    if (!(d >= 0.0)) throw InvalidArgument("negative or NaN IPD at index " + std::to_string(i));
    const double prev = t.back();
    double next = prev + d;
    // prev + d is off by at most a few ulps.
    for (int step = 0; step < 4 && next - prev != d; ++step) {
      next = (next - prev < d) ? std::nextafter(next, INFINITY) : std::nextafter(next, -INFINITY);
    }
    t.push_back(next);
  }
  return Flow(std::move(id), std::move(t));
}

/// Truncate both vectors to their common prefix length.
inline std::pair<IpdVector, IpdVector> truncate_pair(const IpdVector& a, const IpdVector& b) {
  if (a.empty() || b.empty()) throw InvalidArgument("truncate_pair requires non-empty vectors");
  const std::size_t n = std::min(a.size(), b.size());
  return {a.prefix(n), b.prefix(n)};
}

}  // namespace rainbow
