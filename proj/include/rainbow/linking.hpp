#pragma once

#include <chrono>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "rainbow/detect.hpp"
#include "rainbow/flow.hpp"
#include "rainbow/parallel.hpp"
#include "rainbow/watermark.hpp"

namespace rainbow {

struct LinkTelemetry {
  std::size_t pair_count = 0;
  std::size_t degenerate_cells = 0;
  double wall_seconds = 0.0;
};

/// Scores of every (incoming record, outgoing flow) pair.
struct LinkMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  double threshold = 0.0;
  std::vector<double> scores;            ///< row-major rows x cols
  std::vector<unsigned char> decisions;  ///< scores >= threshold
  std::vector<std::optional<std::size_t>> assignments;
  LinkTelemetry telemetry;

  double score(std::size_t i, std::size_t j) const { return scores[i * cols + j]; }
  bool linked(std::size_t i, std::size_t j) const { return decisions[i * cols + j] != 0; }
};

/// Score all pairs with `detector` and assign each incoming record to its
/// best outgoing flow when that flow clears the threshold (ties: lowest
/// column). Degenerate cells score -inf.
inline LinkMatrix link_all(std::span<const WatermarkRecord> records, std::span<const IpdVector> observed,
                           DetectorKind detector, double threshold, const DetectorContext& ctx = {},
                           unsigned workers = 1) {
  const auto started = std::chrono::steady_clock::now();
  LinkMatrix m;
  m.rows = records.size();
  m.cols = observed.size();
  m.threshold = threshold;
  m.scores.assign(m.rows * m.cols, 0.0);
  m.decisions.assign(m.rows * m.cols, 0);
  std::vector<unsigned char> degenerate(m.rows * m.cols, 0);

  parallel_for(m.rows * m.cols, workers, [&](std::size_t cell) {
    const std::size_t i = cell / m.cols, j = cell % m.cols;
    try {
      m.scores[cell] = score(detector, records[i], observed[j], ctx).value;
    } catch (const DegenerateInput&) {
      m.scores[cell] = -std::numeric_limits<double>::infinity();
      degenerate[cell] = 1;
    }
    m.decisions[cell] = m.scores[cell] >= threshold;
  });

  m.assignments.assign(m.rows, std::nullopt);
  for (std::size_t i = 0; i < m.rows; ++i) {
    std::optional<std::size_t> best;
    for (std::size_t j = 0; j < m.cols; ++j) {
      if (!m.linked(i, j)) continue;
      if (!best || m.score(i, j) > m.score(i, *best)) best = j;
    }
    m.assignments[i] = best;
  }
  m.telemetry.pair_count = m.rows * m.cols;
  for (auto d : degenerate) m.telemetry.degenerate_cells += d;
  m.telemetry.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return m;
}

inline LinkMatrix link_all(std::span<const WatermarkRecord> records, std::span<const Flow> flows, DetectorKind detector,
                           double threshold, const DetectorContext& ctx = {}, unsigned workers = 1) {
  std::vector<IpdVector> observed;
  observed.reserve(flows.size());
  for (const auto& f : flows) observed.push_back(ipd(f));
  return link_all(records, std::span<const IpdVector>(observed), detector, threshold, ctx, workers);
}

/// Passive linking straight from recorded incoming IPDs.
inline LinkMatrix link_all(std::span<const IpdVector> incoming, std::span<const IpdVector> observed,
                           DetectorKind detector, double threshold, const DetectorContext& ctx = {},
                           unsigned workers = 1) {
  if (!is_passive(detector)) throw InvalidArgument("IPD-only linking requires a passive detector");
  std::vector<WatermarkRecord> records;
  records.reserve(incoming.size());
  for (std::size_t i = 0; i < incoming.size(); ++i)
    records.push_back({"in" + std::to_string(i), incoming[i], {}, {}});
  return link_all(std::span<const WatermarkRecord>(records), observed, detector, threshold, ctx, workers);
}

}  // namespace rainbow
