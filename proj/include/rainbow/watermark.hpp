#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "rainbow/error.hpp"
#include "rainbow/flow.hpp"
#include "rainbow/format.hpp"
#include "rainbow/random.hpp"

namespace rainbow {

/// Keyed spread-spectrum watermark parameters.
struct WatermarkParams {
  std::uint64_t key = 0;
  std::size_t n = 500;
  double amplitude = 0.005;          ///< chip amplitude a, seconds
  double budget_warning = 0.010;     ///< amplitudes above this are flagged as visible

  void validate() const {
    if (n < 1) throw InvalidArgument("watermark length must be >= 1");
    if (!(amplitude > 0.0) || !std::isfinite(amplitude)) throw InvalidArgument("watermark amplitude must be > 0");
  }
  bool exceeds_budget() const noexcept { return amplitude > budget_warning; }
};

/// Antipodal chip sequence: every value is exactly +a or -a.
class WatermarkSequence {
 public:
  WatermarkSequence() = default;
  WatermarkSequence(double amplitude, std::vector<double> chips) : amplitude_(amplitude), chips_(std::move(chips)) {
    for (double c : chips_)
      if (c != amplitude_ && c != -amplitude_) throw InvalidArgument("watermark chip is not +/- amplitude");
  }

  double amplitude() const noexcept { return amplitude_; }
  std::size_t size() const noexcept { return chips_.size(); }
  bool empty() const noexcept { return chips_.empty(); }
  double operator[](std::size_t i) const { return chips_[i]; }
  const std::vector<double>& values() const noexcept { return chips_; }

  WatermarkSequence prefix(std::size_t n) const {
    n = std::min(n, chips_.size());
    return {amplitude_, std::vector<double>(chips_.begin(), chips_.begin() + static_cast<std::ptrdiff_t>(n))};
  }

  friend bool operator==(const WatermarkSequence&, const WatermarkSequence&) = default;

 private:
  double amplitude_ = 0.0;
  std::vector<double> chips_;
};

/// i.i.d. fair signs scaled by the amplitude, drawn from the key.
inline WatermarkSequence gen_watermark(const WatermarkParams& p) {
  p.validate();
  Rng rng(p.key);
  std::vector<double> chips(p.n);
  for (auto& c : chips) c = rng.bit() ? p.amplitude : -p.amplitude;
  return {p.amplitude, std::move(chips)};
}

struct EmbedStats {
  double base_offset = 0.0;
  std::size_t clip_count = 0;

  friend bool operator==(const EmbedStats&, const EmbedStats&) = default;
};

/// Detector-side state of the non-blind scheme: the incoming timings as
/// they were before the watermark was applied, plus the watermark itself.
/// A record with an empty watermark is a plain passive record.
struct WatermarkRecord {
  std::string flow_id;
  IpdVector recorded_ipds;
  WatermarkSequence watermark;
  EmbedStats embed_stats;

  friend bool operator==(const WatermarkRecord&, const WatermarkRecord&) = default;
};

/// Record without a watermark, for passive detectors.
inline WatermarkRecord passive_record(const Flow& incoming) {
  return {incoming.id(), ipd(incoming), {}, {}};
}

struct EmbedResult {
  Flow outgoing;
  WatermarkRecord record;
};

/// Delay packets of `incoming` so that outgoing IPD_i = IPD_i + w_i.
///
/// Every packet carries a queueing delay. Packet 0 waits `base_offset`; each
/// chip then moves the delay of the following packet by +/-a. A packet whose
/// delay would become negative is released on arrival instead (clip_count is
/// incremented) and the walk continues from zero. Packets leave in order: a
/// target IPD below zero (IPD_i < a with a -a chip) is realized as 0 and also
/// counted as a clip. IPDs beyond the watermark length pass through unchanged.
inline EmbedResult embed(const Flow& incoming, const WatermarkSequence& watermark, double base_offset) {
  if (!(base_offset >= 0.0) || !std::isfinite(base_offset)) throw InvalidArgument("base_offset must be >= 0");
  const IpdVector recorded = ipd(incoming);
  const auto w = watermark.prefix(recorded.size());
  const double a = watermark.amplitude();

  const auto& arrival = incoming.packets();
  std::vector<double> release(arrival.size());
  // delay = anchor + a * (steps - anchor_steps); exact integer walk avoids
  // accumulated rounding in long +/-a sums.
  double anchor = base_offset;
  long anchor_steps = 0;
  long steps = 0;
  std::size_t clips = 0;
  release[0] = arrival[0] + base_offset;
  double delay = base_offset;
  for (std::size_t i = 0; i + 1 < arrival.size(); ++i) {
    if (i < w.size()) {
      steps += w[i] > 0 ? 1 : -1;
      delay = anchor + a * static_cast<double>(steps - anchor_steps);
      if (delay < 0.0) {
        ++clips;
        anchor = 0.0;
        anchor_steps = steps;
        delay = 0.0;
      }
    }
    release[i + 1] = arrival[i + 1] + delay;
    if (release[i + 1] < release[i]) {
      // FIFO: a negative target IPD would reorder packets.
      ++clips;
      release[i + 1] = release[i];
      delay = release[i] - arrival[i + 1];
      anchor = delay;
      anchor_steps = steps;
    }
  }
  Flow outgoing(incoming.id(), std::move(release));
  return {std::move(outgoing), WatermarkRecord{incoming.id(), recorded, w, EmbedStats{base_offset, clips}}};
}

/// Embed the keyed watermark generated from `params`.
inline EmbedResult embed(const Flow& incoming, const WatermarkParams& params, double base_offset) {
  return embed(incoming, gen_watermark(params), base_offset);
}

/// Default queue offset: ten chip amplitudes.
inline double default_base_offset(const WatermarkParams& p) { return 10.0 * p.amplitude; }

/// Largest per-packet delay (release - arrival) of `outgoing` relative to `incoming`.
inline double max_delay_introduced(const Flow& incoming, const Flow& outgoing) {
  if (incoming.size() != outgoing.size()) throw InvalidArgument("packet count mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < incoming.size(); ++i) worst = std::max(worst, outgoing.packets()[i] - incoming.packets()[i]);
  return worst;
}

// Record text format, one block per record:
//
//   record,<flow_id>
//   <recorded_ipd>,<chip>     one line per IPD; chip empty past the watermark
//   stats,<base_offset>,<clip_count>

inline void write_record(std::ostream& out, const WatermarkRecord& r) {
  out << "record," << r.flow_id << '\n';
  for (std::size_t i = 0; i < r.recorded_ipds.size(); ++i) {
    out << format_double(r.recorded_ipds[i]) << ',';
    if (i < r.watermark.size()) out << format_double(r.watermark[i]);
    out << '\n';
  }
  out << "stats," << format_double(r.embed_stats.base_offset) << ',' << r.embed_stats.clip_count << '\n';
}

inline std::vector<WatermarkRecord> parse_records(std::istream& in) {
  std::vector<WatermarkRecord> out;
  std::optional<std::string> id;
  std::vector<double> ipds, chips;
  bool chips_ended = false;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto s = trim(line);
    if (s.empty() || s.front() == '#') continue;
    if (s.starts_with("record,")) {
      if (id) throw ParseError("record '" + *id + "' has no stats trailer", lineno);
      id = std::string(s.substr(7));
      ipds.clear();
      chips.clear();
      chips_ended = false;
      continue;
    }
    if (!id) throw ParseError("data outside of a record block", lineno);
    if (s.starts_with("stats,")) {
      const auto rest = s.substr(6);
      const auto comma = rest.find(',');
      double offset = 0.0, clips = 0.0;
      if (comma == std::string_view::npos || !parse_double(rest.substr(0, comma), offset) ||
          !parse_double(rest.substr(comma + 1), clips) || clips < 0 || clips != std::floor(clips))
        throw ParseError("malformed stats trailer", lineno);
      double amplitude = chips.empty() ? 0.0 : std::abs(chips.front());
      WatermarkSequence w;
      try {
        w = WatermarkSequence(amplitude, chips);
      } catch (const InvalidArgument& e) {
        throw ParseError(std::string("record '") + *id + "': " + e.what(), lineno);
      }
      out.push_back({*id, IpdVector(ipds), std::move(w), {offset, static_cast<std::size_t>(clips)}});
      id.reset();
      continue;
    }
    const auto comma = s.find(',');
    double v = 0.0;
    if (comma == std::string_view::npos || !parse_double(s.substr(0, comma), v))
      throw ParseError("expected 'recorded_ipd,chip'", lineno);
    ipds.push_back(v);
    const auto chip_text = s.substr(comma + 1);
    if (chip_text.empty()) {
      chips_ended = true;
    } else {
      double c = 0.0;
      if (chips_ended || !parse_double(chip_text, c)) throw ParseError("bad chip value", lineno);
      chips.push_back(c);
    }
  }
  if (id) throw ParseError("record '" + *id + "' has no stats trailer", lineno);
  return out;
}

inline void save_records(const std::filesystem::path& path, const std::vector<WatermarkRecord>& records) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write record file " + path.string());
  for (const auto& r : records) write_record(out, r);
}

inline std::vector<WatermarkRecord> load_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open record file " + path.string());
  return parse_records(in);
}

}  // namespace rainbow
