#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "rainbow/error.hpp"
#include "rainbow/flow.hpp"
#include "rainbow/format.hpp"
#include "rainbow/random.hpp"

namespace rainbow {

/// Traffic model A: independent Poisson flows.
struct ModelAParams {
  double rate_lambda = 10.0;  ///< packets per second
  std::size_t n_packets = 500;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(rate_lambda > 0.0) || !std::isfinite(rate_lambda)) throw InvalidArgument("model A: lambda must be > 0");
    if (n_packets < 2) throw InvalidArgument("model A: n_packets must be >= 2");
  }
};

/// Traffic model B: every flow follows a shared base timing pattern with a
/// small per-IPD deviation.
struct ModelBParams {
  Flow base;
  double deviation_sigma = 0.005;
  NoiseDist deviation_dist = NoiseDist::laplace;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(deviation_sigma >= 0.0) || !std::isfinite(deviation_sigma))
      throw InvalidArgument("model B: deviation_sigma must be >= 0");
    if (deviation_dist == NoiseDist::uniform) throw InvalidArgument("model B: deviation_dist must be laplace or gaussian");
  }
};

/// Poisson flow starting at t = 0: i.i.d. Exponential(lambda) IPDs.
inline Flow gen_model_a(const ModelAParams& p, std::string id = "model_a") {
  p.validate();
  Rng rng(p.seed);
  std::vector<double> t(p.n_packets);
  t[0] = 0.0;
  for (std::size_t i = 1; i < t.size(); ++i) t[i] = t[i - 1] + rng.exponential(p.rate_lambda);
  return Flow(std::move(id), std::move(t));
}

/// IPD_i = max(0, base_ipd_i + delta_i), starting at the base flow's start.
inline Flow gen_model_b(const ModelBParams& p, std::string id = "model_b") {
  p.validate();
  const IpdVector base = ipd(p.base);
  if (p.deviation_sigma == 0.0) return reconstruct(p.base.start(), base, std::move(id));
  Rng rng(p.seed);
  std::vector<double> out(base.size());
  for (std::size_t i = 0; i < base.size(); ++i)
    out[i] = std::max(0.0, base[i] + sample_noise(rng, p.deviation_dist, p.deviation_sigma));
  return reconstruct(p.base.start(), IpdVector(std::move(out)), std::move(id));
}

/// Result of reading a flow text file.
struct FlowFile {
  std::vector<Flow> flows;
  /// Flow ids dropped because they had fewer than two packets.
  std::vector<std::string> skipped;
};

/// Parse the `flow_id,timestamp` text format. One flow per distinct id, in
/// order of first appearance. The id is everything before the last comma.
inline FlowFile parse_flows(std::istream& in) {
  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<double>> stamps;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto s = trim(line);
    if (s.empty() || s.front() == '#') continue;
    const auto comma = s.rfind(',');
    if (comma == std::string_view::npos) throw ParseError("expected 'flow_id,timestamp'", lineno);
    const std::string id(trim(s.substr(0, comma)));
    double ts = 0.0;
    if (id.empty()) throw ParseError("empty flow id", lineno);
    if (!parse_double(trim(s.substr(comma + 1)), ts) || !std::isfinite(ts))
      throw ParseError("bad timestamp '" + std::string(s.substr(comma + 1)) + "'", lineno);
    auto [it, inserted] = stamps.try_emplace(id);
    if (inserted) order.push_back(id);
    if (!it->second.empty() && ts < it->second.back())
      throw ParseError("timestamp decreases within flow '" + id + "'", lineno);
    it->second.push_back(ts);
  }
  FlowFile out;
  for (const auto& id : order) {
    auto& t = stamps[id];
    if (t.size() < 2) {
      out.skipped.push_back(id);
      continue;
    }
    out.flows.emplace_back(id, std::move(t));
  }
  return out;
}

inline FlowFile load_flows(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open flow file " + path.string());
  return parse_flows(in);
}

inline void write_flows(std::ostream& out, const std::vector<Flow>& flows) {
  for (const auto& f : flows)
    for (double t : f.packets()) out << f.id() << ',' << format_double(t) << '\n';
}

inline void save_flows(const std::filesystem::path& path, const std::vector<Flow>& flows) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write flow file " + path.string());
  write_flows(out, flows);
}

/// Convert a bare list of timestamps (one per line, `#` comments allowed)
/// into a single flow in the text format.
inline Flow parse_timestamp_list(std::istream& in, std::string id) {
  std::vector<double> t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto s = trim(line);
    if (s.empty() || s.front() == '#') continue;
    double v = 0.0;
    if (!parse_double(s, v) || !std::isfinite(v)) throw ParseError("bad timestamp '" + std::string(s) + "'", lineno);
    if (!t.empty() && v < t.back()) throw ParseError("timestamp decreases", lineno);
    t.push_back(v);
  }
  return Flow(std::move(id), std::move(t));
}

}  // namespace rainbow
