#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rainbow/analysis.hpp"
#include "rainbow/detect.hpp"
#include "rainbow/error.hpp"
#include "rainbow/format.hpp"

namespace rainbow {

/// Experiment configuration: a flat `key = value` file.
///
/// Keys (defaults in brackets):
///   scenario             model_a | model_b | trace        [model_a]
///   trace_file           flow file for scenario = trace   []
///   lambda               Poisson rate, packets/s          [10]
///   n_packets            packets per synthetic flow       [500]
///   deviation_sigma      model-B per-IPD deviation, s     [0.005]
///   deviation_dist       laplace | gaussian               [laplace]
///   amplitude            watermark chip amplitude a, s    [0.005]
///   base_offset          embedder queue offset, s         [10 * amplitude]
///   jitter_dist          laplace | gaussian | uniform     [laplace]
///   jitter_scale         jitter scale, s                  [0.002]
///   detectors            comma-separated detector names   [PassiveCorr,PassiveLRT-A,SLCorr,NonblindLRT-A]
///   n_trials             trials per hypothesis            [2000]
///   target_fpr           calibration false-positive rate  [0.01]
///   bootstrap_resamples  AUC bootstrap resamples          [1000]
///   workers              worker threads, 0 = all cores    [1]
///   master_seed          64-bit seed                      (required)
///   out_dir              output directory                 [out]
///
/// Unknown or repeated keys are errors. `#` starts a comment line.
struct ExperimentConfig {
  TrafficModel scenario = TrafficModel::model_a;
  std::string trace_file;
  double lambda = 10.0;
  std::size_t n_packets = 500;
  double deviation_sigma = 0.005;
  NoiseDist deviation_dist = NoiseDist::laplace;
  double amplitude = 0.005;
  std::optional<double> base_offset;
  NoiseDist jitter_dist = NoiseDist::laplace;
  double jitter_scale = 0.002;
  std::vector<DetectorKind> detectors{std::begin(kAllDetectors), std::end(kAllDetectors)};
  std::size_t n_trials = 2000;
  double target_fpr = 0.01;
  std::size_t bootstrap_resamples = 1000;
  unsigned workers = 1;
  std::optional<std::uint64_t> master_seed;
  std::string out_dir = "out";

  /// Checks cross-field constraints. Throws ConfigError or CalibrationError.
  void validate() const {
    if (!master_seed) throw ConfigError("master_seed is required");
    if (detectors.empty()) throw ConfigError("detector list is empty");
    if (n_trials < 2) throw ConfigError("n_trials must be >= 2");
    if (!(target_fpr > 0.0 && target_fpr < 1.0)) throw ConfigError("target_fpr must be in (0, 1)");
    if (bootstrap_resamples == 0) throw ConfigError("bootstrap_resamples must be > 0");
    if (scenario == TrafficModel::trace && trace_file.empty()) throw ConfigError("scenario trace needs trace_file");
    const auto needed = static_cast<std::size_t>(std::ceil(1.0 / target_fpr - 1e-9));
    if (n_trials < needed)
      throw CalibrationError("target_fpr " + format_double(target_fpr) + " needs at least " + std::to_string(needed) +
                             " H0 trials, n_trials is " + std::to_string(n_trials));
    try {
      Scenario s = synthetic_scenario();
      if (scenario == TrafficModel::trace) s.traffic = TrafficModel::model_a;  // pool checked on load
      s.validate();
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    }
  }

  /// Scenario without trace flows loaded.
  Scenario synthetic_scenario() const {
    Scenario s;
    s.traffic = scenario;
    s.lambda = lambda;
    s.n_packets = n_packets;
    s.deviation_sigma = deviation_sigma;
    s.deviation_dist = deviation_dist;
    s.amplitude = amplitude;
    s.base_offset = base_offset;
    s.jitter_dist = jitter_dist;
    s.jitter_scale = jitter_scale;
    return s;
  }

  CompareOptions compare_options() const {
    return {n_trials, target_fpr, bootstrap_resamples, master_seed.value_or(0), workers};
  }

  /// Canonical text form; parse_config(to_text()) reproduces *this.
  std::string to_text() const {
    std::ostringstream o;
    o << "scenario = " << to_string(scenario) << '\n';
    if (!trace_file.empty()) o << "trace_file = " << trace_file << '\n';
    o << "lambda = " << format_double(lambda) << '\n';
    o << "n_packets = " << n_packets << '\n';
    o << "deviation_sigma = " << format_double(deviation_sigma) << '\n';
    o << "deviation_dist = " << to_string(deviation_dist) << '\n';
    o << "amplitude = " << format_double(amplitude) << '\n';
    if (base_offset) o << "base_offset = " << format_double(*base_offset) << '\n';
    o << "jitter_dist = " << to_string(jitter_dist) << '\n';
    o << "jitter_scale = " << format_double(jitter_scale) << '\n';
    o << "detectors = ";
    for (std::size_t i = 0; i < detectors.size(); ++i) o << (i ? "," : "") << detector_name(detectors[i]);
    o << '\n';
    o << "n_trials = " << n_trials << '\n';
    o << "target_fpr = " << format_double(target_fpr) << '\n';
    o << "bootstrap_resamples = " << bootstrap_resamples << '\n';
    o << "workers = " << workers << '\n';
    if (master_seed) o << "master_seed = " << *master_seed << '\n';
    o << "out_dir = " << out_dir << '\n';
    return o.str();
  }
};

namespace detail {

inline double config_double(const std::string& key, std::string_view v, std::size_t line) {
  double d = 0.0;
  if (!parse_double(v, d) || !std::isfinite(d)) throw ParseError(key + ": expected a real number", line);
  return d;
}

inline std::uint64_t config_uint(const std::string& key, std::string_view v, std::size_t line) {
  std::uint64_t u = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), u);
  if (v.empty() || r.ec != std::errc{} || r.ptr != v.data() + v.size())
    throw ParseError(key + ": expected a non-negative integer", line);
  return u;
}

}  // namespace detail

/// Apply one `key = value` setting. Throws ConfigError for unknown keys.
inline void set_config_value(ExperimentConfig& c, const std::string& key, std::string_view v, std::size_t line = 0) {
  using detail::config_double;
  using detail::config_uint;
  try {
    if (key == "scenario") c.scenario = parse_traffic_model(v);
    else if (key == "trace_file") c.trace_file = std::string(v);
    else if (key == "lambda") c.lambda = config_double(key, v, line);
    else if (key == "n_packets") c.n_packets = config_uint(key, v, line);
    else if (key == "deviation_sigma") c.deviation_sigma = config_double(key, v, line);
    else if (key == "deviation_dist") c.deviation_dist = parse_noise_dist(v);
    else if (key == "amplitude") c.amplitude = config_double(key, v, line);
    else if (key == "base_offset") c.base_offset = config_double(key, v, line);
    else if (key == "jitter_dist") c.jitter_dist = parse_noise_dist(v);
    else if (key == "jitter_scale") c.jitter_scale = config_double(key, v, line);
    else if (key == "detectors") {
      c.detectors.clear();
      std::string_view rest = v;
      while (!rest.empty()) {
        const auto comma = rest.find(',');
        const auto name = trim(rest.substr(0, comma));
        if (!name.empty()) c.detectors.push_back(parse_detector(name));
        if (comma == std::string_view::npos) break;
        rest.remove_prefix(comma + 1);
      }
    } else if (key == "n_trials") c.n_trials = config_uint(key, v, line);
    else if (key == "target_fpr") c.target_fpr = config_double(key, v, line);
    else if (key == "bootstrap_resamples") c.bootstrap_resamples = config_uint(key, v, line);
    else if (key == "workers") c.workers = static_cast<unsigned>(config_uint(key, v, line));
    else if (key == "master_seed") c.master_seed = config_uint(key, v, line);
    else if (key == "out_dir") c.out_dir = std::string(v);
    else throw ConfigError((line ? "line " + std::to_string(line) + ": " : std::string()) + "unknown key '" + key + "'");
  } catch (const InvalidArgument& e) {
    throw ConfigError((line ? "line " + std::to_string(line) + ": " : std::string()) + e.what());
  } catch (const ParseError& e) {
    throw ConfigError(e.what());
  }
}

inline ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig c;
  std::map<std::string, std::size_t> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto s = trim(line);
    if (s.empty() || s.front() == '#') continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key(trim(s.substr(0, eq)));
    if (auto [it, fresh] = seen.emplace(key, lineno); !fresh)
      throw ConfigError("line " + std::to_string(lineno) + ": key '" + key + "' repeated (first on line " +
                        std::to_string(it->second) + ")");
    set_config_value(c, key, trim(s.substr(eq + 1)), lineno);
  }
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  return parse_config(in);
}

}  // namespace rainbow
