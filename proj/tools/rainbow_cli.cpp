// rainbow: command-line front end for the watermarking library.
//
// Exit codes: 0 success, 2 configuration/usage error, 3 input file error,
// 4 other runtime error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rainbow/rainbow.hpp"

namespace {

using namespace rainbow;

constexpr int kExitConfig = 2;
constexpr int kExitInput = 3;
constexpr int kExitRuntime = 4;

std::ofstream open_or_throw(const std::string& path) {
  std::ofstream o(path, std::ios::binary);
  if (!o) throw Error("cannot write " + path);
  return o;
}

std::vector<double> read_scores(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::vector<double> v;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto s = trim(line);
    if (s.empty() || s.front() == '#') continue;
    double d = 0.0;
    if (!parse_double(s, d) || std::isnan(d)) throw ParseError("bad score '" + std::string(s) + "'", lineno);
    v.push_back(d);
  }
  return v;
}

struct JitterOptions {
  std::string dist = "laplace";
  double scale = 0.002;
  double lambda = 10.0;

  void add(CLI::App* cmd) {
    cmd->add_option("--lambda", lambda, "Poisson rate assumed by the LRT detectors")->capture_default_str();
    cmd->add_option("--jitter-dist", dist, "laplace | gaussian | uniform")->capture_default_str();
    cmd->add_option("--jitter-scale", scale, "jitter scale in seconds")->capture_default_str();
  }
  DetectorContext context() const { return {lambda, JitterModel{parse_noise_dist(dist), scale, 0}}; }
};

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::optional<std::string> out_dir;
  std::optional<unsigned> workers;

  void add(CLI::App* cmd) {
    cmd->add_option("--seed", seed, "override master_seed");
    cmd->add_option("--trials", trials, "override n_trials");
    cmd->add_option("--out-dir", out_dir, "override out_dir");
    cmd->add_option("--workers", workers, "override workers (0 = all cores)");
  }
  void apply(ExperimentConfig& c) const {
    if (seed) c.master_seed = *seed;
    if (trials) c.n_trials = *trials;
    if (out_dir) c.out_dir = *out_dir;
    if (workers) c.workers = *workers;
  }
};

void print_claims(const ClaimsReport& rep) {
  for (const auto& r : rep.rows)
    std::cout << to_string(r.status) << "  " << r.claim << "  " << r.metric << " = " << format_double(r.value) << " ["
              << format_double(r.ci.lo) << ", " << format_double(r.ci.hi) << "]  " << r.criterion << "  (" << r.scenario
              << ")" << (r.note.empty() ? "" : "  " + r.note) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Non-blind flow watermarking and passive/active flow-linking detectors"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "generate synthetic flows (model A or model B)");
  std::string gen_model = "a", gen_out, gen_dev_dist = "laplace";
  double gen_lambda = 10.0, gen_sigma = 0.005;
  std::size_t gen_packets = 500, gen_count = 1;
  std::uint64_t gen_seed = 0;
  gen->add_option("--model", gen_model, "a | b")->capture_default_str();
  gen->add_option("--lambda", gen_lambda, "packets per second")->capture_default_str();
  gen->add_option("--packets", gen_packets, "packets per flow")->capture_default_str();
  gen->add_option("--flows", gen_count, "number of flows")->capture_default_str();
  gen->add_option("--sigma", gen_sigma, "model-B deviation scale, seconds")->capture_default_str();
  gen->add_option("--deviation-dist", gen_dev_dist, "laplace | gaussian")->capture_default_str();
  gen->add_option("--seed", gen_seed, "master seed")->required();
  gen->add_option("-o,--output", gen_out, "output flow file")->required();

  // embed
  auto* emb = app.add_subcommand("embed", "watermark every flow of a flow file");
  std::string emb_in, emb_out, emb_records;
  double emb_amplitude = 0.005;
  std::optional<double> emb_offset;
  std::uint64_t emb_key = 0;
  emb->add_option("--flows", emb_in, "incoming flow file")->required();
  emb->add_option("--key", emb_key, "master watermark key; flow i uses a key derived from (key, i)")->required();
  emb->add_option("--amplitude", emb_amplitude, "chip amplitude a, seconds")->capture_default_str();
  emb->add_option("--base-offset", emb_offset, "queue offset, seconds (default 10a)");
  emb->add_option("-o,--output", emb_out, "outgoing flow file")->required();
  emb->add_option("--records", emb_records, "watermark record file")->required();

  // detect
  auto* det = app.add_subcommand("detect", "score observed flows against records with matching flow ids");
  std::string det_records, det_observed, det_detector = "SLCorr";
  std::optional<double> det_threshold;
  JitterOptions det_jitter;
  det->add_option("--records", det_records, "record file")->required();
  det->add_option("--observed", det_observed, "observed flow file")->required();
  det->add_option("--detector", det_detector, "PassiveCorr | PassiveLRT-A | SLCorr | NonblindLRT-A")->capture_default_str();
  det->add_option("--threshold", det_threshold, "decision threshold (score >= threshold links)");
  det_jitter.add(det);

  // link
  auto* lnk = app.add_subcommand("link", "score every record against every observed flow");
  std::string lnk_records, lnk_flows, lnk_detector = "SLCorr", lnk_out, lnk_cal;
  std::optional<double> lnk_threshold, lnk_fpr;
  JitterOptions lnk_jitter;
  lnk->add_option("--records", lnk_records, "record file")->required();
  lnk->add_option("--flows", lnk_flows, "observed flow file")->required();
  lnk->add_option("--detector", lnk_detector, "detector name")->capture_default_str();
  auto* thr_opt = lnk->add_option("--threshold", lnk_threshold, "decision threshold");
  auto* fpr_opt = lnk->add_option("--fpr", lnk_fpr, "calibrate the threshold to this false-positive rate");
  lnk->add_option("--calibration-config", lnk_cal, "experiment config whose H0 trials calibrate --fpr");
  thr_opt->excludes(fpr_opt);
  lnk->add_option("-o,--output", lnk_out, "score matrix CSV")->required();
  lnk_jitter.add(lnk);

  // roc
  auto* rc = app.add_subcommand("roc", "ROC curve and AUC of two score files (one score per line)");
  std::string roc_h0, roc_h1, roc_out;
  rc->add_option("--h0", roc_h0, "null-hypothesis scores")->required();
  rc->add_option("--h1", roc_h1, "alternative-hypothesis scores")->required();
  rc->add_option("-o,--output", roc_out, "ROC CSV (fpr,tpr)")->required();

  // run
  auto* rn = app.add_subcommand("run", "run a detector comparison from a config file");
  std::string run_cfg;
  Overrides run_over;
  rn->add_option("--config", run_cfg, "experiment config")->required();
  run_over.add(rn);

  // sweep-claims
  auto* sw = app.add_subcommand("sweep-claims", "reproduce the passive vs non-blind comparisons");
  std::string sw_cfg;
  Overrides sw_over;
  sw->add_option("--config", sw_cfg, "experiment config (defaults used when absent)");
  sw_over.add(sw);

  // convert-trace
  auto* cv = app.add_subcommand("convert-trace", "convert a timestamp list into the flow text format");
  std::string cv_in, cv_out, cv_id = "trace";
  cv->add_option("-i,--input", cv_in, "one timestamp (seconds) per line")->required();
  cv->add_option("--id", cv_id, "flow id")->capture_default_str();
  cv->add_option("-o,--output", cv_out, "flow file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc_code = app.exit(e);
    return rc_code == 0 ? 0 : kExitConfig;
  }

  try {
    if (gen->parsed()) {
      std::vector<Flow> flows;
      if (gen_model == "a") {
        for (std::size_t i = 0; i < gen_count; ++i)
          flows.push_back(gen_model_a({gen_lambda, gen_packets, derive_seed(gen_seed, i, "flow")}, "f" + std::to_string(i)));
      } else if (gen_model == "b") {
        const Flow base = gen_model_a({gen_lambda, gen_packets, derive_seed(gen_seed, 0, "model_b_base")}, "base");
        for (std::size_t i = 0; i < gen_count; ++i)
          flows.push_back(gen_model_b({base, gen_sigma, parse_noise_dist(gen_dev_dist), derive_seed(gen_seed, i, "flow")},
                                      "f" + std::to_string(i)));
      } else {
        throw ConfigError("--model must be 'a' or 'b'");
      }
      save_flows(gen_out, flows);
    } else if (emb->parsed()) {
      const auto in = load_flows(emb_in);
      for (const auto& id : in.skipped) std::cerr << "warning: flow '" << id << "' has < 2 packets, skipped\n";
      std::vector<Flow> out;
      std::vector<WatermarkRecord> records;
      std::size_t clips = 0;
      double worst = 0.0;
      for (std::size_t i = 0; i < in.flows.size(); ++i) {
        const auto& f = in.flows[i];
        WatermarkParams p{derive_seed(emb_key, i, "watermark_key"), f.size() - 1, emb_amplitude};
        if (i == 0 && p.exceeds_budget())
          std::cerr << "warning: amplitude " << emb_amplitude << " s exceeds the " << p.budget_warning
                    << " s invisibility budget\n";
        auto r = embed(f, p, emb_offset.value_or(default_base_offset(p)));
        clips += r.record.embed_stats.clip_count;
        worst = std::max(worst, max_delay_introduced(f, r.outgoing));
        out.push_back(std::move(r.outgoing));
        records.push_back(std::move(r.record));
      }
      save_flows(emb_out, out);
      save_records(emb_records, records);
      std::cout << "embedded " << out.size() << " flow(s); clip events " << clips << "; max delay "
                << format_double(worst) << " s\n";
    } else if (det->parsed()) {
      const auto kind = parse_detector(det_detector);
      const auto records = load_records(det_records);
      const auto observed = load_flows(det_observed);
      std::map<std::string, const Flow*> by_id;
      for (const auto& f : observed.flows) by_id.emplace(f.id(), &f);
      const auto ctx = det_jitter.context();
      std::cout << "flow_id,detector,score,linked\n";
      for (const auto& rec : records) {
        const auto it = by_id.find(rec.flow_id);
        if (it == by_id.end()) {
          std::cerr << "warning: no observed flow for record '" << rec.flow_id << "'\n";
          continue;
        }
        const auto s = score(kind, rec, ipd(*it->second), ctx);
        std::cout << rec.flow_id << ',' << s.detector_name << ',' << format_double(s.value) << ','
                  << (det_threshold ? (decide(s, *det_threshold).linked ? "1" : "0") : "") << '\n';
      }
    } else if (lnk->parsed()) {
      const auto kind = parse_detector(lnk_detector);
      const auto records = load_records(lnk_records);
      const auto flows = load_flows(lnk_flows).flows;
      auto ctx = lnk_jitter.context();
      double threshold = 0.0;
      if (lnk_threshold) {
        threshold = *lnk_threshold;
      } else if (lnk_fpr) {
        if (lnk_cal.empty()) throw ConfigError("--fpr needs --calibration-config");
        auto cfg = load_config(lnk_cal);
        cfg.validate();
        const auto needed = static_cast<std::size_t>(std::ceil(1.0 / *lnk_fpr - 1e-9));
        const TrialSampler sampler(load_scenario(cfg), *cfg.master_seed);
        const DetectorKind kinds[] = {kind};
        const auto s = run_trials(sampler, kinds, 0, std::max(cfg.n_trials, needed), cfg.workers).front();
        threshold = calibrate_threshold(s.h0, *lnk_fpr);
        ctx = sampler.scenario().detector_context();
        std::cerr << "calibrated threshold " << format_double(threshold) << " from " << s.h0.size() << " H0 trials\n";
      } else {
        throw ConfigError("link needs --threshold or --fpr");
      }
      const auto m = link_all(std::span<const WatermarkRecord>(records), std::span<const Flow>(flows), kind, threshold, ctx);
      auto o = open_or_throw(lnk_out);
      o << "record";
      for (const auto& f : flows) o << ',' << f.id();
      o << '\n';
      for (std::size_t i = 0; i < m.rows; ++i) {
        o << records[i].flow_id;
        for (std::size_t j = 0; j < m.cols; ++j) o << ',' << format_double(m.score(i, j));
        o << '\n';
      }
      std::cout << "record,assigned_flow,score\n";
      for (std::size_t i = 0; i < m.rows; ++i) {
        std::cout << records[i].flow_id << ',';
        if (m.assignments[i]) std::cout << flows[*m.assignments[i]].id() << ',' << format_double(m.score(i, *m.assignments[i]));
        else std::cout << ",";
        std::cout << '\n';
      }
      std::cerr << "pairs scored " << m.telemetry.pair_count << "; degenerate " << m.telemetry.degenerate_cells
                << "; threshold " << format_double(threshold) << "; " << m.telemetry.wall_seconds << " s\n";
    } else if (rc->parsed()) {
      const auto c = roc(read_scores(roc_h0), read_scores(roc_h1));
      auto o = open_or_throw(roc_out);
      write_roc(o, c);
      std::cout << "auc," << format_double(c.auc) << '\n';
    } else if (rn->parsed()) {
      auto cfg = load_config(run_cfg);
      run_over.apply(cfg);
      const auto rep = run(cfg);
      write_report_header(std::cout);
      write_report_rows(std::cout, rep);
    } else if (sw->parsed()) {
      ExperimentConfig cfg;
      if (!sw_cfg.empty()) cfg = load_config(sw_cfg);
      sw_over.apply(cfg);
      print_claims(run_sweep_claims(cfg));
    } else if (cv->parsed()) {
      std::ifstream in(cv_in);
      if (!in) throw Error("cannot open " + cv_in);
      save_flows(cv_out, {parse_timestamp_list(in, cv_id)});
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const CalibrationError& e) {
    std::cerr << "calibration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const InvalidArgument& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ParseError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
