// Command-line harness: batch experiments over the subcusum library, emitting
// CSV/JSON tables (stream dumps, detector traces, tuning constants, threshold
// calibrations, and EDD-vs-ARL comparison tables).
#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "subcusum/config.hpp"
#include "subcusum/detectors.hpp"
#include "subcusum/format.hpp"
#include "subcusum/model.hpp"
#include "subcusum/montecarlo.hpp"
#include "subcusum/tuning.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace subcusum;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitCalibration = 3;
constexpr int kExitIo = 4;

struct GlobalOpts {
  std::string config_path;
  std::vector<std::string> overrides;  // section.key=value
  std::optional<std::uint64_t> seed;
  int workers = 0;
  std::string out_dir;
};

ExperimentConfig load_config(const GlobalOpts& g) {
  ExperimentConfig cfg;
  if (!g.config_path.empty()) {
    std::ifstream in(g.config_path);
    if (!in) throw ConfigError("cannot open config file '" + g.config_path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    cfg = ExperimentConfig::parse(ss.str());
  }
  for (const std::string& ov : g.overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos)
      throw ConfigError("--set expects section.key=value, got '" + ov + "'");
    cfg.set(ov.substr(0, eq), ov.substr(eq + 1));
  }
  if (g.seed) cfg.montecarlo.seed = *g.seed;
  if (!g.out_dir.empty()) cfg.output.out_dir = g.out_dir;
  return cfg;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::ios_base::failure("cannot open '" + path.string() + "' for writing");
  out << content;
  if (!out) throw std::ios_base::failure("write failed for '" + path.string() + "'");
}

fs::path ensure_out_dir(const ExperimentConfig& cfg) {
  fs::path dir(cfg.output.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::ios_base::failure("cannot create out dir '" + dir.string() + "'");
  return dir;
}

json report_to_json(const StoppingReport& r) {
  return json{{"stopped", r.stopped},
              {"raw_index", r.raw_index},
              {"effective_time", r.effective_time},
              {"statistic_at_stop", r.statistic_at_stop}};
}

json row_to_json(const CompareRow& r) {
  return json{{"gamma", r.gamma},       {"detector", r.detector},
              {"w", r.w},               {"b", r.b},
              {"arl_hat", r.arl},       {"arl_se", r.arl_se},
              {"edd_hat", r.edd},       {"edd_se", r.edd_se},
              {"censored_frac", r.censored_frac},
              {"seed", r.seed},         {"ok", r.ok},
              {"note", r.note}};
}

std::string stream_to_csv(const std::vector<Eigen::VectorXd>& stream) {
  std::ostringstream os;
  for (const auto& x : stream) {
    for (int i = 0; i < x.size(); ++i) {
      if (i) os << ',';
      os << g17(x(i));
    }
    os << '\n';
  }
  return os.str();
}

/// Resolves detector.b: numeric value passes through, "calibrate" runs the
/// Monte Carlo calibration against the first gamma target.
double resolve_threshold(const ExperimentConfig& cfg, const ResolvedScenario& rs,
                         const DetectorConfig& det, int workers,
                         CalibrationResult* cal_out) {
  if (cfg.detector.b != "calibrate") return std::stod(cfg.detector.b);
  const std::vector<double> gammas = parse_gamma_grid(cfg.montecarlo.gamma);
  const CalibrationSpec spec = build_calibration_spec(cfg, gammas.front(), workers);
  CalibrationResult cal = calibrate_threshold(det, rs.effective.pre, spec);
  if (cal_out) *cal_out = cal;
  if (!cal.ok) throw std::runtime_error("calibration failed: " + cal.message);
  return cal.b;
}

int cmd_simulate(const GlobalOpts& g) {
  const ExperimentConfig cfg = load_config(g);
  const ResolvedScenario rs = build_scenario(cfg);
  const fs::path dir = ensure_out_dir(cfg);

  std::vector<Eigen::VectorXd> stream =
      sample_stream(rs.scenario, cfg.scenario.horizon, cfg.montecarlo.seed);
  if (rs.reduced)
    for (auto& x : stream) x = rs.projection.apply(x);
  write_file(dir / "stream.csv", stream_to_csv(stream));

  if (cfg.detector.type == "none") {
    std::cout << "wrote " << (dir / "stream.csv").string() << "\n";
    return kExitOk;
  }

  const DetectorConfig det_cfg = build_detector(cfg, rs);
  const double b = resolve_threshold(cfg, rs, det_cfg, g.workers, nullptr);
  std::unique_ptr<Detector> det = make_detector(det_cfg);

  std::ostringstream trace;
  trace << "t,statistic,stopped\n";
  StoppingReport report;
  {
    std::vector<StatUpdate> updates;
    TraceSink sink;
    if (cfg.output.trace) sink = [&](const StatUpdate& u) { updates.push_back(u); };
    report = run_detector(*det, std::span<const Eigen::VectorXd>(stream), b, -1, sink);
    for (const StatUpdate& u : updates) {
      const bool stop_row = report.stopped && u.t == report.raw_index;
      trace << u.t << ',' << g17(u.statistic) << ',' << (stop_row ? 1 : 0) << '\n';
    }
  }
  if (cfg.output.trace) write_file(dir / "trace.csv", trace.str());

  json rep = report_to_json(report);
  rep["detector"] = detector_id(det_cfg);
  rep["b"] = b;
  rep["seed"] = cfg.montecarlo.seed;
  write_file(dir / "report.json", rep.dump(2) + "\n");
  std::cout << rep.dump(2) << "\n";
  return kExitOk;
}

int cmd_tune(double gamma, int k, double rho, double sigma2, const std::string& out) {
  const TuningResult r = tune(gamma, k, rho, sigma2);
  const json j{{"gamma", r.gamma},
               {"k", r.k},
               {"rho", r.rho},
               {"sigma2", r.sigma2},
               {"w_star", r.w_star},
               {"w_star_real", r.w_star_real},
               {"d_star", r.d_star},
               {"delta_star", r.delta_star},
               {"predicted_edd_subspace", r.predicted_edd_subspace},
               {"predicted_edd_cusum", r.predicted_edd_cusum},
               {"predicted_ratio", r.predicted_ratio}};
  std::cout << j.dump(2) << "\n";
  if (!out.empty()) write_file(out, j.dump(2) + "\n");
  return kExitOk;
}

int cmd_calibrate(const GlobalOpts& g) {
  const ExperimentConfig cfg = load_config(g);
  if (cfg.detector.type == "none")
    throw ConfigError("calibrate: detector.type must name a detector");
  const ResolvedScenario rs = build_scenario(cfg);
  const DetectorConfig det_cfg = build_detector(cfg, rs);
  const std::vector<double> gammas = parse_gamma_grid(cfg.montecarlo.gamma);
  const fs::path dir = ensure_out_dir(cfg);

  const CalibrationSpec spec = build_calibration_spec(cfg, gammas.front(), g.workers);
  const CalibrationResult cal = calibrate_threshold(det_cfg, rs.effective.pre, spec);

  json j{{"detector", detector_id(det_cfg)},
         {"gamma", spec.target_gamma},
         {"ok", cal.ok},
         {"b", cal.b},
         {"arl_hat", cal.arl.mean},
         {"arl_se", cal.arl.stderr_mean},
         {"censored_frac", cal.arl.censored_frac},
         {"message", cal.message},
         {"seed", spec.master_seed}};
  json transcript = json::array();
  for (const auto& p : cal.transcript)
    transcript.push_back({{"b", p.b}, {"arl", p.arl}, {"censored_frac", p.censored_frac}});
  j["transcript"] = transcript;
  write_file(dir / "calibration.json", j.dump(2) + "\n");
  std::cout << j.dump(2) << "\n";
  return cal.ok ? kExitOk : kExitCalibration;
}

int cmd_compare(const GlobalOpts& g) {
  const ExperimentConfig cfg = load_config(g);
  const ResolvedScenario rs = build_scenario(cfg);
  const fs::path dir = ensure_out_dir(cfg);

  CompareRequest req;
  req.gammas = parse_gamma_grid(cfg.montecarlo.gamma);
  req.pre = rs.effective.pre;
  req.post = rs.effective.post;
  req.w_fixed = cfg.detector.w;
  req.eig_mode = cfg.compare.eig_mode == "windowed" ? EigChartMode::Windowed
                                                    : EigChartMode::Cumulative;
  req.scan_w_lo = cfg.compare.scan_w_lo;
  req.scan_w_hi = cfg.compare.scan_w_hi;
  req.include_exact = req.include_subspace = req.include_eig = false;
  req.include_subspace_opt = false;
  std::stringstream names(cfg.compare.detectors);
  std::string name;
  while (std::getline(names, name, ',')) {
    name.erase(0, name.find_first_not_of(" \t"));
    name.erase(name.find_last_not_of(" \t") + 1);
    if (name == "exact")
      req.include_exact = true;
    else if (name == "subspace")
      req.include_subspace = true;
    else if (name == "eig")
      req.include_eig = true;
    else if (name == "subspace_opt")
      req.include_subspace_opt = true;
    else if (!name.empty())
      throw ConfigError("compare.detectors: unknown detector '" + name + "'");
  }

  CalibrationSpec spec = build_calibration_spec(cfg, req.gammas.front(), g.workers);
  const CompareResult result = compare_procedures(req, spec);

  write_file(dir / "compare.csv", rows_to_csv(result.rows));
  json rows = json::array();
  for (const CompareRow& r : result.rows) rows.push_back(row_to_json(r));
  // Echo the experiment parameters; output paths stay out so the mirror is
  // byte-identical wherever it is written.
  ExperimentConfig echo = cfg;
  echo.output = {};
  write_file(dir / "compare.json",
             json{{"rows", rows}, {"params", echo.serialize()}}.dump(2) + "\n");
  if (!result.scan_rows.empty())
    write_file(dir / "scan.csv", rows_to_csv(result.scan_rows));

  std::cout << rows_to_csv(result.rows);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Subspace-CUSUM sequential change detection experiments"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--config", g.config_path, "experiment config file (key = value sections)");
  app.add_option("--set", g.overrides, "override a config entry: section.key=value")
      ->allow_extra_args(false);
  std::uint64_t seed_flag = 0;
  auto* seed_opt = app.add_option("--seed", seed_flag, "master seed (overrides config)");
  app.add_option("--workers", g.workers,
                 "Monte Carlo worker threads (default: SUBCUSUM_WORKERS or hardware)");
  app.add_option("--out-dir", g.out_dir, "output directory (overrides config)");

  auto* sim = app.add_subcommand("simulate", "sample a stream and run one detector over it");
  auto* tune_cmd = app.add_subcommand("tune", "closed-form parameter tuning for one instance");
  double t_gamma = 1e4, t_rho = 1.0, t_sigma2 = 1.0;
  int t_k = 5;
  std::string t_out;
  tune_cmd->add_option("--gamma", t_gamma, "target average run length")->required();
  tune_cmd->add_option("--k", t_k, "ambient dimension")->required();
  tune_cmd->add_option("--rho", t_rho, "signal-to-noise ratio theta/sigma2")->required();
  tune_cmd->add_option("--sigma2", t_sigma2, "noise power (default 1)");
  tune_cmd->add_option("--out", t_out, "also write the JSON here");
  auto* cal = app.add_subcommand("calibrate", "Monte Carlo threshold calibration");
  auto* cmp = app.add_subcommand("compare", "EDD-vs-ARL comparison table");

  CLI11_PARSE(app, argc, argv);
  if (*seed_opt) g.seed = seed_flag;

  try {
    if (sim->parsed()) return cmd_simulate(g);
    if (tune_cmd->parsed()) return cmd_tune(t_gamma, t_k, t_rho, t_sigma2, t_out);
    if (cal->parsed()) return cmd_calibrate(g);
    if (cmp->parsed()) return cmd_compare(g);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid parameter: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::domain_error& e) {
    std::cerr << "invalid parameter: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::ios_base::failure& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCalibration;
  }
  return kExitOk;
}
