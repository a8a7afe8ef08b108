#include "subcusum/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <sstream>

#include "subcusum/format.hpp"
#include "subcusum/tuning.hpp"

namespace subcusum {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

long parse_long(const std::string& v, const std::string& field) {
  try {
    std::size_t pos = 0;
    const long out = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return out;
  } catch (const std::exception&) {
    throw ConfigError("field '" + field + "': expected integer, got '" + v + "'");
  }
}

std::uint64_t parse_u64(const std::string& v, const std::string& field) {
  try {
    std::size_t pos = 0;
    const unsigned long long out = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return out;
  } catch (const std::exception&) {
    throw ConfigError("field '" + field + "': expected unsigned integer, got '" + v + "'");
  }
}

double parse_double(const std::string& v, const std::string& field) {
  try {
    std::size_t pos = 0;
    const double out = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return out;
  } catch (const std::exception&) {
    throw ConfigError("field '" + field + "': expected number, got '" + v + "'");
  }
}

bool parse_bool(const std::string& v, const std::string& field) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("field '" + field + "': expected boolean, got '" + v + "'");
}

std::vector<std::string> split_commas(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

void ExperimentConfig::set(const std::string& dotted_key, const std::string& raw_value) {
  const auto dot = dotted_key.find('.');
  if (dot == std::string::npos)
    throw ConfigError("override '" + dotted_key + "': expected section.key");
  const std::string section = dotted_key.substr(0, dot);
  const std::string key = dotted_key.substr(dot + 1);
  const std::string value = trim(raw_value);
  const std::string field = section + "." + key;

  if (section == "scenario") {
    if (key == "flavor") {
      if (value != "emerging" && value != "switching")
        throw ConfigError("field 'scenario.flavor': expected emerging|switching");
      scenario.flavor = value;
    } else if (key == "k") {
      scenario.k = static_cast<int>(parse_long(value, field));
    } else if (key == "sigma2") {
      scenario.sigma2 = parse_double(value, field);
    } else if (key == "theta") {
      scenario.theta = parse_double(value, field);
    } else if (key == "u") {
      scenario.u = value;
    } else if (key == "u1") {
      scenario.u1 = value;
    } else if (key == "u2") {
      scenario.u2 = value;
    } else if (key == "tau") {
      scenario.tau = parse_long(value, field);
    } else if (key == "reduce") {
      scenario.reduce = parse_bool(value, field);
    } else if (key == "horizon") {
      scenario.horizon = parse_long(value, field);
    } else {
      throw ConfigError("unknown key '" + field + "'");
    }
  } else if (section == "detector") {
    if (key == "type") {
      if (value != "exact" && value != "subspace" && value != "eig" &&
          value != "eig_windowed" && value != "none")
        throw ConfigError(
            "field 'detector.type': expected exact|subspace|eig|eig_windowed|none");
      detector.type = value;
    } else if (key == "w") {
      detector.w = static_cast<int>(parse_long(value, field));
    } else if (key == "d") {
      if (value != "auto") parse_double(value, field);  // validate now
      detector.d = value;
    } else if (key == "b") {
      if (value != "calibrate") parse_double(value, field);
      detector.b = value;
    } else {
      throw ConfigError("unknown key '" + field + "'");
    }
  } else if (section == "montecarlo") {
    if (key == "gamma") {
      montecarlo.gamma = value;
    } else if (key == "reps") {
      montecarlo.reps = static_cast<int>(parse_long(value, field));
    } else if (key == "rel_tol") {
      montecarlo.rel_tol = parse_double(value, field);
    } else if (key == "horizon_cap") {
      montecarlo.horizon_cap = parse_long(value, field);
    } else if (key == "seed") {
      montecarlo.seed = parse_u64(value, field);
    } else {
      throw ConfigError("unknown key '" + field + "'");
    }
  } else if (section == "compare") {
    if (key == "detectors") {
      compare.detectors = value;
    } else if (key == "eig_mode") {
      if (value != "cumulative" && value != "windowed")
        throw ConfigError("field 'compare.eig_mode': expected cumulative|windowed");
      compare.eig_mode = value;
    } else if (key == "scan_w_lo") {
      compare.scan_w_lo = static_cast<int>(parse_long(value, field));
    } else if (key == "scan_w_hi") {
      compare.scan_w_hi = static_cast<int>(parse_long(value, field));
    } else {
      throw ConfigError("unknown key '" + field + "'");
    }
  } else if (section == "output") {
    if (key == "out_dir") {
      output.out_dir = value;
    } else if (key == "trace") {
      output.trace = parse_bool(value, field);
    } else {
      throw ConfigError("unknown key '" + field + "'");
    }
  } else {
    throw ConfigError("unknown section '" + section + "'");
  }
}

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream is(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("line " + std::to_string(lineno) + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    if (section.empty())
      throw ConfigError("line " + std::to_string(lineno) + ": key outside any [section]");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      cfg.set(section + "." + key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

std::string ExperimentConfig::serialize() const {
  std::ostringstream os;
  os << "[scenario]\n"
     << "flavor = " << scenario.flavor << "\n"
     << "k = " << scenario.k << "\n"
     << "sigma2 = " << g17(scenario.sigma2) << "\n"
     << "theta = " << g17(scenario.theta) << "\n"
     << "u = " << scenario.u << "\n"
     << "u1 = " << scenario.u1 << "\n"
     << "u2 = " << scenario.u2 << "\n"
     << "tau = " << scenario.tau << "\n"
     << "reduce = " << (scenario.reduce ? "true" : "false") << "\n"
     << "horizon = " << scenario.horizon << "\n"
     << "\n[detector]\n"
     << "type = " << detector.type << "\n"
     << "w = " << detector.w << "\n"
     << "d = " << detector.d << "\n"
     << "b = " << detector.b << "\n"
     << "\n[montecarlo]\n"
     << "gamma = " << montecarlo.gamma << "\n"
     << "reps = " << montecarlo.reps << "\n"
     << "rel_tol = " << g17(montecarlo.rel_tol) << "\n"
     << "horizon_cap = " << montecarlo.horizon_cap << "\n"
     << "seed = " << montecarlo.seed << "\n"
     << "\n[compare]\n"
     << "detectors = " << compare.detectors << "\n"
     << "eig_mode = " << compare.eig_mode << "\n"
     << "scan_w_lo = " << compare.scan_w_lo << "\n"
     << "scan_w_hi = " << compare.scan_w_hi << "\n"
     << "\n[output]\n"
     << "out_dir = " << output.out_dir << "\n"
     << "trace = " << (output.trace ? "true" : "false") << "\n";
  return os.str();
}

std::vector<double> parse_gamma_grid(const std::string& text) {
  std::vector<double> out;
  for (const std::string& item : split_commas(text))
    out.push_back(parse_double(item, "montecarlo.gamma"));
  if (out.empty()) throw ConfigError("montecarlo.gamma: empty grid");
  for (const double g : out)
    if (!(g > 1.0)) throw ConfigError("montecarlo.gamma: targets must be > 1");
  return out;
}

Eigen::VectorXd resolve_direction(const std::string& text, int k, std::uint64_t seed,
                                  std::uint64_t salt) {
  Eigen::VectorXd u(k);
  if (text == "random") {
    std::mt19937_64 eng = make_engine(seed, salt);
    std::normal_distribution<double> n01;
    for (int i = 0; i < k; ++i) u(i) = n01(eng);
  } else {
    const std::vector<std::string> parts = split_commas(text);
    if (static_cast<int>(parts.size()) != k)
      throw ConfigError("direction '" + text + "': expected " + std::to_string(k) +
                        " components");
    for (int i = 0; i < k; ++i) u(i) = parse_double(parts[i], "direction");
  }
  const double norm = u.norm();
  if (!(norm > 1e-12)) throw ConfigError("direction '" + text + "': vector is (near) zero");
  return u / norm;
}

ResolvedScenario build_scenario(const ExperimentConfig& cfg) {
  const auto& sc = cfg.scenario;
  if (sc.k < 2) throw ConfigError("scenario.k must be >= 2");
  if (!(sc.sigma2 > 0.0)) throw ConfigError("scenario.sigma2 must be > 0");
  if (!(sc.theta > 0.0)) throw ConfigError("scenario.theta must be > 0");
  if (sc.tau < 0) throw ConfigError("scenario.tau must be >= 0");

  ResolvedScenario out;
  if (sc.flavor == "emerging") {
    Eigen::VectorXd u = resolve_direction(sc.u, sc.k, cfg.montecarlo.seed, 0x7531);
    out.scenario = Scenario::emerging(SpikedModel::noise(sc.k, sc.sigma2),
                                      SpikedModel::spiked(sc.k, sc.sigma2, sc.theta, u),
                                      sc.tau);
    out.effective = out.scenario;
    return out;
  }
  if (sc.u1.empty())
    throw ConfigError("scenario.u1 is required for the switching flavor");
  Eigen::VectorXd u1 = resolve_direction(sc.u1, sc.k, cfg.montecarlo.seed, 0x7532);
  Eigen::VectorXd u2 = resolve_direction(sc.u2, sc.k, cfg.montecarlo.seed, 0x7533);
  out.scenario = Scenario::switching(SpikedModel::spiked(sc.k, sc.sigma2, sc.theta, u1),
                                     SpikedModel::spiked(sc.k, sc.sigma2, sc.theta, u2),
                                     sc.tau);
  if (!sc.reduce) {
    out.effective = out.scenario;
    return out;
  }
  ReducedScenario reduced = reduce_switching(out.scenario);
  out.effective = reduced.scenario;
  out.projection = std::move(reduced.projection);
  out.reduced = true;
  return out;
}

DetectorConfig build_detector(const ExperimentConfig& cfg, const ResolvedScenario& rs) {
  const auto& det = cfg.detector;
  if (rs.effective.flavor == Flavor::Switching)
    throw ConfigError(
        "detectors assume an isotropic pre-change law; switching scenarios need "
        "reduce = true");
  const SpikedModel& post = rs.effective.post;
  const int k = post.k;
  if (det.type == "exact") return ExactCusumConfig{post};
  if (det.type == "subspace") {
    if (det.w < 1) throw ConfigError("detector.w must be >= 1");
    double d = 0.0;
    if (det.d == "auto") {
      try {
        d = optimal_drift(k, post.rho(), post.sigma2, det.w);
      } catch (const InfeasibleWindow& e) {
        throw ConfigError(std::string("detector.d = auto: ") + e.what());
      }
    } else {
      d = parse_double(det.d, "detector.d");
    }
    return SubspaceCusumConfig{k, det.w, d};
  }
  if (det.type == "eig") return LargestEigConfig{k, det.w, EigChartMode::Cumulative};
  if (det.type == "eig_windowed") {
    if (det.w < 1) throw ConfigError("detector.w must be >= 1");
    return LargestEigConfig{k, det.w, EigChartMode::Windowed};
  }
  throw ConfigError("unknown detector.type '" + det.type + "'");
}

CalibrationSpec build_calibration_spec(const ExperimentConfig& cfg, double gamma,
                                       int workers) {
  CalibrationSpec spec;
  spec.target_gamma = gamma;
  spec.rel_tol = cfg.montecarlo.rel_tol;
  spec.reps = cfg.montecarlo.reps;
  spec.horizon_cap = cfg.montecarlo.horizon_cap;
  spec.master_seed = cfg.montecarlo.seed;
  spec.workers = workers;
  spec.validate();
  return spec;
}

}  // namespace subcusum
