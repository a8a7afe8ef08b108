#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "subcusum/detectors.hpp"
#include "subcusum/model.hpp"
#include "subcusum/montecarlo.hpp"

namespace subcusum {

/// Raised on malformed config text or values that fail validation; the
/// message carries the offending line or field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Experiment description parsed from flat `key = value` text under
/// `[section]` headers. String fields keep symbolic values ("random",
/// "auto", "calibrate") verbatim so a config round-trips unchanged;
/// resolution to concrete library types happens in the build_* helpers.
struct ExperimentConfig {
  struct Scenario {
    std::string flavor = "emerging";  // emerging | switching
    int k = 5;
    double sigma2 = 1.0;
    double theta = 1.0;
    std::string u = "random";   // emerging spike direction: random | v1,v2,...
    std::string u1 = "";        // switching pre-change direction
    std::string u2 = "random";  // switching post-change direction
    long tau = 0;
    bool reduce = true;         // switching: project onto the known complement
    long horizon = 2000;        // samples emitted by `simulate`
    bool operator==(const Scenario&) const = default;
  } scenario;

  struct Detector {
    std::string type = "subspace";  // exact | subspace | eig | eig_windowed
    int w = 20;
    std::string d = "auto";         // auto | numeric drift
    std::string b = "calibrate";    // calibrate | numeric threshold
    bool operator==(const Detector&) const = default;
  } detector;

  struct MonteCarlo {
    std::string gamma = "100,1000";  // comma-separated ARL targets
    int reps = 2000;
    double rel_tol = 0.05;
    long horizon_cap = 0;  // 0 -> 50 * gamma
    std::uint64_t seed = 20240817;
    bool operator==(const MonteCarlo&) const = default;
  } montecarlo;

  struct Compare {
    std::string detectors = "exact,subspace,eig,subspace_opt";
    std::string eig_mode = "cumulative";  // cumulative | windowed
    int scan_w_lo = 1;
    int scan_w_hi = 50;
    bool operator==(const Compare&) const = default;
  } compare;

  struct Output {
    std::string out_dir = ".";
    bool trace = false;
    bool operator==(const Output&) const = default;
  } output;

  static ExperimentConfig parse(const std::string& text);
  std::string serialize() const;
  /// Apply one `section.key=value` override (command-line flags win).
  void set(const std::string& dotted_key, const std::string& value);

  bool operator==(const ExperimentConfig&) const = default;
};

// --- resolution to library types ------------------------------------------

/// The scenario the detectors actually run on: switching configs are reduced
/// to the emerging problem in k-1 dimensions unless reduce = false.
struct ResolvedScenario {
  Scenario scenario;                 // as sampled (original dimension)
  Scenario effective;                // what detectors consume
  bool reduced = false;
  ProjectionOperator projection;     // valid when reduced
};

ResolvedScenario build_scenario(const ExperimentConfig& cfg);

/// Detector for the effective scenario; "auto" drift resolves through the
/// closed-form optimum at the configured window.
DetectorConfig build_detector(const ExperimentConfig& cfg, const ResolvedScenario& rs);

CalibrationSpec build_calibration_spec(const ExperimentConfig& cfg, double gamma,
                                       int workers);

std::vector<double> parse_gamma_grid(const std::string& text);

/// "random" -> deterministic unit vector from the seed; otherwise a comma
/// list, normalized (rejects near-zero vectors).
Eigen::VectorXd resolve_direction(const std::string& text, int k, std::uint64_t seed,
                                  std::uint64_t salt);

}  // namespace subcusum
