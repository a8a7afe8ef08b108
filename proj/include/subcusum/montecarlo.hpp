#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "subcusum/detectors.hpp"
#include "subcusum/model.hpp"

namespace subcusum {

/// How a Monte Carlo estimation campaign is sized and seeded. A horizon_cap
/// of 0 picks the default 50 * target_gamma; workers of 0 picks the
/// environment default (SUBCUSUM_WORKERS or hardware concurrency).
struct CalibrationSpec {
  double target_gamma = 0.0;
  double rel_tol = 0.05;
  int reps = 2000;
  long horizon_cap = 0;
  std::uint64_t master_seed = 0;
  int workers = 0;

  long effective_cap() const;
  int effective_workers() const;
  void validate() const;
};

int default_worker_count();

/// Monte Carlo mean of the effective stopping time. Replications that reach
/// the horizon cap are counted at the cap, which biases the mean downward;
/// `reliable` is false when more than 10% of replications were censored.
struct RunLengthEstimate {
  double mean = 0.0;
  double stderr_mean = 0.0;
  double censored_frac = 0.0;
  int reps = 0;

  bool reliable() const { return censored_frac <= 0.10; }
};

// Seed salts separating the phases of an experiment. estimate_arl/estimate_edd
// accept a salt so callers can choose between common random numbers (same
// salt) and fresh draws (new salt).
inline constexpr std::uint64_t kCalibrationSalt = 0x6361'6c69;
inline constexpr std::uint64_t kArlSalt = 0x6172'6c00;
inline constexpr std::uint64_t kEddSalt = 0x6564'6400;

/// ARL at threshold b: mean effective stopping time over a pure pre-change
/// stream (model `pre`).
RunLengthEstimate estimate_arl(const DetectorConfig& detector, const SpikedModel& pre,
                               double b, const CalibrationSpec& spec,
                               std::uint64_t salt = kArlSalt);

/// EDD at threshold b: mean effective stopping time with the change in force
/// from the first sample (model `post`, tau = 0).
RunLengthEstimate estimate_edd(const DetectorConfig& detector, const SpikedModel& post,
                               double b, const CalibrationSpec& spec,
                               std::uint64_t salt = kEddSalt);

struct CalibrationPoint {
  double b = 0.0;
  double arl = 0.0;
  double censored_frac = 0.0;
};

struct CalibrationResult {
  bool ok = false;
  double b = 0.0;
  RunLengthEstimate arl;
  std::vector<CalibrationPoint> transcript;
  std::string message;
};

/// Threshold search domain. Level-comparison charts (cumulative eigenvalue)
/// operate on the raw lambda_max scale, so their thresholds grow with
/// sigma2 * gamma; the CUSUM-type detectors search the fixed [0.1, 100] band.
struct ThresholdSearchRange {
  double lo = 0.0;
  double hi = 0.0;
};
ThresholdSearchRange threshold_search_range(const DetectorConfig& detector,
                                            const SpikedModel& pre, double gamma);

/// Find b with |ARL(b)/gamma - 1| <= rel_tol by bracketed bisection. All
/// evaluations share replication seeds (common random numbers), so ARL(b) is
/// a deterministic nondecreasing function of b during the search. b_hint
/// seeds the bracket expansion; pass 0 for the default.
CalibrationResult calibrate_threshold(const DetectorConfig& detector,
                                      const SpikedModel& pre,
                                      const CalibrationSpec& spec, double b_hint = 0.0);

/// Monte Carlo estimate of the post-change mean of (u_hat^T x)^2 at window w,
/// from `updates` sliding-window updates of a post-change stream. Used to
/// pick drifts for windows too small for the closed-form bounds.
double estimate_post_mean_sq(const SpikedModel& post, int w, long updates,
                             std::uint64_t master_seed);

// ---------------------------------------------------------------------------
// Procedure comparison (EDD vs ARL tables)
// ---------------------------------------------------------------------------

struct CompareRequest {
  std::vector<double> gammas;
  SpikedModel pre;
  SpikedModel post;
  int w_fixed = 20;
  bool include_exact = true;
  bool include_subspace = true;
  bool include_eig = true;
  bool include_subspace_opt = false;
  EigChartMode eig_mode = EigChartMode::Cumulative;
  int scan_w_lo = 1;
  int scan_w_hi = 50;
};

struct CompareRow {
  double gamma = 0.0;
  std::string detector;
  int w = 0;  // 0 for detectors without a window
  double b = 0.0;
  double arl = 0.0;
  double arl_se = 0.0;
  double edd = 0.0;
  double edd_se = 0.0;
  double censored_frac = 0.0;
  std::uint64_t seed = 0;
  bool ok = true;
  std::string note;
};

struct CompareResult {
  std::vector<CompareRow> rows;
  /// One row per (gamma, w) of the subspace window scan feeding the
  /// subspace_cusum_opt rows; empty unless the scan ran.
  std::vector<CompareRow> scan_rows;
};

/// For each gamma: calibrate every requested detector to the target ARL,
/// then estimate its EDD. Calibration failures mark their row and the table
/// continues. Deterministic given (request, spec): rerunning yields
/// byte-identical CSV.
CompareResult compare_procedures(const CompareRequest& request,
                                 const CalibrationSpec& spec);

/// CSV with header gamma,detector,w,b,arl_hat,arl_se,edd_hat,edd_se,
/// censored_frac,seed; floats carry 17 significant digits. Failed rows emit
/// nan values.
std::string rows_to_csv(const std::vector<CompareRow>& rows);

}  // namespace subcusum
