#include "subcusum/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "subcusum/format.hpp"
#include "subcusum/tuning.hpp"

namespace subcusum {

long CalibrationSpec::effective_cap() const {
  if (horizon_cap > 0) return horizon_cap;
  return static_cast<long>(50.0 * target_gamma);
}

int default_worker_count() {
  if (const char* env = std::getenv("SUBCUSUM_WORKERS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

int CalibrationSpec::effective_workers() const {
  return workers >= 1 ? workers : default_worker_count();
}

void CalibrationSpec::validate() const {
  if (!(target_gamma > 1.0))
    throw std::invalid_argument("CalibrationSpec: target_gamma must be > 1");
  if (!(rel_tol > 0.0 && rel_tol < 1.0))
    throw std::invalid_argument("CalibrationSpec: rel_tol must lie in (0, 1)");
  if (reps < 100) throw std::invalid_argument("CalibrationSpec: reps must be >= 100");
  if (effective_cap() < 1)
    throw std::invalid_argument("CalibrationSpec: horizon cap must be >= 1");
}

namespace {

struct RepOutcome {
  double effective_time = 0.0;
  bool censored = false;
};

/// Runs `reps` independent replications of one detector/stream configuration.
/// Replication i draws its stream from make_engine(master, salt, i) and each
/// worker owns a private detector, so the outcome vector is a pure function
/// of the arguments no matter how many workers execute it.
std::vector<RepOutcome> run_replications(const DetectorConfig& detector,
                                         const SpikedModel& model, double b, long cap,
                                         int reps, std::uint64_t master,
                                         std::uint64_t salt, int workers) {
  std::vector<RepOutcome> out(static_cast<std::size_t>(reps));
  std::atomic<int> next{0};
  auto worker = [&]() {
    std::unique_ptr<Detector> det = make_detector(detector);
    for (int rep = next.fetch_add(1); rep < reps; rep = next.fetch_add(1)) {
      det->reset();
      StreamSampler sampler(model, make_engine(master, salt, static_cast<std::uint64_t>(rep)));
      const StoppingReport report = run_detector(*det, sampler, b, cap);
      out[static_cast<std::size_t>(rep)] = {static_cast<double>(report.effective_time),
                                            !report.stopped};
    }
  };
  const int nthreads = std::min(workers, reps);
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(nthreads));
    for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return out;
}

RunLengthEstimate summarize(const std::vector<RepOutcome>& outcomes) {
  RunLengthEstimate est;
  est.reps = static_cast<int>(outcomes.size());
  double sum = 0.0;
  long censored = 0;
  for (const auto& o : outcomes) {
    sum += o.effective_time;
    if (o.censored) ++censored;
  }
  est.mean = sum / est.reps;
  double ss = 0.0;
  for (const auto& o : outcomes) {
    const double d = o.effective_time - est.mean;
    ss += d * d;
  }
  const double var = est.reps > 1 ? ss / (est.reps - 1) : 0.0;
  est.stderr_mean = std::sqrt(var / est.reps);
  est.censored_frac = static_cast<double>(censored) / est.reps;
  return est;
}

RunLengthEstimate estimate_run_length(const DetectorConfig& detector,
                                      const SpikedModel& model, double b,
                                      const CalibrationSpec& spec, std::uint64_t salt) {
  spec.validate();
  if (detector_dim(detector) != model.k)
    throw std::invalid_argument("estimate: detector/model dimension mismatch");
  return summarize(run_replications(detector, model, b, spec.effective_cap(), spec.reps,
                                    spec.master_seed, salt, spec.effective_workers()));
}

}  // namespace

RunLengthEstimate estimate_arl(const DetectorConfig& detector, const SpikedModel& pre,
                               double b, const CalibrationSpec& spec, std::uint64_t salt) {
  return estimate_run_length(detector, pre, b, spec, salt);
}

RunLengthEstimate estimate_edd(const DetectorConfig& detector, const SpikedModel& post,
                               double b, const CalibrationSpec& spec, std::uint64_t salt) {
  return estimate_run_length(detector, post, b, spec, salt);
}

ThresholdSearchRange threshold_search_range(const DetectorConfig& detector,
                                            const SpikedModel& pre, double gamma) {
  if (const auto* eig = std::get_if<LargestEigConfig>(&detector)) {
    if (eig->mode == EigChartMode::Cumulative) {
      // lambda_max of the cumulative scatter crosses near sigma2*gamma.
      return {0.1 * pre.sigma2 * gamma, 20.0 * pre.sigma2 * gamma};
    }
  }
  return {0.1, 100.0};
}

namespace {

/// Starting point for the bracket search, derived only from the detector's
/// own parameters so that identical configurations calibrate identically.
/// Biased low where the run-length law is uncertain: growing the bracket
/// costs about one target-length campaign per step, while overshooting pays
/// for much longer pre-change paths.
double default_threshold_hint(const DetectorConfig& detector, const SpikedModel& pre,
                              double gamma) {
  if (const auto* sub = std::get_if<SubspaceCusumConfig>(&detector)) {
    if (sub->d > pre.sigma2) {
      const double delta = solve_delta_inf(sub->d, pre.sigma2);
      return 0.4 * std::log(gamma) / delta;
    }
    return 0.0;
  }
  if (const auto* eig = std::get_if<LargestEigConfig>(&detector)) {
    if (eig->mode == EigChartMode::Cumulative) return pre.sigma2 * gamma;
    return 2.5 * pre.sigma2;  // bulk of the pre-change windowed statistic
  }
  return 0.7 * std::log(gamma);  // exact CUSUM: e^b law, constant below 1
}

}  // namespace

CalibrationResult calibrate_threshold(const DetectorConfig& detector,
                                      const SpikedModel& pre,
                                      const CalibrationSpec& spec, double b_hint) {
  spec.validate();
  CalibrationResult result;
  const double gamma = spec.target_gamma;
  const ThresholdSearchRange range = threshold_search_range(detector, pre, gamma);

  const auto eval = [&](double b) {
    const RunLengthEstimate est = estimate_arl(detector, pre, b, spec, kCalibrationSalt);
    result.transcript.push_back({b, est.mean, est.censored_frac});
    return est;
  };

  double b = b_hint > 0.0 ? b_hint : default_threshold_hint(detector, pre, gamma);
  if (!(b > 0.0)) b = std::sqrt(range.lo * range.hi);
  b = std::clamp(b, range.lo, range.hi);
  RunLengthEstimate est = eval(b);

  const auto within = [&](const RunLengthEstimate& e) {
    return std::abs(e.mean / gamma - 1.0) <= spec.rel_tol;
  };

  // Geometric bracket expansion from the hint, then bisection. Common
  // replication seeds make ARL(b) pathwise nondecreasing in b, so a sign
  // change brackets the target exactly.
  double lo, hi;
  if (est.mean < gamma) {
    lo = b;
    while (est.mean < gamma && !within(est)) {
      if (b >= range.hi) {
        result.message = "no threshold in [" + g17(range.lo) + ", " + g17(range.hi) +
                         "] reaches ARL " + g17(gamma);
        return result;
      }
      lo = b;
      b = std::min(b * 1.7, range.hi);
      est = eval(b);
    }
    hi = b;
  } else {
    hi = b;
    while (est.mean >= gamma && !within(est)) {
      if (b <= range.lo) {
        result.message = "ARL exceeds " + g17(gamma) + " everywhere in [" +
                         g17(range.lo) + ", " + g17(range.hi) + "]";
        return result;
      }
      hi = b;
      b = std::max(b / 1.7, range.lo);
      est = eval(b);
    }
    lo = b;
  }

  for (int it = 0; it < 80 && !within(est); ++it) {
    if (hi - lo <= 1e-9 * std::max(1.0, hi)) {
      result.message = "threshold interval collapsed before reaching rel_tol " +
                       g17(spec.rel_tol) + " (ARL jump through the target)";
      return result;
    }
    b = 0.5 * (lo + hi);
    est = eval(b);
    (est.mean < gamma ? lo : hi) = b;
  }
  if (!within(est)) {
    result.message = "bisection exhausted before reaching rel_tol";
    return result;
  }

  result.ok = true;
  result.b = b;
  result.arl = est;
  if (!est.reliable())
    result.message = "warning: " + g17(est.censored_frac * 100.0) +
                     "% of replications censored at the horizon cap; raise the cap";
  return result;
}

double estimate_post_mean_sq(const SpikedModel& post, int w, long updates,
                             std::uint64_t master_seed) {
  post.validate();
  if (w < 1) throw std::invalid_argument("estimate_post_mean_sq: need w >= 1");
  if (updates < 1) throw std::invalid_argument("estimate_post_mean_sq: need updates >= 1");
  StreamSampler sampler(post, make_engine(master_seed, 0x6d73'7100));
  SlidingWindowCov window(post.k, w);
  Eigen::VectorXd scored(post.k);
  Eigen::VectorXd warm = power_iteration_start(post.k);
  const PowerIterOptions opts{};
  double sum = 0.0;
  long n = 0;
  while (n < updates) {
    const Eigen::VectorXd& x = sampler.next();
    const bool ready = window.full();
    if (ready) window.copy_sample(0, scored);
    window.push(x);
    if (!ready) continue;
    TopEigenEstimate est = top_eigenvector(window, warm, opts);
    warm = est.u_hat;
    const double q = est.u_hat.dot(scored);
    sum += q * q;
    ++n;
  }
  return sum / static_cast<double>(updates);
}

namespace {

/// Drift for a subspace detector at window w: the closed-form optimum when
/// the window is feasible, otherwise the midpoint of (sigma2, empirical
/// post-change mean). Returns false when no admissible drift exists.
bool resolve_drift(const SpikedModel& pre, const SpikedModel& post, int w,
                   std::uint64_t master_seed, double& d_out, std::string& note) {
  const double rho = post.theta / post.sigma2;
  const DriftBounds bounds = drift_bounds(post.k, rho, post.sigma2, w);
  if (bounds.feasible()) {
    d_out = optimal_drift(post.k, rho, post.sigma2, w);
    return true;
  }
  const double post_mean = estimate_post_mean_sq(post, w, 4000, master_seed);
  if (post_mean <= pre.sigma2 * 1.02) {
    note = "no admissible drift at w=" + std::to_string(w);
    return false;
  }
  d_out = 0.5 * (pre.sigma2 + post_mean);
  note = "empirical drift (w <= w_min)";
  return true;
}

CompareRow run_row(const DetectorConfig& det, const SpikedModel& pre,
                   const SpikedModel& post, const CalibrationSpec& spec, double gamma,
                   int w_col, double b_hint, std::string note = {}) {
  CompareRow row;
  row.gamma = gamma;
  row.detector = detector_id(det);
  row.w = w_col;
  row.seed = spec.master_seed;
  row.note = std::move(note);

  CalibrationSpec local = spec;
  local.target_gamma = gamma;
  local.horizon_cap = local.effective_cap();

  const CalibrationResult cal = calibrate_threshold(det, pre, local, b_hint);
  if (!cal.ok) {
    row.ok = false;
    row.b = std::numeric_limits<double>::quiet_NaN();
    row.arl = row.arl_se = row.edd = row.edd_se = row.censored_frac =
        std::numeric_limits<double>::quiet_NaN();
    row.note = row.note.empty() ? cal.message : row.note + "; " + cal.message;
    return row;
  }
  row.b = cal.b;
  row.arl = cal.arl.mean;
  row.arl_se = cal.arl.stderr_mean;

  const RunLengthEstimate edd = estimate_edd(det, post, cal.b, local);
  row.edd = edd.mean;
  row.edd_se = edd.stderr_mean;
  row.censored_frac = std::max(cal.arl.censored_frac, edd.censored_frac);
  return row;
}

}  // namespace

CompareResult compare_procedures(const CompareRequest& request,
                                 const CalibrationSpec& spec) {
  spec.validate();
  request.pre.validate();
  request.post.validate();
  if (!(request.post.theta > 0.0))
    throw std::invalid_argument("compare_procedures: post model must carry a spike");

  CompareResult result;
  const int k = request.post.k;

  for (const double gamma : request.gammas) {
    if (request.include_exact) {
      const DetectorConfig det = ExactCusumConfig{request.post};
      result.rows.push_back(
          run_row(det, request.pre, request.post, spec, gamma, 0, 0.0));
    }
    if (request.include_subspace) {
      double d = 0.0;
      std::string note;
      if (resolve_drift(request.pre, request.post, request.w_fixed, spec.master_seed, d,
                        note)) {
        const DetectorConfig det = SubspaceCusumConfig{k, request.w_fixed, d};
        result.rows.push_back(run_row(det, request.pre, request.post, spec, gamma,
                                      request.w_fixed, 0.0, std::move(note)));
      } else {
        CompareRow row;
        row.gamma = gamma;
        row.detector = "subspace_cusum";
        row.w = request.w_fixed;
        row.seed = spec.master_seed;
        row.ok = false;
        row.note = note;
        row.b = row.arl = row.arl_se = row.edd = row.edd_se = row.censored_frac =
            std::numeric_limits<double>::quiet_NaN();
        result.rows.push_back(std::move(row));
      }
    }
    if (request.include_eig) {
      const DetectorConfig det =
          LargestEigConfig{k, request.w_fixed, request.eig_mode};
      const int w_col = request.eig_mode == EigChartMode::Windowed ? request.w_fixed : 0;
      result.rows.push_back(
          run_row(det, request.pre, request.post, spec, gamma, w_col, 0.0));
    }
    if (request.include_subspace_opt) {
      // Scan w with identical seeds and the default calibration start, so a
      // scan row at w_fixed is bit-identical to the plain subspace row and
      // the scan minimum can never sit above it.
      const CompareRow* best = nullptr;
      const std::size_t scan_begin = result.scan_rows.size();
      for (int w = request.scan_w_lo; w <= request.scan_w_hi; ++w) {
        double d = 0.0;
        std::string note;
        if (!resolve_drift(request.pre, request.post, w, spec.master_seed, d, note)) {
          CompareRow row;
          row.gamma = gamma;
          row.detector = "subspace_cusum";
          row.w = w;
          row.seed = spec.master_seed;
          row.ok = false;
          row.note = note;
          row.b = row.arl = row.arl_se = row.edd = row.edd_se = row.censored_frac =
              std::numeric_limits<double>::quiet_NaN();
          result.scan_rows.push_back(std::move(row));
          continue;
        }
        const DetectorConfig det = SubspaceCusumConfig{k, w, d};
        CompareRow row = run_row(det, request.pre, request.post, spec, gamma, w, 0.0,
                                 std::move(note));
        result.scan_rows.push_back(std::move(row));
      }
      for (std::size_t i = scan_begin; i < result.scan_rows.size(); ++i) {
        const CompareRow& row = result.scan_rows[i];
        if (!row.ok) continue;
        if (best == nullptr || row.edd < best->edd) best = &row;
      }
      if (best != nullptr) {
        CompareRow row = *best;
        row.detector = "subspace_cusum_opt";
        result.rows.push_back(std::move(row));
      } else {
        CompareRow row;
        row.gamma = gamma;
        row.detector = "subspace_cusum_opt";
        row.seed = spec.master_seed;
        row.ok = false;
        row.note = "window scan produced no feasible row";
        row.b = row.arl = row.arl_se = row.edd = row.edd_se = row.censored_frac =
            std::numeric_limits<double>::quiet_NaN();
        result.rows.push_back(std::move(row));
      }
    }
  }
  return result;
}

std::string rows_to_csv(const std::vector<CompareRow>& rows) {
  std::ostringstream os;
  os << "gamma,detector,w,b,arl_hat,arl_se,edd_hat,edd_se,censored_frac,seed\n";
  for (const CompareRow& r : rows) {
    os << g17(r.gamma) << ',' << r.detector << ',' << r.w << ',' << g17(r.b) << ','
       << g17(r.arl) << ',' << g17(r.arl_se) << ',' << g17(r.edd) << ','
       << g17(r.edd_se) << ',' << g17(r.censored_frac) << ',' << r.seed << '\n';
  }
  return os.str();
}

}  // namespace subcusum
