#include "subcusum/tuning.hpp"

#include <cmath>

namespace subcusum {

namespace {

void check_basic(int k, double rho, double sigma2) {
  if (k < 2) throw std::invalid_argument("need dimension k >= 2");
  if (!(rho > 0.0)) throw std::invalid_argument("need SNR rho > 0");
  if (!(sigma2 > 0.0)) throw std::invalid_argument("need sigma2 > 0");
}

// A = (1+rho)(1 - (k-1)/(w rho)), the post/pre variance ratio seen by the
// estimated direction at window w.
double variance_ratio(int k, double rho, double w) {
  return (1.0 + rho) * (1.0 - (k - 1) / (w * rho));
}

}  // namespace

DriftBounds drift_bounds(int k, double rho, double sigma2, double w) {
  check_basic(k, rho, sigma2);
  if (!(w >= 1.0)) throw std::invalid_argument("drift_bounds: need w >= 1");
  DriftBounds b;
  b.lower = sigma2;
  b.upper = sigma2 * variance_ratio(k, rho, w);
  b.w_min = (k - 1) * (1.0 + rho) / (rho * rho);
  return b;
}

double mgf_nominal(double delta, double sigma2, double d) {
  if (!(sigma2 > 0.0)) throw std::invalid_argument("mgf_nominal: need sigma2 > 0");
  if (!(delta > 0.0) || !(delta < 1.0 / (2.0 * sigma2)))
    throw std::domain_error("mgf_nominal: delta must lie in (0, 1/(2 sigma2))");
  return std::exp(-delta * d) / std::sqrt(1.0 - 2.0 * sigma2 * delta);
}

double drift_from_delta(double delta, double sigma2) {
  if (!(sigma2 > 0.0)) throw std::invalid_argument("drift_from_delta: need sigma2 > 0");
  if (!(delta > 0.0) || !(delta < 1.0 / (2.0 * sigma2)))
    throw std::domain_error("drift_from_delta: delta must lie in (0, 1/(2 sigma2))");
  return -std::log(1.0 - 2.0 * sigma2 * delta) / (2.0 * delta);
}

double solve_delta_inf(double d, double sigma2) {
  if (!(sigma2 > 0.0)) throw std::invalid_argument("solve_delta_inf: need sigma2 > 0");
  if (!(d > sigma2))
    throw std::domain_error("solve_delta_inf: no positive root unless d > sigma2");

  // Root of g(delta) = log mgf = -delta*d - log(1 - 2 sigma2 delta)/2, which
  // is negative just above 0 and diverges to +inf at 1/(2 sigma2).
  const auto g = [&](double delta) {
    return -delta * d - 0.5 * std::log(1.0 - 2.0 * sigma2 * delta);
  };
  const double eps = 1e-12;
  double lo = eps;
  double hi = 1.0 / (2.0 * sigma2) - eps;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (g(mid) < 0.0)
      lo = mid;
    else
      hi = mid;
    if (hi - lo <= 1e-15 * hi) break;
  }
  return 0.5 * (lo + hi);
}

double optimal_delta(int k, double rho, double w, double sigma2) {
  drift_bounds(k, rho, sigma2, w).require_feasible(w);
  const double a = variance_ratio(k, rho, w);
  return (1.0 - 1.0 / a) / (2.0 * sigma2);
}

double predicted_edd_subspace(double gamma, int k, double rho, double w) {
  check_basic(k, rho, 1.0);
  if (!(gamma > 1.0)) throw std::invalid_argument("need gamma > 1");
  const double a = variance_ratio(k, rho, w);
  if (!(a > 1.0)) throw InfeasibleWindow(w, (k - 1) * (1.0 + rho) / (rho * rho));
  return 2.0 * std::log(gamma) / (a - 1.0 - std::log(a)) + w;
}

double predicted_edd_cusum(double gamma, double rho) {
  if (!(gamma > 1.0)) throw std::invalid_argument("need gamma > 1");
  if (!(rho > 0.0)) throw std::invalid_argument("need rho > 0");
  return 2.0 * std::log(gamma) / (rho - std::log1p(rho));
}

double kl_number(double rho) {
  if (!(rho > 0.0)) throw std::invalid_argument("kl_number: need rho > 0");
  return 0.5 * (rho - std::log1p(rho));
}

double optimal_window_real(double gamma, int k, double rho) {
  check_basic(k, rho, 1.0);
  if (!(std::log(gamma) > 1.0))
    throw std::invalid_argument("optimal_window_real: need log(gamma) > 1");
  return std::sqrt(std::log(gamma)) * std::sqrt(2.0 * (k - 1)) / (rho - std::log1p(rho));
}

int optimal_window(double gamma, int k, double rho) {
  const double w_real = optimal_window_real(gamma, k, rho);
  const double w_min = (k - 1) * (1.0 + rho) / (rho * rho);
  const int floor_feasible = static_cast<int>(std::ceil(w_min)) + 1;
  return std::max(static_cast<int>(std::lround(w_real)), floor_feasible);
}

double optimal_drift(int k, double rho, double sigma2, double w) {
  drift_bounds(k, rho, sigma2, w).require_feasible(w);
  const double a = variance_ratio(k, rho, w);
  return sigma2 * a / (a - 1.0) * std::log(a);
}

double predicted_ratio(double gamma, int k) {
  if (!(gamma > 1.0)) throw std::invalid_argument("predicted_ratio: need gamma > 1");
  if (k < 2) throw std::invalid_argument("predicted_ratio: need k >= 2");
  return 1.0 + std::sqrt((k - 1) / (2.0 * std::log(gamma)));
}

TuningResult tune(double gamma, int k, double rho, double sigma2) {
  check_basic(k, rho, sigma2);
  TuningResult r;
  r.gamma = gamma;
  r.k = k;
  r.rho = rho;
  r.sigma2 = sigma2;
  r.w_star_real = optimal_window_real(gamma, k, rho);
  r.w_star = optimal_window(gamma, k, rho);
  r.d_star = optimal_drift(k, rho, sigma2, r.w_star);
  r.delta_star = optimal_delta(k, rho, r.w_star, sigma2);
  r.predicted_edd_subspace = predicted_edd_subspace(gamma, k, rho, r.w_star);
  r.predicted_edd_cusum = predicted_edd_cusum(gamma, rho);
  r.predicted_ratio = subcusum::predicted_ratio(gamma, k);
  return r;
}

}  // namespace subcusum
