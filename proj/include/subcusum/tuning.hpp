#pragma once

#include <stdexcept>
#include <string>

namespace subcusum {

/// Thrown when a window size is too small for the drift interval to be
/// nonempty; carries the limiting value w_min = (k-1)(1+rho)/rho^2.
class InfeasibleWindow : public std::domain_error {
 public:
  InfeasibleWindow(double w, double w_min)
      : std::domain_error("window w = " + std::to_string(w) +
                          " infeasible, need w > " + std::to_string(w_min)),
        w_min_(w_min) {}
  double w_min() const { return w_min_; }

 private:
  double w_min_;
};

/// Admissible drift interval for the subspace statistic: `lower` is the
/// pre-change mean of (u_hat^T x)^2 (= sigma2), `upper` the post-change mean
/// sigma2*(1+rho)(1 - (k-1)/(w rho)). The interval is nonempty iff
/// w > w_min.
struct DriftBounds {
  double lower = 0.0;
  double upper = 0.0;
  double w_min = 0.0;

  bool feasible() const { return upper > lower; }
  void require_feasible(double w) const {
    if (!feasible()) throw InfeasibleWindow(w, w_min);
  }
};

DriftBounds drift_bounds(int k, double rho, double sigma2, double w);

/// Pre-change moment generating function of delta*[(u_hat^T x)^2 - d]:
/// exp(-delta d)/sqrt(1 - 2 sigma2 delta), valid for delta in
/// (0, 1/(2 sigma2)).
double mgf_nominal(double delta, double sigma2, double d);

/// Drift corresponding to a tilt delta: d = -log(1 - 2 sigma2 delta)/(2 delta).
double drift_from_delta(double delta, double sigma2);

/// Positive root delta of mgf_nominal(delta, sigma2, d) = 1, by bracketed
/// bisection on (0, 1/(2 sigma2)). Requires d > sigma2.
double solve_delta_inf(double d, double sigma2);

/// Tilt maximizing the delay-rate denominator at window w:
/// (1/(2 sigma2)) * (1 - 1/A) with A = (1+rho)(1 - (k-1)/(w rho)).
double optimal_delta(int k, double rho, double w, double sigma2);

/// First-order detection-delay prediction for the subspace procedure at
/// window w: 2 log(gamma)/(A - 1 - log A) + w. Lower-order factors are
/// dropped, so treat it as a trend, not a calibration.
double predicted_edd_subspace(double gamma, int k, double rho, double w);

/// First-order delay prediction for the exact CUSUM: 2 log(gamma)/(rho - log(1+rho)).
double predicted_edd_cusum(double gamma, double rho);

/// Per-sample Kullback-Leibler number of the spiked-vs-isotropic pair:
/// (rho - log(1+rho))/2.
double kl_number(double rho);

/// Delay-minimizing window size: sqrt(log gamma)*sqrt(2(k-1))/(rho - log(1+rho)).
double optimal_window_real(double gamma, int k, double rho);
/// Nearest integer to the above, clamped above w_min.
int optimal_window(double gamma, int k, double rho);

/// Drift paired with the optimal tilt at window w: sigma2*A/(A-1)*log A.
double optimal_drift(int k, double rho, double sigma2, double w);

/// First-order delay ratio of the subspace procedure over exact CUSUM at the
/// optimal window: 1 + sqrt((k-1)/(2 log gamma)).
double predicted_ratio(double gamma, int k);

/// Bundle of tuned parameters and first-order predictions for one
/// (gamma, k, rho, sigma2) instance.
struct TuningResult {
  double gamma = 0.0;
  int k = 0;
  double rho = 0.0;
  double sigma2 = 0.0;
  int w_star = 0;
  double w_star_real = 0.0;
  double d_star = 0.0;
  double delta_star = 0.0;
  double predicted_edd_subspace = 0.0;
  double predicted_edd_cusum = 0.0;
  double predicted_ratio = 0.0;
};

TuningResult tune(double gamma, int k, double rho, double sigma2);

}  // namespace subcusum
