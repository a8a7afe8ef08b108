#pragma once

#include <Eigen/Dense>

#include "subcusum/model.hpp"

namespace subcusum {

/// Ring buffer of the w most recent k-vectors with a maintained unnormalized
/// scatter matrix sum x_i x_i^T over the buffer. Updates are O(k^2) rank-one
/// add/subtract; the scatter is rebuilt from the buffer every 4096 pushes to
/// bound floating-point drift from the downdates.
class SlidingWindowCov {
 public:
  SlidingWindowCov(int dim, int window);

  void push(const Eigen::VectorXd& x);
  bool full() const { return count_ >= window_; }
  int dim() const { return dim_; }
  int window() const { return window_; }
  long pushes() const { return count_; }
  int size() const { return count_ < window_ ? static_cast<int>(count_) : window_; }

  const Eigen::MatrixXd& scatter() const { return scatter_; }
  /// Brute-force rebuild from buffer contents (also the periodic refresh path).
  Eigen::MatrixXd recompute_scatter() const;
  /// i-th oldest buffered sample, i in [0, size()).
  Eigen::VectorXd sample_at(int i) const;
  /// Allocation-free variant of sample_at for streaming callers.
  void copy_sample(int i, Eigen::VectorXd& out) const;
  /// Empty the window without releasing storage.
  void reset();

 private:
  int dim_;
  int window_;
  long count_ = 0;
  int head_ = 0;  // slot the next push writes
  Eigen::MatrixXd buffer_;   // dim x window, column per sample
  Eigen::MatrixXd scatter_;  // dim x dim, symmetric PSD
};

struct PowerIterOptions {
  double tol = 1e-8;
  int max_iter = 1000;
};

/// Top eigenpair estimate. u_hat is unit norm with its largest-magnitude
/// entry made positive; converged means ||A u - lambda u|| <= tol * lambda.
struct TopEigenEstimate {
  Eigen::VectorXd u_hat;
  double lambda_hat = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Deterministic cold start for power iteration: e1 perturbed by 1/k on all
/// coordinates, normalized.
Eigen::VectorXd power_iteration_start(int dim);

/// Power iteration on an arbitrary symmetric PSD matrix, warm-started from
/// `start` (need not be normalized). Non-convergence returns the best
/// iterate with converged = false rather than failing.
TopEigenEstimate power_iteration(const Eigen::MatrixXd& a, const Eigen::VectorXd& start,
                                 const PowerIterOptions& opt = {});

/// Top eigenvector of a full window's scatter, cold-started.
TopEigenEstimate top_eigenvector(const SlidingWindowCov& window,
                                 const PowerIterOptions& opt = {});
/// Warm-started variant for streaming use.
TopEigenEstimate top_eigenvector(const SlidingWindowCov& window,
                                 const Eigen::VectorXd& warm_start,
                                 const PowerIterOptions& opt = {});

/// Asymptotic error covariance of the un-normalized top-eigenvector estimate
/// drawn from a w-sample window of the spiked model:
/// (1+rho)/(w rho^2) * (I - u u^T). Requires w > (k-1)(1+rho)/rho^2.
Eigen::MatrixXd eigenvector_error_cov(const SpikedModel& model, int w);

}  // namespace subcusum
