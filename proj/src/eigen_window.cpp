#include "subcusum/eigen_window.hpp"

#include <cmath>
#include <stdexcept>

namespace subcusum {

namespace {
constexpr long kRecomputeInterval = 4096;
}

SlidingWindowCov::SlidingWindowCov(int dim, int window) : dim_(dim), window_(window) {
  if (dim < 1) throw std::invalid_argument("SlidingWindowCov: dim must be >= 1");
  if (window < 1) throw std::invalid_argument("SlidingWindowCov: window must be >= 1");
  buffer_ = Eigen::MatrixXd::Zero(dim, window);
  scatter_ = Eigen::MatrixXd::Zero(dim, dim);
}

void SlidingWindowCov::push(const Eigen::VectorXd& x) {
  if (x.size() != dim_)
    throw std::invalid_argument("SlidingWindowCov::push: dimension mismatch");
  if (count_ >= window_) {
    const auto old = buffer_.col(head_);
    scatter_.noalias() -= old * old.transpose();
  }
  buffer_.col(head_) = x;
  scatter_.noalias() += x * x.transpose();
  head_ = (head_ + 1) % window_;
  ++count_;
  if (count_ % kRecomputeInterval == 0) scatter_ = recompute_scatter();
}

Eigen::MatrixXd SlidingWindowCov::recompute_scatter() const {
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(dim_, dim_);
  const int n = size();
  for (int i = 0; i < n; ++i) {
    const auto col = buffer_.col(i);
    s.noalias() += col * col.transpose();
  }
  return s;
}

Eigen::VectorXd SlidingWindowCov::sample_at(int i) const {
  Eigen::VectorXd out;
  copy_sample(i, out);
  return out;
}

void SlidingWindowCov::copy_sample(int i, Eigen::VectorXd& out) const {
  const int n = size();
  if (i < 0 || i >= n) throw std::out_of_range("SlidingWindowCov::copy_sample");
  // Oldest sample sits at head_ once the ring has wrapped.
  const int base = count_ >= window_ ? head_ : 0;
  out = buffer_.col((base + i) % window_);
}

void SlidingWindowCov::reset() {
  count_ = 0;
  head_ = 0;
  scatter_.setZero();
}

Eigen::VectorXd power_iteration_start(int dim) {
  Eigen::VectorXd v = Eigen::VectorXd::Constant(dim, 1.0 / dim);
  v(0) += 1.0;
  v /= v.norm();
  return v;
}

TopEigenEstimate power_iteration(const Eigen::MatrixXd& a, const Eigen::VectorXd& start,
                                 const PowerIterOptions& opt) {
  if (!(opt.tol > 0.0)) throw std::invalid_argument("power_iteration: tol must be > 0");
  const auto n = a.rows();
  if (a.cols() != n || start.size() != n)
    throw std::invalid_argument("power_iteration: shape mismatch");

  TopEigenEstimate est;
  Eigen::VectorXd v = start / start.norm();
  Eigen::VectorXd av(n);
  double lambda = 0.0;
  bool converged = false;
  int it = 0;
  while (true) {
    av.noalias() = a * v;
    lambda = v.dot(av);
    // Cheap residual bound first: for unit v,
    // ||A v - lambda v||^2 = ||A v||^2 - lambda^2. The subtraction bottoms
    // out at the rounding floor of lambda^2, so candidates get confirmed
    // with the explicitly formed residual.
    const double avn2 = av.squaredNorm();
    const double resid2 = std::max(0.0, avn2 - lambda * lambda);
    const double gate = std::max(4.0 * opt.tol * opt.tol, 1e-15) * lambda * lambda;
    if (resid2 <= gate &&
        (av - lambda * v).norm() <= opt.tol * std::abs(lambda)) {
      converged = true;
      break;
    }
    if (it >= opt.max_iter) break;
    if (avn2 == 0.0) break;  // v in the null space; iteration is stuck
    v = av / std::sqrt(avn2);
    ++it;
  }

  // Fix the sign so the largest-magnitude entry is positive (first index
  // wins ties), making estimates comparable across runs.
  int imax = 0;
  double amax = 0.0;
  for (int i = 0; i < n; ++i) {
    const double m = std::abs(v(i));
    if (m > amax) {
      amax = m;
      imax = i;
    }
  }
  if (v(imax) < 0.0) v = -v;

  est.u_hat = std::move(v);
  est.lambda_hat = lambda;
  est.iterations = it;
  est.converged = converged;
  return est;
}

TopEigenEstimate top_eigenvector(const SlidingWindowCov& window,
                                 const PowerIterOptions& opt) {
  return top_eigenvector(window, power_iteration_start(window.dim()), opt);
}

TopEigenEstimate top_eigenvector(const SlidingWindowCov& window,
                                 const Eigen::VectorXd& warm_start,
                                 const PowerIterOptions& opt) {
  if (!window.full())
    throw std::invalid_argument("top_eigenvector: window must hold exactly w samples");
  return power_iteration(window.scatter(), warm_start, opt);
}

Eigen::MatrixXd eigenvector_error_cov(const SpikedModel& model, int w) {
  model.validate();
  if (!(model.theta > 0.0))
    throw std::invalid_argument("eigenvector_error_cov: requires theta > 0");
  const double rho = model.rho();
  const double w_min = (model.k - 1) * (1.0 + rho) / (rho * rho);
  if (w <= w_min)
    throw std::invalid_argument("eigenvector_error_cov: window too small, need w > " +
                                std::to_string(w_min));
  Eigen::MatrixXd proj =
      Eigen::MatrixXd::Identity(model.k, model.k) - model.u * model.u.transpose();
  return ((1.0 + rho) / (w * rho * rho)) * proj;
}

}  // namespace subcusum
