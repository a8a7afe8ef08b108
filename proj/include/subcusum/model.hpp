#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <vector>

#include "subcusum/rng.hpp"

namespace subcusum {

/// Rank-one spiked covariance model: x ~ N(0, sigma2*I_k + theta*u*u^T).
/// theta = 0 gives isotropic noise; u is only stored (and must be unit
/// norm) when theta > 0.
struct SpikedModel {
  int k = 0;
  double sigma2 = 1.0;
  double theta = 0.0;
  Eigen::VectorXd u;  // empty when theta == 0

  static SpikedModel noise(int k, double sigma2);
  static SpikedModel spiked(int k, double sigma2, double theta, Eigen::VectorXd u);

  double rho() const { return theta / sigma2; }
  Eigen::MatrixXd covariance() const;
  void validate() const;  // throws std::invalid_argument on violation
};

enum class Flavor { Emerging, Switching };

/// Pre/post-change model pair with change point tau. Samples 1..tau follow
/// `pre`, samples tau+1.. follow `post`.
struct Scenario {
  Flavor flavor = Flavor::Emerging;
  SpikedModel pre;
  SpikedModel post;
  long tau = 0;

  static Scenario emerging(SpikedModel pre_noise, SpikedModel post_spiked, long tau);
  static Scenario switching(SpikedModel pre_spiked, SpikedModel post_spiked, long tau);

  int dim() const { return pre.k; }
  void validate() const;
};

/// (k-1) x k orthonormal projector onto the complement of a known direction:
/// Q*u1 = 0 and Q*Q^T = I.
struct ProjectionOperator {
  Eigen::MatrixXd q;

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const { return q * x; }
};

/// Rows 2..k of the Householder reflector taking u1 to e1, with each row's
/// first nonzero entry made positive. Deterministic in u1.
ProjectionOperator build_projection(const Eigen::VectorXd& u1);

/// Result of collapsing a switching scenario to an emerging one in k-1
/// dimensions via y = Q*x. The reduced spike strength is
/// theta*(1 - (u1^T u2)^2).
struct ReducedScenario {
  Scenario scenario;            // emerging, dimension k-1
  ProjectionOperator projection;
};

ReducedScenario reduce_switching(const Scenario& sc);

/// Incremental sampler for a scenario's observation stream. Consumes the
/// engine in a fixed per-sample order, so streams are reproducible from
/// (scenario, seed) alone.
class StreamSampler {
 public:
  StreamSampler(Scenario sc, std::uint64_t seed);
  StreamSampler(Scenario sc, std::mt19937_64 engine);
  /// Stationary stream from a single model (tau = infinity semantics).
  StreamSampler(SpikedModel model, std::uint64_t seed);
  StreamSampler(SpikedModel model, std::mt19937_64 engine);

  const Eigen::VectorXd& next();
  long position() const { return t_; }
  int dim() const { return x_.size(); }

 private:
  Scenario sc_;
  std::mt19937_64 eng_;
  std::normal_distribution<double> n01_;
  long t_ = 0;
  Eigen::VectorXd x_;

  void draw(const SpikedModel& m);
};

/// Materialize `horizon` samples of the scenario stream.
std::vector<Eigen::VectorXd> sample_stream(const Scenario& sc, long horizon,
                                           std::uint64_t seed);

}  // namespace subcusum
