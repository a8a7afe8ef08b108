#include "subcusum/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace subcusum {

namespace {
constexpr double kUnitNormTol = 1e-10;
}

SpikedModel SpikedModel::noise(int k, double sigma2) {
  SpikedModel m;
  m.k = k;
  m.sigma2 = sigma2;
  m.theta = 0.0;
  m.validate();
  return m;
}

SpikedModel SpikedModel::spiked(int k, double sigma2, double theta, Eigen::VectorXd u) {
  SpikedModel m;
  m.k = k;
  m.sigma2 = sigma2;
  m.theta = theta;
  m.u = std::move(u);
  m.validate();
  return m;
}

Eigen::MatrixXd SpikedModel::covariance() const {
  Eigen::MatrixXd c = sigma2 * Eigen::MatrixXd::Identity(k, k);
  if (theta > 0.0) c.noalias() += theta * u * u.transpose();
  return c;
}

void SpikedModel::validate() const {
  if (k < 1) throw std::invalid_argument("SpikedModel: dimension k must be >= 1");
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2))
    throw std::invalid_argument("SpikedModel: sigma2 must be positive and finite");
  if (theta < 0.0 || !std::isfinite(theta))
    throw std::invalid_argument("SpikedModel: theta must be nonnegative and finite");
  if (theta > 0.0) {
    if (u.size() != k)
      throw std::invalid_argument("SpikedModel: u must have length k when theta > 0");
    if (std::abs(u.norm() - 1.0) > 1e-12)
      throw std::invalid_argument("SpikedModel: u must be unit norm (|1 - ||u||| <= 1e-12)");
  }
}

Scenario Scenario::emerging(SpikedModel pre_noise, SpikedModel post_spiked, long tau) {
  Scenario sc;
  sc.flavor = Flavor::Emerging;
  sc.pre = std::move(pre_noise);
  sc.post = std::move(post_spiked);
  sc.tau = tau;
  sc.validate();
  return sc;
}

Scenario Scenario::switching(SpikedModel pre_spiked, SpikedModel post_spiked, long tau) {
  Scenario sc;
  sc.flavor = Flavor::Switching;
  sc.pre = std::move(pre_spiked);
  sc.post = std::move(post_spiked);
  sc.tau = tau;
  sc.validate();
  return sc;
}

void Scenario::validate() const {
  pre.validate();
  post.validate();
  if (tau < 0) throw std::invalid_argument("Scenario: tau must be nonnegative");
  if (pre.k != post.k) throw std::invalid_argument("Scenario: pre/post dimension mismatch");
  if (pre.sigma2 != post.sigma2)
    throw std::invalid_argument("Scenario: pre/post noise power mismatch");
  if (flavor == Flavor::Emerging) {
    if (pre.theta != 0.0)
      throw std::invalid_argument("Scenario: emerging flavor requires pre.theta = 0");
  } else {
    if (!(pre.theta > 0.0) || pre.theta != post.theta)
      throw std::invalid_argument(
          "Scenario: switching flavor requires pre.theta = post.theta > 0");
  }
}

ProjectionOperator build_projection(const Eigen::VectorXd& u1) {
  const int k = static_cast<int>(u1.size());
  if (k < 2) throw std::invalid_argument("build_projection: need dimension k >= 2");
  if (std::abs(u1.norm() - 1.0) > kUnitNormTol)
    throw std::invalid_argument("build_projection: u1 must be unit norm");

  // Householder reflector H = I - 2 v v^T / ||v||^2 with v = u1 - e1 maps
  // u1 to e1; rows 2..k of H then form an orthonormal basis of u1-perp.
  Eigen::VectorXd v = u1;
  v(0) -= 1.0;
  const double vsq = v.squaredNorm();
  Eigen::MatrixXd h = Eigen::MatrixXd::Identity(k, k);
  if (vsq > 1e-24) h.noalias() -= (2.0 / vsq) * v * v.transpose();

  ProjectionOperator p;
  p.q = h.bottomRows(k - 1);
  for (int r = 0; r < k - 1; ++r) {
    for (int c = 0; c < k; ++c) {
      const double e = p.q(r, c);
      if (std::abs(e) > 1e-12) {
        if (e < 0.0) p.q.row(r) = -p.q.row(r);
        break;
      }
    }
  }
  return p;
}

ReducedScenario reduce_switching(const Scenario& sc) {
  sc.validate();
  if (sc.flavor != Flavor::Switching)
    throw std::invalid_argument("reduce_switching: scenario must have switching flavor");
  const Eigen::VectorXd& u1 = sc.pre.u;
  const Eigen::VectorXd& u2 = sc.post.u;
  const double overlap = u1.dot(u2);
  const double theta_reduced = sc.pre.theta * (1.0 - overlap * overlap);
  if (theta_reduced <= 1e-12 * sc.pre.theta)
    throw std::invalid_argument(
        "reduce_switching: u1 = +-u2 leaves no detectable change (reduced theta = 0)");

  ReducedScenario out;
  out.projection = build_projection(u1);
  Eigen::VectorXd u = out.projection.q * u2;
  u /= u.norm();
  out.scenario = Scenario::emerging(
      SpikedModel::noise(sc.dim() - 1, sc.pre.sigma2),
      SpikedModel::spiked(sc.dim() - 1, sc.post.sigma2, theta_reduced, std::move(u)),
      sc.tau);
  return out;
}

StreamSampler::StreamSampler(Scenario sc, std::uint64_t seed)
    : StreamSampler(std::move(sc), make_engine(seed)) {}

StreamSampler::StreamSampler(Scenario sc, std::mt19937_64 engine)
    : sc_(std::move(sc)), eng_(engine), x_(sc_.dim()) {
  sc_.validate();
}

StreamSampler::StreamSampler(SpikedModel model, std::uint64_t seed)
    : StreamSampler(std::move(model), make_engine(seed)) {}

StreamSampler::StreamSampler(SpikedModel model, std::mt19937_64 engine)
    : eng_(engine), x_(model.k) {
  model.validate();
  // Stationary stream: tau = 0 with post = model makes every sample follow
  // `model`.
  SpikedModel pre = model.theta > 0.0 ? SpikedModel::noise(model.k, model.sigma2) : model;
  sc_ = Scenario::emerging(std::move(pre), std::move(model), 0);
}

void StreamSampler::draw(const SpikedModel& m) {
  const double sigma = std::sqrt(m.sigma2);
  for (int i = 0; i < m.k; ++i) x_(i) = sigma * n01_(eng_);
  // x = sigma*z + sqrt(theta)*g*u realizes N(0, sigma2*I + theta*u*u^T)
  // without a per-sample Cholesky.
  if (m.theta > 0.0) x_.noalias() += (std::sqrt(m.theta) * n01_(eng_)) * m.u;
}

const Eigen::VectorXd& StreamSampler::next() {
  ++t_;
  draw(t_ <= sc_.tau ? sc_.pre : sc_.post);
  return x_;
}

std::vector<Eigen::VectorXd> sample_stream(const Scenario& sc, long horizon,
                                           std::uint64_t seed) {
  if (horizon < 1) throw std::invalid_argument("sample_stream: horizon must be >= 1");
  StreamSampler sampler(sc, seed);
  std::vector<Eigen::VectorXd> out;
  out.reserve(static_cast<std::size_t>(horizon));
  for (long t = 0; t < horizon; ++t) out.push_back(sampler.next());
  return out;
}

}  // namespace subcusum
