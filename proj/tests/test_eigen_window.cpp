#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <deque>
#include <random>

#include "subcusum/eigen_window.hpp"
#include "subcusum/model.hpp"

using namespace subcusum;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

VectorXd basis(int k, int i) {
  VectorXd e = VectorXd::Zero(k);
  e(i) = 1.0;
  return e;
}

VectorXd random_vec(int k, std::mt19937_64& eng) {
  std::normal_distribution<double> n01;
  VectorXd v(k);
  for (int i = 0; i < k; ++i) v(i) = n01(eng);
  return v;
}

}  // namespace

TEST_CASE("w identical pushes give scatter w*v*v^T") {
  VectorXd v(3);
  v << 1.0, -2.0, 0.5;
  SlidingWindowCov win(3, 4);
  for (int i = 0; i < 4; ++i) win.push(v);
  CHECK(win.full());
  CHECK((win.scatter() - 4.0 * v * v.transpose()).norm() < 1e-12);
}

TEST_CASE("the ring evicts the oldest sample") {
  SlidingWindowCov win(2, 3);
  win.push(basis(2, 0) * 10.0);  // will be evicted
  win.push(basis(2, 1));
  win.push(basis(2, 1));
  win.push(basis(2, 1));
  MatrixXd expected = MatrixXd::Zero(2, 2);
  expected(1, 1) = 3.0;
  CHECK((win.scatter() - expected).norm() < 1e-12);
  CHECK(win.sample_at(0) == basis(2, 1));
}

TEST_CASE("maintained scatter tracks an independent brute-force sum") {
  // The oracle keeps its own deque; it never calls recompute_scatter().
  const int k = 4, w = 16;
  SlidingWindowCov win(k, w);
  std::deque<VectorXd> oracle;
  std::mt19937_64 eng(31);
  for (int i = 0; i < 1000; ++i) {
    const VectorXd x = random_vec(k, eng);
    win.push(x);
    oracle.push_back(x);
    if (oracle.size() > static_cast<std::size_t>(w)) oracle.pop_front();
    MatrixXd s = MatrixXd::Zero(k, k);
    for (const auto& v : oracle) s.noalias() += v * v.transpose();
    CHECK((win.scatter() - s).norm() < 1e-8);
  }
}

TEST_CASE("push rejects dimension mismatches") {
  SlidingWindowCov win(3, 5);
  CHECK_THROWS_AS(win.push(VectorXd::Zero(4)), std::invalid_argument);
}

TEST_CASE("diagonal scatter yields the dominant axis") {
  SlidingWindowCov win(3, 3);
  win.push(basis(3, 0) * std::sqrt(3.0));
  win.push(basis(3, 1));
  win.push(basis(3, 2));
  const auto est = top_eigenvector(win);
  CHECK(est.converged);
  CHECK(est.lambda_hat == doctest::Approx(3.0).epsilon(1e-8));
  CHECK(std::abs(est.u_hat.dot(basis(3, 0))) == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("rank-one scatter reproduces the generating vector") {
  VectorXd v(2);
  v << 3.0, 4.0;
  SlidingWindowCov win(2, 1);
  win.push(v);
  const auto est = top_eigenvector(win);
  CHECK(est.converged);
  CHECK(est.lambda_hat == doctest::Approx(25.0).epsilon(1e-10));
  CHECK(est.u_hat(0) == doctest::Approx(0.6).epsilon(1e-10));
  CHECK(est.u_hat(1) == doctest::Approx(0.8).epsilon(1e-10));
}

TEST_CASE("power iteration matches a dense eigensolver on random windows") {
  std::mt19937_64 eng(77);
  for (int rep = 0; rep < 20; ++rep) {
    const int k = 5, w = 50;
    SlidingWindowCov win(k, w);
    for (int i = 0; i < w; ++i) win.push(random_vec(k, eng));
    const auto est = top_eigenvector(win);
    REQUIRE(est.converged);

    Eigen::SelfAdjointEigenSolver<MatrixXd> es(win.scatter());
    const double lambda_max = es.eigenvalues()(k - 1);
    const VectorXd u_oracle = es.eigenvectors().col(k - 1);
    CHECK(std::abs(est.lambda_hat - lambda_max) <= 1e-8 * lambda_max);
    CHECK(std::abs(est.u_hat.dot(u_oracle)) >= 1.0 - 1e-8);
  }
}

TEST_CASE("top_eigenvector requires a full window") {
  SlidingWindowCov win(3, 5);
  win.push(basis(3, 0));
  CHECK_THROWS_AS(top_eigenvector(win), std::invalid_argument);
}

TEST_CASE("iteration cap returns the best iterate unconverged") {
  SlidingWindowCov win(3, 3);
  // Two nearly equal leading eigenvalues force slow convergence.
  win.push(basis(3, 0));
  win.push(basis(3, 1) * std::sqrt(1.0 - 1e-12));
  win.push(basis(3, 2) * 0.1);
  PowerIterOptions opt;
  opt.max_iter = 1;
  VectorXd start = VectorXd::Constant(3, 1.0).normalized();
  const auto est = power_iteration(win.scatter(), start, opt);
  CHECK_FALSE(est.converged);
  CHECK(est.u_hat.norm() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(est.iterations == 1);
}

TEST_CASE("statistics are invariant to the eigenvector sign") {
  std::mt19937_64 eng(123);
  SlidingWindowCov win(4, 10);
  for (int i = 0; i < 10; ++i) win.push(random_vec(4, eng));
  const auto est = top_eigenvector(win);
  const VectorXd x = random_vec(4, eng);
  const double a = est.u_hat.dot(x);
  const double b = (-est.u_hat).dot(x);
  CHECK(a * a == b * b);  // exact

  // Sign convention: the largest-magnitude entry is positive.
  int imax = 0;
  est.u_hat.cwiseAbs().maxCoeff(&imax);
  CHECK(est.u_hat(imax) > 0.0);
}

TEST_CASE("isotropic scatter returns the deterministic start direction") {
  const int k = 4;
  SlidingWindowCov win(k, k);
  for (int i = 0; i < k; ++i) win.push(basis(k, i) * 2.0);  // scatter = 4*I
  const auto a = top_eigenvector(win);
  const auto b = top_eigenvector(win);
  CHECK(a.converged);
  CHECK(a.lambda_hat == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(a.u_hat == b.u_hat);  // determinism is the contract here
  const double overlap = std::abs(a.u_hat.dot(power_iteration_start(k)));
  CHECK(overlap == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("warm and cold starts agree on well-separated spectra") {
  std::mt19937_64 eng(9);
  const int k = 5, w = 60;
  const auto model = SpikedModel::spiked(k, 1.0, 4.0, basis(k, 0));
  StreamSampler sampler(model, 1234);
  SlidingWindowCov win(k, w);
  for (int i = 0; i < w; ++i) win.push(sampler.next());
  const auto cold = top_eigenvector(win);
  REQUIRE(cold.converged);
  // Spectral gap sanity for the premise of the check.
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(win.scatter());
  REQUIRE(es.eigenvalues()(k - 1) - es.eigenvalues()(k - 2) >=
          0.1 * es.eigenvalues()(k - 1));
  const VectorXd warm_start = random_vec(k, eng).normalized();
  const auto warm = top_eigenvector(win, warm_start);
  REQUIRE(warm.converged);
  CHECK(std::abs(warm.u_hat.dot(cold.u_hat)) >= 1.0 - 1e-6);
}

TEST_CASE("error covariance formula and preconditions") {
  SUBCASE("direct substitution at k=2") {
    const auto m = SpikedModel::spiked(2, 1.0, 1.0, basis(2, 0));
    const MatrixXd c = eigenvector_error_cov(m, 100);
    CHECK(c(0, 0) == doctest::Approx(0.0));
    CHECK(c(1, 1) == doctest::Approx(0.02).epsilon(1e-12));
    CHECK(c(0, 1) == doctest::Approx(0.0));
  }
  SUBCASE("annihilates the spike direction") {
    VectorXd u(3);
    u << 2.0, 1.0, -1.0;
    u.normalize();
    const auto m = SpikedModel::spiked(3, 2.0, 1.0, u);
    const MatrixXd c = eigenvector_error_cov(m, 400);
    CHECK((c * u).cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("rejects windows below the validity bound") {
    const auto m = SpikedModel::spiked(5, 1.0, 1.0, basis(5, 0));
    CHECK_THROWS_AS(eigenvector_error_cov(m, 8), std::invalid_argument);
    CHECK_THROWS_AS(eigenvector_error_cov(SpikedModel::noise(5, 1.0), 100),
                    std::invalid_argument);
  }
}

TEST_CASE("unnormalized eigenvector fluctuations follow the predicted covariance") {
  // Lighter version of the acceptance check: 2000 fresh windows at w = 500.
  const int k = 5, w = 500, n_windows = 2000;
  const auto model = SpikedModel::spiked(k, 1.0, 1.0, basis(k, 0));
  const MatrixXd target = eigenvector_error_cov(model, w) * w;  // cov of sqrt(w)(omega-u)

  StreamSampler sampler(model, 20240817);
  SlidingWindowCov win(k, w);
  MatrixXd acc = MatrixXd::Zero(k, k);
  for (int rep = 0; rep < n_windows; ++rep) {
    win.reset();
    for (int i = 0; i < w; ++i) win.push(sampler.next());
    const auto est = top_eigenvector(win);
    REQUIRE(est.converged);
    // omega is the eigenvector scaled to unit projection on u, so the error
    // omega - u lies in the complement of u.
    const double align = est.u_hat.dot(model.u);
    REQUIRE(std::abs(align) > 0.5);
    const VectorXd v = est.u_hat / align - model.u;
    acc.noalias() += static_cast<double>(w) * v * v.transpose();
  }
  acc /= static_cast<double>(n_windows);
  CHECK((acc - target).norm() / target.norm() < 0.15);
}
