#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "subcusum/detectors.hpp"
#include "subcusum/model.hpp"
#include "subcusum/tuning.hpp"

using namespace subcusum;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

VectorXd basis(int k, int i) {
  VectorXd e = VectorXd::Zero(k);
  e(i) = 1.0;
  return e;
}

SpikedModel spiked_e1(int k, double sigma2, double theta) {
  return SpikedModel::spiked(k, sigma2, theta, basis(k, 0));
}

}  // namespace

TEST_CASE("exact CUSUM increment values") {
  const auto m = spiked_e1(3, 1.0, 1.0);
  SUBCASE("orthogonal observation hits the pure drift") {
    const double inc = exact_cusum_increment(basis(3, 1), m);
    CHECK(inc == doctest::Approx(-2.0 * std::log(2.0)).epsilon(1e-12));
    CHECK(inc == doctest::Approx(-1.386294).epsilon(1e-6));
  }
  SUBCASE("drift cancellation zeroes the increment") {
    const double c = std::sqrt(2.0 * std::log(2.0));
    const double inc = exact_cusum_increment(c * basis(3, 0), m);
    CHECK(std::abs(inc) < 1e-12);
  }
  SUBCASE("post-change mean matches the spiked second moment") {
    StreamSampler sampler(m, 101);
    double sum = 0.0;
    const long n = 1000000;
    for (long i = 0; i < n; ++i) sum += exact_cusum_increment(sampler.next(), m);
    const double expected = 2.0 - 2.0 * std::log(2.0);  // sigma2(1+rho) - drift
    CHECK(expected == doctest::Approx(0.613706).epsilon(1e-6));
    CHECK(std::abs(sum / n - expected) < 0.01 * expected);
  }
  SUBCASE("rejects rho = 0 and dimension mismatches") {
    CHECK_THROWS_AS(exact_cusum_increment(basis(3, 0), SpikedModel::noise(3, 1.0)),
                    std::invalid_argument);
    CHECK_THROWS_AS(exact_cusum_increment(basis(4, 0), m), std::invalid_argument);
  }
}

TEST_CASE("log-likelihood ratio scaling") {
  const auto m = spiked_e1(3, 1.0, 1.0);
  SUBCASE("scaling preserves zero") {
    const double c = std::sqrt(2.0 * std::log(2.0));
    CHECK(std::abs(exact_cusum_loglr(c * basis(3, 0), m)) < 1e-12);
  }
  SUBCASE("argmax over a batch coincides with the unscaled increment") {
    StreamSampler sampler(m, 5);
    std::vector<VectorXd> batch;
    for (int i = 0; i < 200; ++i) batch.push_back(sampler.next());
    std::size_t arg_inc = 0, arg_llr = 0;
    for (std::size_t i = 1; i < batch.size(); ++i) {
      if (exact_cusum_increment(batch[i], m) > exact_cusum_increment(batch[arg_inc], m))
        arg_inc = i;
      if (exact_cusum_loglr(batch[i], m) > exact_cusum_loglr(batch[arg_llr], m))
        arg_llr = i;
    }
    CHECK(arg_inc == arg_llr);
  }
  SUBCASE("post-change mean recovers the KL number at several SNRs") {
    for (const double rho : {0.5, 1.0, 2.0}) {
      const auto model = spiked_e1(4, 1.0, rho);
      StreamSampler sampler(model, 7);
      double sum = 0.0;
      const long n = 1000000;
      for (long i = 0; i < n; ++i) sum += exact_cusum_loglr(sampler.next(), model);
      CHECK(std::abs(sum / n - kl_number(rho)) < 0.02 * kl_number(rho));
    }
  }
}

TEST_CASE("CUSUM recursion arithmetic") {
  CusumState st;
  st.s = -0.5;
  st = cusum_step(st, 0.2);
  CHECK(st.s == doctest::Approx(0.2).epsilon(1e-15));  // clamp then add
  CHECK(st.t == 1);
  st.s = 1.0;
  st = cusum_step(st, -3.0);
  CHECK(st.s == doctest::Approx(-2.0).epsilon(1e-15));  // clamp applies to previous only
  CHECK_THROWS_AS(cusum_step(st, std::nan("")), std::invalid_argument);

  // s_t >= increment_t along any trajectory.
  std::mt19937_64 eng(3);
  std::normal_distribution<double> n01;
  CusumState s;
  for (int i = 0; i < 1000; ++i) {
    const double inc = n01(eng);
    s = cusum_step(s, inc);
    CHECK(s.s >= inc);
  }
}

TEST_CASE("increment signs straddle zero across the change") {
  // Exact CUSUM increment: negative mean pre-change, positive post-change.
  for (const double rho : {0.5, 1.0, 2.0}) {
    const auto model = spiked_e1(4, 1.0, rho);
    const auto noise = SpikedModel::noise(4, 1.0);
    double pre = 0.0, post = 0.0;
    StreamSampler pre_s(noise, 11), post_s(model, 12);
    const long n = 200000;
    for (long i = 0; i < n; ++i) {
      pre += exact_cusum_increment(pre_s.next(), model);
      post += exact_cusum_increment(post_s.next(), model);
    }
    CHECK(pre / n < 0.0);
    CHECK(post / n > 0.0);
  }
}

TEST_CASE("subspace increment signs with an in-interval drift") {
  const int k = 5, w = 200;
  const long updates = 100000;
  const double rho = 1.0;
  const auto model = spiked_e1(k, 1.0, rho);
  const auto noise = SpikedModel::noise(k, 1.0);
  const double d = optimal_drift(k, rho, 1.0, w);

  const auto mean_increment = [&](const SpikedModel& law, std::uint64_t seed) {
    StreamSampler sampler(law, seed);
    SubspaceCusumDetector det(SubspaceCusumConfig{k, w, d});
    double mean = 0.0;
    long n = 0;
    double prev = 0.0;
    while (n < updates) {
      if (auto upd = det.step(sampler.next())) {
        // Recover the raw increment from the clamped recursion.
        mean += upd->statistic - std::max(prev, 0.0);
        prev = upd->statistic;
        ++n;
      }
    }
    return mean / updates;
  };

  CHECK(mean_increment(noise, 21) < 0.0);
  CHECK(mean_increment(model, 22) > 0.0);
}

TEST_CASE("warm-up emits no updates and cannot stop") {
  const int k = 4, w = 6;
  SubspaceCusumDetector det(SubspaceCusumConfig{k, w, 0.5});
  std::mt19937_64 eng(8);
  std::normal_distribution<double> n01;
  for (int i = 0; i < w; ++i) {
    VectorXd x(k);
    for (int j = 0; j < k; ++j) x(j) = n01(eng);
    CHECK_FALSE(det.step(x).has_value());
  }
  VectorXd x(k);
  for (int j = 0; j < k; ++j) x(j) = n01(eng);
  const auto upd = det.step(x);
  REQUIRE(upd.has_value());
  CHECK(upd->t == 1);
}

TEST_CASE("a forced rank-one window reproduces the plain recursion exactly") {
  // Every sample is a multiple of e1, so the window eigenvector is e1
  // exactly and the subspace statistic must equal the scripted recursion on
  // (e1^T x)^2 - d, bit for bit.
  const int k = 3, w = 5;
  const double d = 1.1;
  std::mt19937_64 eng(17);
  std::uniform_real_distribution<double> mag(0.5, 2.0);
  std::vector<double> c;
  for (int i = 0; i < 200; ++i) c.push_back(mag(eng));

  SubspaceCusumDetector det(SubspaceCusumConfig{k, w, d});
  CusumState script;
  for (int n = 0; n < 200; ++n) {
    const auto upd = det.step(c[static_cast<std::size_t>(n)] * basis(k, 0));
    if (n < w) {
      CHECK_FALSE(upd.has_value());
      continue;
    }
    const long t = n - w;  // scored sample index (0-based)
    const double ct = c[static_cast<std::size_t>(t)];
    script = cusum_step(script, ct * ct - d);
    REQUIRE(upd.has_value());
    CHECK(upd->t == script.t);
    CHECK(upd->statistic == script.s);  // exact
  }
}

TEST_CASE("a matched drift freezes the statistic at zero") {
  const int k = 2, w = 3;
  const double d = 4.0;  // samples 2*e1 give (u^T x)^2 = 4 exactly
  SubspaceCusumDetector det(SubspaceCusumConfig{k, w, d});
  for (int n = 0; n < 50; ++n) {
    const auto upd = det.step(2.0 * basis(k, 0));
    if (upd) CHECK(upd->statistic == 0.0);
  }
}

TEST_CASE("stopping rule semantics") {
  const auto m = spiked_e1(3, 1.0, 1.0);
  SUBCASE("threshold zero stops at the first nonnegative increment") {
    StreamSampler sampler(m, 33);
    ExactCusumDetector det(ExactCusumConfig{m});
    const StoppingReport r = run_detector(det, sampler, 0.0, 100000);
    REQUIRE(r.stopped);
    CHECK(r.raw_index >= 1);
    CHECK(r.effective_time == r.raw_index);
    CHECK(r.statistic_at_stop >= 0.0);
  }
  SUBCASE("identical stream and threshold reproduce the report") {
    const Scenario sc = Scenario::emerging(SpikedModel::noise(3, 1.0), m, 0);
    const auto stream = sample_stream(sc, 5000, 44);
    ExactCusumDetector det(ExactCusumConfig{m});
    const StoppingReport a = run_detector(det, std::span<const VectorXd>(stream), 5.0);
    det.reset();
    const StoppingReport b = run_detector(det, std::span<const VectorXd>(stream), 5.0);
    CHECK(a.stopped == b.stopped);
    CHECK(a.raw_index == b.raw_index);
    CHECK(a.effective_time == b.effective_time);
    CHECK(a.statistic_at_stop == b.statistic_at_stop);
  }
  SUBCASE("censoring reports the consumed horizon") {
    StreamSampler sampler(SpikedModel::noise(3, 1.0), 55);
    ExactCusumDetector det(ExactCusumConfig{m});
    const StoppingReport r = run_detector(det, sampler, 1e9, 500);
    CHECK_FALSE(r.stopped);
    CHECK(r.effective_time == 500);
    CHECK(r.raw_index == 500);  // updates completed
  }
  SUBCASE("windowed detectors report raw + w") {
    SubspaceCusumDetector det(SubspaceCusumConfig{2, 3, 0.0});
    std::vector<VectorXd> stream(10, 2.0 * basis(2, 0));
    const StoppingReport r = run_detector(det, std::span<const VectorXd>(stream), 1.0);
    REQUIRE(r.stopped);
    CHECK(r.raw_index == 1);       // first update crosses: increment 4 - 0
    CHECK(r.effective_time == 4);  // consumed w+1 samples
  }
}

TEST_CASE("delay of the exact CUSUM follows the first-order law") {
  const auto m = spiked_e1(5, 1.0, 1.0);
  const double b = 20.0;
  const long reps = 2000;
  double sum = 0.0;
  ExactCusumDetector det(ExactCusumConfig{m});
  for (long rep = 0; rep < reps; ++rep) {
    det.reset();
    StreamSampler sampler(m, make_engine(4242, 0, static_cast<std::uint64_t>(rep)));
    const StoppingReport r = run_detector(det, sampler, b, 100000);
    REQUIRE(r.stopped);
    sum += static_cast<double>(r.raw_index);
  }
  const double expected = b / kl_number(1.0);  // 130.36
  CHECK(expected == doctest::Approx(130.36).epsilon(1e-3));
  CHECK(std::abs(sum / reps - expected) < 0.10 * expected);
}

TEST_CASE("raw stopping index is pathwise nondecreasing in the threshold") {
  const auto m = spiked_e1(4, 1.0, 1.0);
  const Scenario sc = Scenario::emerging(SpikedModel::noise(4, 1.0), m, 0);
  const auto stream = sample_stream(sc, 4000, 99);

  ExactCusumDetector exact(ExactCusumConfig{m});
  SubspaceCusumDetector sub(SubspaceCusumConfig{4, 10, optimal_drift(4, 1.0, 1.0, 10)});
  for (Detector* det : {static_cast<Detector*>(&exact), static_cast<Detector*>(&sub)}) {
    long prev_raw = 0;
    for (const double b : {0.5, 1.0, 2.0, 4.0, 8.0}) {
      det->reset();
      const StoppingReport r = run_detector(*det, std::span<const VectorXd>(stream), b);
      if (!r.stopped) break;  // larger b will not stop either
      CHECK(r.raw_index >= prev_raw);
      prev_raw = r.raw_index;
    }
  }
}

TEST_CASE("largest-eigenvalue window statistic") {
  SUBCASE("rank-one window of unit vectors scores 1") {
    SlidingWindowCov win(3, 7);
    for (int i = 0; i < 7; ++i) win.push(basis(3, 0));
    CHECK(largest_eig_statistic(win) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("requires a full window") {
    SlidingWindowCov win(3, 7);
    win.push(basis(3, 0));
    CHECK_THROWS_AS(largest_eig_statistic(win), std::invalid_argument);
  }
  SUBCASE("matches the dense eigensolver on random windows") {
    StreamSampler sampler(SpikedModel::noise(5, 1.3), 61);
    SlidingWindowCov win(5, 40);
    for (int i = 0; i < 40; ++i) win.push(sampler.next());
    for (int rep = 0; rep < 10; ++rep) {
      win.push(sampler.next());
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(win.scatter());
      const double oracle = es.eigenvalues()(4) / 40.0;
      CHECK(largest_eig_statistic(win) == doctest::Approx(oracle).epsilon(1e-8));
    }
  }
  SUBCASE("noise bias sits above sigma2 and shrinks with the window") {
    const auto mean_stat = [](int w) {
      StreamSampler sampler(SpikedModel::noise(5, 1.0), 71);
      SlidingWindowCov win(5, w);
      double sum = 0.0;
      const int n_windows = 1000;
      for (int i = 0; i < n_windows; ++i) {
        win.reset();
        for (int j = 0; j < w; ++j) win.push(sampler.next());
        sum += largest_eig_statistic(win);
      }
      return sum / n_windows;
    };
    const double m200 = mean_stat(200);
    CHECK(m200 > 1.0);
    CHECK(m200 < 1.5);
    CHECK(mean_stat(800) < m200);
  }
}

TEST_CASE("windowed eigenvalue chart timing matches the subspace chart") {
  LargestEigDetector det(LargestEigConfig{2, 4, EigChartMode::Windowed});
  CHECK(det.lookahead() == 4);
  for (int i = 0; i < 4; ++i) CHECK_FALSE(det.step(basis(2, 0)).has_value());
  const auto upd = det.step(basis(2, 0));
  REQUIRE(upd.has_value());
  CHECK(upd->t == 1);
  CHECK(upd->statistic == doctest::Approx(1.0).epsilon(1e-10));  // lambda_max/w = 4/4
}

TEST_CASE("cumulative eigenvalue chart grows monotonically") {
  LargestEigDetector det(LargestEigConfig{3, 0, EigChartMode::Cumulative});
  CHECK(det.lookahead() == 0);
  StreamSampler sampler(SpikedModel::noise(3, 1.0), 81);
  double prev = 0.0;
  for (int i = 1; i <= 200; ++i) {
    const auto upd = det.step(sampler.next());
    REQUIRE(upd.has_value());
    CHECK(upd->t == i);
    CHECK(upd->statistic >= prev - 1e-9);  // PSD rank-one additions
    prev = upd->statistic;
  }
  // Effective time equals the raw index: no future data is used.
  det.reset();
  StreamSampler fresh(SpikedModel::noise(3, 1.0), 81);
  const StoppingReport r = run_detector(det, fresh, 50.0, 10000);
  REQUIRE(r.stopped);
  CHECK(r.effective_time == r.raw_index);
}

TEST_CASE("eigenvector from the future window is independent of the scored sample") {
  // Sample correlation between (u_hat^T x_t)^2 and the next sample's squared
  // norm under pre-change; independence makes it vanish.
  const int k = 5, w = 20;
  const long updates = 100000;
  StreamSampler sampler(SpikedModel::noise(k, 1.0), 91);
  SlidingWindowCov win(k, w);
  VectorXd scored(k);
  VectorXd warm = power_iteration_start(k);
  std::vector<double> a, bvals;
  a.reserve(updates);
  bvals.reserve(updates);
  while (static_cast<long>(a.size()) < updates) {
    const VectorXd& x = sampler.next();
    const bool ready = win.full();
    if (ready) win.copy_sample(0, scored);
    win.push(x);
    if (!ready) continue;
    const auto est = top_eigenvector(win, warm);
    warm = est.u_hat;
    const double q = est.u_hat.dot(scored);
    a.push_back(q * q);
    bvals.push_back(win.sample_at(0).squaredNorm());  // first future sample
  }
  double ma = 0.0, mb = 0.0;
  for (long i = 0; i < updates; ++i) {
    ma += a[static_cast<std::size_t>(i)];
    mb += bvals[static_cast<std::size_t>(i)];
  }
  ma /= updates;
  mb /= updates;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (long i = 0; i < updates; ++i) {
    const double da = a[static_cast<std::size_t>(i)] - ma;
    const double db = bvals[static_cast<std::size_t>(i)] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  const double corr = sab / std::sqrt(saa * sbb);
  CHECK(std::abs(corr) < 0.02);
}

TEST_CASE("pre-change mean of the scored projection is unbiased") {
  // d = 0 makes the statistic a plain running sum of (u_hat^T x)^2, so its
  // final value divided by the update count is the empirical mean. A capped
  // warm-started iteration would leak the scored sample into u_hat and push
  // this a few percent above sigma2.
  const int k = 5, w = 20;
  const long updates = 20000;
  StreamSampler sampler(SpikedModel::noise(k, 1.0), 137);
  SubspaceCusumDetector det(SubspaceCusumConfig{k, w, 0.0});
  double last = 0.0;
  long n = 0;
  while (n < updates) {
    if (auto upd = det.step(sampler.next())) {
      last = upd->statistic;
      ++n;
    }
  }
  CHECK(std::abs(last / updates - 1.0) < 0.02);
}

TEST_CASE("detector factory round-trips identifiers and lookahead") {
  const auto m = spiked_e1(4, 1.0, 1.0);
  const DetectorConfig exact = ExactCusumConfig{m};
  const DetectorConfig sub = SubspaceCusumConfig{4, 12, 1.2};
  const DetectorConfig eig_w = LargestEigConfig{4, 12, EigChartMode::Windowed};
  const DetectorConfig eig_c = LargestEigConfig{4, 0, EigChartMode::Cumulative};
  CHECK(detector_id(exact) == "exact_cusum");
  CHECK(detector_id(sub) == "subspace_cusum");
  CHECK(detector_id(eig_w) == "largest_eig_windowed");
  CHECK(detector_id(eig_c) == "largest_eig");
  CHECK(detector_lookahead(exact) == 0);
  CHECK(detector_lookahead(sub) == 12);
  CHECK(detector_lookahead(eig_w) == 12);
  CHECK(detector_lookahead(eig_c) == 0);
  for (const auto* cfg : {&exact, &sub, &eig_w, &eig_c}) {
    const auto det = make_detector(*cfg);
    CHECK(det->dim() == 4);
    CHECK(det->lookahead() == detector_lookahead(*cfg));
  }
}
