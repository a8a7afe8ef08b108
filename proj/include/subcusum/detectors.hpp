#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <variant>

#include "subcusum/eigen_window.hpp"
#include "subcusum/model.hpp"

namespace subcusum {

// ---------------------------------------------------------------------------
// CUSUM recursion primitives
// ---------------------------------------------------------------------------

/// Unscaled CUSUM increment for a known spike: (u^T x)^2 - sigma2(1+1/rho)log(1+rho).
double exact_cusum_increment(const Eigen::VectorXd& x, const SpikedModel& model);

/// Full log-likelihood ratio of one observation: the increment above scaled
/// by rho/(2 sigma2 (1+rho)). This is the statistic the exact-CUSUM detector
/// accumulates, so its thresholds live on the log-likelihood scale.
double exact_cusum_loglr(const Eigen::VectorXd& x, const SpikedModel& model);

struct CusumState {
  double s = 0.0;
  long t = 0;
};

/// One CUSUM update: s <- max(s, 0) + increment, t <- t + 1.
CusumState cusum_step(CusumState state, double increment);

// ---------------------------------------------------------------------------
// Online detectors
// ---------------------------------------------------------------------------

/// A completed statistic update for sample index t. Windowed detectors emit
/// the update for sample t only once its w future samples have arrived.
struct StatUpdate {
  long t = 0;
  double statistic = 0.0;
};

struct StoppingReport {
  bool stopped = false;
  long raw_index = 0;       // statistic index at the threshold crossing
  long effective_time = 0;  // raw_index + lookahead; equals samples consumed
  double statistic_at_stop = 0.0;
};

class Detector {
 public:
  virtual ~Detector() = default;
  /// Feed one sample; returns the statistic update it completed, if any.
  virtual std::optional<StatUpdate> step(const Eigen::VectorXd& x) = 0;
  /// Future samples consumed beyond the raw stopping index (w for windowed
  /// detectors, 0 otherwise).
  virtual int lookahead() const = 0;
  virtual int dim() const = 0;
  virtual void reset() = 0;
};

/// Exact CUSUM for a fully known post-change model (oracle detector).
struct ExactCusumConfig {
  SpikedModel post;  // theta > 0
};

/// CUSUM-like recursion on (u_hat^T x)^2 - d where u_hat is the top
/// eigenvector of the scatter over the w samples after the scored one.
/// Keep `eig_opts` converged: the warm start comes from the previous window,
/// which still contains the scored sample, so capping the iterations lets
/// that sample leak into u_hat and biases the pre-change mean of
/// (u_hat^T x)^2 above sigma2.
struct SubspaceCusumConfig {
  int k = 0;
  int w = 0;
  double d = 0.0;
  PowerIterOptions eig_opts{};
};

enum class EigChartMode {
  Windowed,    // lambda_max of the w-sample sliding scatter, scaled by 1/w
  Cumulative,  // lambda_max of the all-samples-so-far scatter, unscaled
};

/// Largest-eigenvalue chart. The windowed mode shares the subspace
/// procedure's forward window and timing; the cumulative mode tracks the
/// growing scatter of everything seen so far and is the baseline used in the
/// procedure comparisons.
struct LargestEigConfig {
  int k = 0;
  int w = 0;  // ignored in cumulative mode
  EigChartMode mode = EigChartMode::Windowed;
  PowerIterOptions eig_opts{};
};

using DetectorConfig = std::variant<ExactCusumConfig, SubspaceCusumConfig, LargestEigConfig>;

std::unique_ptr<Detector> make_detector(const DetectorConfig& config);
std::string detector_id(const DetectorConfig& config);
int detector_lookahead(const DetectorConfig& config);
int detector_dim(const DetectorConfig& config);

class ExactCusumDetector : public Detector {
 public:
  explicit ExactCusumDetector(ExactCusumConfig cfg);
  std::optional<StatUpdate> step(const Eigen::VectorXd& x) override;
  int lookahead() const override { return 0; }
  int dim() const override { return cfg_.post.k; }
  void reset() override { state_ = {}; }

 private:
  ExactCusumConfig cfg_;
  CusumState state_;
};

class SubspaceCusumDetector : public Detector {
 public:
  explicit SubspaceCusumDetector(SubspaceCusumConfig cfg);
  std::optional<StatUpdate> step(const Eigen::VectorXd& x) override;
  int lookahead() const override { return cfg_.w; }
  int dim() const override { return cfg_.k; }
  void reset() override;

 private:
  SubspaceCusumConfig cfg_;
  SlidingWindowCov window_;
  Eigen::VectorXd scored_;  // sample awaiting its completed future window
  Eigen::VectorXd warm_;
  CusumState state_;
};

class LargestEigDetector : public Detector {
 public:
  explicit LargestEigDetector(LargestEigConfig cfg);
  std::optional<StatUpdate> step(const Eigen::VectorXd& x) override;
  int lookahead() const override;
  int dim() const override { return cfg_.k; }
  void reset() override;

 private:
  LargestEigConfig cfg_;
  SlidingWindowCov window_;   // windowed mode
  Eigen::MatrixXd scatter_;   // cumulative mode
  Eigen::VectorXd warm_;
  long t_ = 0;
};

/// Largest-eigenvalue window statistic lambda_max(scatter)/w, computed by a
/// cold-started, fully converged power iteration. Pre-change it concentrates
/// near sigma2 for large w.
double largest_eig_statistic(const SlidingWindowCov& window,
                             const PowerIterOptions& opt = {});

// ---------------------------------------------------------------------------
// Runner
// ---------------------------------------------------------------------------

using TraceSink = std::function<void(const StatUpdate&)>;

/// Feed samples until the statistic reaches b or the horizon is exhausted.
/// effective_time always equals the number of samples consumed; a censored
/// run reports stopped = false with effective_time = horizon.
StoppingReport run_detector(Detector& detector, StreamSampler& sampler, double b,
                            long horizon, const TraceSink& trace = {});
StoppingReport run_detector(Detector& detector, std::span<const Eigen::VectorXd> stream,
                            double b, long horizon = -1, const TraceSink& trace = {});

}  // namespace subcusum
