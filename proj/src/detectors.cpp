#include "subcusum/detectors.hpp"

#include <cmath>
#include <stdexcept>

namespace subcusum {

double exact_cusum_increment(const Eigen::VectorXd& x, const SpikedModel& model) {
  if (!(model.theta > 0.0))
    throw std::invalid_argument("exact_cusum_increment: requires rho > 0");
  if (x.size() != model.k)
    throw std::invalid_argument("exact_cusum_increment: dimension mismatch");
  const double rho = model.rho();
  const double q = model.u.dot(x);
  return q * q - model.sigma2 * (1.0 + 1.0 / rho) * std::log1p(rho);
}

double exact_cusum_loglr(const Eigen::VectorXd& x, const SpikedModel& model) {
  const double rho = model.rho();
  const double scale = rho / (2.0 * model.sigma2 * (1.0 + rho));
  return scale * exact_cusum_increment(x, model);
}

CusumState cusum_step(CusumState state, double increment) {
  if (!std::isfinite(increment))
    throw std::invalid_argument("cusum_step: increment must be finite");
  state.s = std::max(state.s, 0.0) + increment;
  state.t += 1;
  return state;
}

// ---------------------------------------------------------------------------

ExactCusumDetector::ExactCusumDetector(ExactCusumConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.post.validate();
  if (!(cfg_.post.theta > 0.0))
    throw std::invalid_argument("ExactCusumDetector: post-change model needs theta > 0");
}

std::optional<StatUpdate> ExactCusumDetector::step(const Eigen::VectorXd& x) {
  state_ = cusum_step(state_, exact_cusum_loglr(x, cfg_.post));
  return StatUpdate{state_.t, state_.s};
}

// ---------------------------------------------------------------------------

SubspaceCusumDetector::SubspaceCusumDetector(SubspaceCusumConfig cfg)
    : cfg_(cfg), window_(cfg.k, cfg.w), warm_(power_iteration_start(cfg.k)) {
  if (cfg.k < 1 || cfg.w < 1)
    throw std::invalid_argument("SubspaceCusumDetector: need k >= 1 and w >= 1");
  if (!std::isfinite(cfg.d))
    throw std::invalid_argument("SubspaceCusumDetector: drift must be finite");
}

void SubspaceCusumDetector::reset() {
  window_.reset();
  warm_ = power_iteration_start(cfg_.k);
  state_ = {};
}

std::optional<StatUpdate> SubspaceCusumDetector::step(const Eigen::VectorXd& x) {
  if (x.size() != cfg_.k)
    throw std::invalid_argument("SubspaceCusumDetector::step: dimension mismatch");
  // Sample t leaves the window exactly when sample t+w arrives; grab it
  // before the push overwrites its slot, then score it against the
  // eigenvector of the refreshed window (samples t+1 .. t+w).
  const bool ready = window_.full();
  if (ready) window_.copy_sample(0, scored_);
  window_.push(x);
  if (!ready) return std::nullopt;

  TopEigenEstimate est = top_eigenvector(window_, warm_, cfg_.eig_opts);
  warm_ = est.u_hat;
  const double q = est.u_hat.dot(scored_);
  state_ = cusum_step(state_, q * q - cfg_.d);
  return StatUpdate{state_.t, state_.s};
}

// ---------------------------------------------------------------------------

LargestEigDetector::LargestEigDetector(LargestEigConfig cfg)
    : cfg_(cfg),
      window_(cfg.k, cfg.mode == EigChartMode::Windowed ? cfg.w : 1),
      warm_(power_iteration_start(cfg.k)) {
  if (cfg.k < 1) throw std::invalid_argument("LargestEigDetector: need k >= 1");
  if (cfg.mode == EigChartMode::Windowed && cfg.w < 1)
    throw std::invalid_argument("LargestEigDetector: windowed mode needs w >= 1");
  if (cfg.mode == EigChartMode::Cumulative)
    scatter_ = Eigen::MatrixXd::Zero(cfg.k, cfg.k);
}

int LargestEigDetector::lookahead() const {
  return cfg_.mode == EigChartMode::Windowed ? cfg_.w : 0;
}

void LargestEigDetector::reset() {
  window_.reset();
  if (cfg_.mode == EigChartMode::Cumulative) scatter_.setZero();
  warm_ = power_iteration_start(cfg_.k);
  t_ = 0;
}

std::optional<StatUpdate> LargestEigDetector::step(const Eigen::VectorXd& x) {
  if (x.size() != cfg_.k)
    throw std::invalid_argument("LargestEigDetector::step: dimension mismatch");
  if (cfg_.mode == EigChartMode::Cumulative) {
    scatter_.noalias() += x * x.transpose();
    TopEigenEstimate est = power_iteration(scatter_, warm_, cfg_.eig_opts);
    warm_ = est.u_hat;
    ++t_;
    return StatUpdate{t_, est.lambda_hat};
  }
  const bool ready = window_.full();
  window_.push(x);
  if (!ready) return std::nullopt;
  TopEigenEstimate est = top_eigenvector(window_, warm_, cfg_.eig_opts);
  warm_ = est.u_hat;
  ++t_;
  return StatUpdate{t_, est.lambda_hat / cfg_.w};
}

double largest_eig_statistic(const SlidingWindowCov& window, const PowerIterOptions& opt) {
  return top_eigenvector(window, opt).lambda_hat / window.window();
}

// ---------------------------------------------------------------------------

std::unique_ptr<Detector> make_detector(const DetectorConfig& config) {
  return std::visit(
      [](const auto& cfg) -> std::unique_ptr<Detector> {
        using T = std::decay_t<decltype(cfg)>;
        if constexpr (std::is_same_v<T, ExactCusumConfig>)
          return std::make_unique<ExactCusumDetector>(cfg);
        else if constexpr (std::is_same_v<T, SubspaceCusumConfig>)
          return std::make_unique<SubspaceCusumDetector>(cfg);
        else
          return std::make_unique<LargestEigDetector>(cfg);
      },
      config);
}

std::string detector_id(const DetectorConfig& config) {
  if (std::holds_alternative<ExactCusumConfig>(config)) return "exact_cusum";
  if (std::holds_alternative<SubspaceCusumConfig>(config)) return "subspace_cusum";
  const auto& eig = std::get<LargestEigConfig>(config);
  return eig.mode == EigChartMode::Cumulative ? "largest_eig" : "largest_eig_windowed";
}

int detector_lookahead(const DetectorConfig& config) {
  if (std::holds_alternative<SubspaceCusumConfig>(config))
    return std::get<SubspaceCusumConfig>(config).w;
  if (const auto* eig = std::get_if<LargestEigConfig>(&config))
    return eig->mode == EigChartMode::Windowed ? eig->w : 0;
  return 0;
}

int detector_dim(const DetectorConfig& config) {
  return std::visit(
      [](const auto& cfg) {
        using T = std::decay_t<decltype(cfg)>;
        if constexpr (std::is_same_v<T, ExactCusumConfig>)
          return cfg.post.k;
        else
          return cfg.k;
      },
      config);
}

// ---------------------------------------------------------------------------

namespace {

template <typename NextFn>
StoppingReport run_impl(Detector& det, NextFn&& next, long horizon, double b,
                        const TraceSink& trace) {
  if (horizon < 1) throw std::invalid_argument("run_detector: horizon must be >= 1");
  StoppingReport report;
  long consumed = 0;
  long updates = 0;
  double last_stat = 0.0;
  while (consumed < horizon) {
    const Eigen::VectorXd* x = next();
    if (x == nullptr) break;  // stream exhausted early
    ++consumed;
    if (auto upd = det.step(*x)) {
      ++updates;
      last_stat = upd->statistic;
      if (trace) trace(*upd);
      if (upd->statistic >= b) {
        report.stopped = true;
        report.raw_index = upd->t;
        report.effective_time = upd->t + det.lookahead();
        report.statistic_at_stop = upd->statistic;
        return report;
      }
    }
  }
  report.stopped = false;
  report.raw_index = updates;
  report.effective_time = consumed;
  report.statistic_at_stop = last_stat;
  return report;
}

}  // namespace

StoppingReport run_detector(Detector& detector, StreamSampler& sampler, double b,
                            long horizon, const TraceSink& trace) {
  if (sampler.dim() != detector.dim())
    throw std::invalid_argument("run_detector: sampler/detector dimension mismatch");
  return run_impl(
      detector, [&]() { return &sampler.next(); }, horizon, b, trace);
}

StoppingReport run_detector(Detector& detector, std::span<const Eigen::VectorXd> stream,
                            double b, long horizon, const TraceSink& trace) {
  const long n = static_cast<long>(stream.size());
  if (horizon < 0 || horizon > n) horizon = n;
  std::size_t i = 0;
  return run_impl(
      detector,
      [&]() -> const Eigen::VectorXd* {
        return i < stream.size() ? &stream[i++] : nullptr;
      },
      horizon, b, trace);
}

}  // namespace subcusum
