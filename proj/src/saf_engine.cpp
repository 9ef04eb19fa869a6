#include "saf_engine.hpp"

#include <cmath>
#include <string>

#include "errors.hpp"

namespace pnsaf {

SafEngine::SafEngine(SafConfig config, const AnalysisBank& bank)
    : config_(std::move(config)),
      analysis_(bank, config_.filter_length) {
  require(config_.filter_length > 0, Status::invalid_argument,
          "filter_length must be positive");
  require(config_.num_subbands >= 1 && config_.num_subbands <= 64,
          Status::invalid_argument, "num_subbands must be in [1, 64]");
  require(config_.num_subbands == bank.num_subbands(),
          Status::invalid_argument,
          "engine subband count does not match the analysis bank");
  require(config_.delta >= 0.0 && std::isfinite(config_.delta),
          Status::invalid_argument, "delta must be nonnegative");
  require(config_.adaptation_delay_ticks >= 0, Status::invalid_argument,
          "adaptation delay cannot be negative");
  if (config_.step_controller.kind() != StepController::Kind::fixed) {
    require(config_.step_controller.num_subbands() == config_.num_subbands,
            Status::invalid_argument,
            "step controller subband count does not match the engine");
  }

  weights_.assign(config_.filter_length, 0.0);
  errors_.assign(config_.num_subbands, 0.0);
  steps_.assign(config_.num_subbands, 0.0);
  outputs_.assign(config_.num_subbands, 0.0);
  coeffs_.assign(config_.num_subbands, 0.0);
  gains_.assign(config_.filter_length, 1.0);
}

const SubbandFrame& SafEngine::analyze(std::span<const double> input,
                                       std::span<const double> desired) {
  analysis_.analyze_step(input, desired, frame_);
  return frame_;
}

void SafEngine::subband_errors(const SubbandFrame& frame,
                               std::span<double> errors_out) {
  const int n = config_.num_subbands;
  const int m = config_.filter_length;
  require(static_cast<int>(errors_out.size()) == n, Status::invalid_argument,
          "error output size mismatch");
  require(static_cast<int>(frame.regressors.size()) == n,
          Status::invalid_argument, "frame subband count mismatch");
  for (int i = 0; i < n; ++i) {
    const auto& u = frame.regressors[i];
    require(static_cast<int>(u.size()) == m, Status::invalid_argument,
            "regressor length mismatch");
    double y = 0.0;
    for (int j = 0; j < m; ++j) y += u[j] * weights_[j];
    outputs_[i] = y;
    errors_[i] = frame.desired[i] - y;
    errors_out[i] = errors_[i];
  }
}

void SafEngine::update_weights(const SubbandFrame& frame,
                               std::span<const double> gains,
                               std::span<const double> steps) {
  const int n = config_.num_subbands;
  const int m = config_.filter_length;
  require(static_cast<int>(gains.size()) == m &&
              static_cast<int>(steps.size()) == n,
          Status::invalid_argument, "gain or step size mismatch");

  for (int i = 0; i < n; ++i) {
    const auto& u = frame.regressors[i];
    double denom = 0.0;
    for (int j = 0; j < m; ++j) denom += gains[j] * u[j] * u[j];
    denom += config_.delta;
    // A zero denominator only happens for an all-zero regressor, whose
    // correction is identically zero.
    coeffs_[i] = denom == 0.0 ? 0.0 : steps[i] * errors_[i] / denom;
  }

  // Accumulate the per-subband corrections pairwise before applying, so the
  // summation order never depends on how the terms were produced.
  bool finite = true;
  double terms[64];
  for (int j = 0; j < m; ++j) {
    for (int i = 0; i < n; ++i) terms[i] = coeffs_[i] * frame.regressors[i][j];
    int width = n;
    while (width > 1) {
      const int half = width / 2;
      for (int i = 0; i < half; ++i) terms[i] = terms[2 * i] + terms[2 * i + 1];
      if (width % 2) terms[half] = terms[width - 1];
      width = half + width % 2;
    }
    weights_[j] += gains[j] * terms[0];
    finite = finite && std::isfinite(weights_[j]);
  }
  if (!finite)
    fail(Status::diverged,
         "weights went non-finite at iteration " + std::to_string(iteration_));
}

void SafEngine::process_block(std::span<const double> input,
                              std::span<const double> desired) {
  analyze(input, desired);
  subband_errors(frame_, errors_);
  compute_gains(config_.gain_rule, weights_, gains_);
  config_.step_controller.steps(errors_, steps_);
  if (iteration_ >= static_cast<uint64_t>(config_.adaptation_delay_ticks))
    update_weights(frame_, gains_, steps_);
  ++iteration_;
}

void SafEngine::reset() {
  std::fill(weights_.begin(), weights_.end(), 0.0);
  std::fill(errors_.begin(), errors_.end(), 0.0);
  std::fill(steps_.begin(), steps_.end(), 0.0);
  std::fill(outputs_.begin(), outputs_.end(), 0.0);
  std::fill(gains_.begin(), gains_.end(), 1.0);
  analysis_.reset();
  config_.step_controller.reset();
  iteration_ = 0;
}

}  // namespace pnsaf
