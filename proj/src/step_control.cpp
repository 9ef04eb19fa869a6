#include "step_control.hpp"

#include <algorithm>
#include <cmath>

#include "errors.hpp"

namespace pnsaf {

double shrink_error(double e, double threshold) {
  const double mag = std::abs(e) - threshold;
  if (mag <= 0.0) return 0.0;
  return e < 0.0 ? -mag : mag;
}

double update_power(double prev, double theta, double shrunk) {
  return theta * prev + (1.0 - theta) * shrunk * shrunk;
}

double vss_step(double err_power, double noise_power) {
  if (err_power <= 0.0) return 0.0;
  return err_power / (err_power + noise_power);
}

double sm_step(double e, double bound) {
  const double mag = std::abs(e);
  if (mag <= bound) return 0.0;
  return 1.0 - bound / mag;
}

StepController StepController::fixed(double mu) {
  require(mu > 0.0 && mu < 2.0, Status::invalid_argument,
          "fixed step size must be in (0, 2)");
  StepController c;
  c.kind_ = Kind::fixed;
  c.mu_ = mu;
  return c;
}

StepController StepController::set_membership(double gamma,
                                              double noise_variance,
                                              int num_subbands) {
  require(gamma > 0.0, Status::invalid_argument, "gamma must be positive");
  require(noise_variance > 0.0, Status::invalid_argument,
          "set-membership needs a positive noise variance");
  require(num_subbands >= 1, Status::invalid_argument,
          "num_subbands must be at least 1");
  StepController c;
  c.kind_ = Kind::set_membership;
  c.num_subbands_ = num_subbands;
  c.bound_ = std::sqrt(gamma * noise_variance / num_subbands);
  return c;
}

StepController StepController::shrinkage_vss(double lambda, double kappa,
                                             double noise_variance,
                                             int num_subbands,
                                             int filter_length) {
  require(lambda > 0.0, Status::invalid_argument, "lambda must be positive");
  require(kappa >= 1.0 && kappa <= 6.0, Status::invalid_argument,
          "kappa must be in [1, 6]");
  require(noise_variance >= 0.0, Status::invalid_argument,
          "noise variance must be nonnegative");
  require(num_subbands >= 1 && filter_length >= 1, Status::invalid_argument,
          "bad subband count or filter length");
  StepController c;
  c.kind_ = Kind::shrinkage_vss;
  c.num_subbands_ = num_subbands;
  c.theta_ = 1.0 - num_subbands / (kappa * filter_length);
  require(c.theta_ > 0.0 && c.theta_ < 1.0, Status::invalid_argument,
          "forgetting factor out of (0, 1); increase kappa*M relative to N");
  c.subband_noise_variance_ = noise_variance / num_subbands;
  c.threshold_ = std::sqrt(lambda * c.subband_noise_variance_);
  c.error_power_.assign(num_subbands, 0.0);
  return c;
}

void StepController::steps(std::span<const double> subband_errors,
                           std::span<double> mu_out) {
  require(mu_out.size() == subband_errors.size(), Status::invalid_argument,
          "step output size mismatch");
  require(kind_ == Kind::fixed ||
              static_cast<int>(subband_errors.size()) == num_subbands_,
          Status::invalid_argument, "subband count mismatch");
  switch (kind_) {
    case Kind::fixed:
      std::fill(mu_out.begin(), mu_out.end(), mu_);
      break;
    case Kind::set_membership:
      for (size_t i = 0; i < mu_out.size(); ++i)
        mu_out[i] = sm_step(subband_errors[i], bound_);
      break;
    case Kind::shrinkage_vss:
      for (size_t i = 0; i < mu_out.size(); ++i) {
        const double shrunk = shrink_error(subband_errors[i], threshold_);
        error_power_[i] = update_power(error_power_[i], theta_, shrunk);
        mu_out[i] = vss_step(error_power_[i], subband_noise_variance_);
      }
      break;
  }
}

void StepController::reset() {
  std::fill(error_power_.begin(), error_power_.end(), 0.0);
}

}  // namespace pnsaf
