#pragma once

#include <span>
#include <vector>

namespace pnsaf {

/// Soft threshold: sgn(e) * max(|e| - t, 0). Strips a noise floor of width t
/// from an observed error; a contraction for any t >= 0.
double shrink_error(double e, double threshold);

/// Exponential average of a squared error: theta * prev + (1 - theta) * e^2.
double update_power(double prev, double theta, double shrunk);

/// err_power / (err_power + noise_power), the step that minimizes the
/// expected squared residual after one update. In [0, 1); 0 at cold start.
double vss_step(double err_power, double noise_power);

/// Set-membership step: 1 - bound/|e| when |e| exceeds the bound, else 0.
double sm_step(double e, double bound);

/// Per-subband step-size policy. Fixed emits a constant; the two adaptive
/// variants derive everything from the known noise variance:
///
///   set_membership: bound = sqrt(gamma * noise_variance / N), no state.
///   shrinkage_vss:  threshold t = sqrt(lambda * noise_variance / N); each
///                   subband soft-thresholds its error, tracks the averaged
///                   shrunk power with forgetting factor
///                   theta = 1 - N / (kappa * M), and emits
///                   power / (power + noise_variance / N).
class StepController {
 public:
  enum class Kind { fixed, set_membership, shrinkage_vss };

  static StepController fixed(double mu);
  static StepController set_membership(double gamma, double noise_variance,
                                       int num_subbands);
  static StepController shrinkage_vss(double lambda, double kappa,
                                      double noise_variance, int num_subbands,
                                      int filter_length);

  /// Emits one step per subband; shrinkage_vss advances its power estimates
  /// exactly once per call.
  void steps(std::span<const double> subband_errors, std::span<double> mu_out);

  void reset();

  Kind kind() const { return kind_; }
  int num_subbands() const { return num_subbands_; }
  double theta() const { return theta_; }
  double threshold() const { return threshold_; }
  double bound() const { return bound_; }
  double subband_noise_variance() const { return subband_noise_variance_; }
  std::span<const double> error_power() const { return error_power_; }

 private:
  StepController() = default;

  Kind kind_ = Kind::fixed;
  int num_subbands_ = 1;
  double mu_ = 1.0;
  double bound_ = 0.0;                   // set_membership
  double theta_ = 0.0;                   // shrinkage_vss
  double threshold_ = 0.0;               // shrinkage_vss
  double subband_noise_variance_ = 0.0;  // shrinkage_vss
  std::vector<double> error_power_;      // shrinkage_vss, one per subband
};

}  // namespace pnsaf
