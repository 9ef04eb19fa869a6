#pragma once

#include <span>
#include <vector>

#include "filterbank.hpp"

namespace pnsaf {

/// Normalized misalignment 10 log10(||w_o - w||^2 / ||w_o||^2) in dB.
/// Returns floor_db when the deviation is exactly zero.
double nmsd_db(std::span<const double> true_weights,
               std::span<const double> weights, double floor_db = -300.0);

/// Echo return loss enhancement 10 log10(E[d^2] / E[e^2]) with expectations
/// estimated by trailing moving averages over `window` samples. Output starts
/// at sample window-1 and is clipped to +-120 dB.
std::vector<double> erle_db(std::span<const double> desired,
                            std::span<const double> error, int window);

/// Per-subband errors attributable to weight misadjustment alone:
/// a_priori[i] = u_i . (w_o - w_before), a_posteriori[i] likewise with
/// w_after. Simulation-only (needs the true path).
struct NoiseFreeErrors {
  std::vector<double> a_priori;
  std::vector<double> a_posteriori;
};
NoiseFreeErrors noise_free_errors(std::span<const double> true_weights,
                                  std::span<const double> weights_before,
                                  std::span<const double> weights_after,
                                  const SubbandFrame& frame);

// Energy balance of one weight update. For any update of the form
// w(k+1) = w(k) + G U c (any per-subband steps, any regularization) the
// following holds exactly, with M = U^T G U and the weight error measured in
// the G^-1 norm:
//
//   ||w~(k+1)||^2_{G^-1} + eps_a^T M^-1 eps_a
//     = ||w~(k)||^2_{G^-1} + eps_p^T M^-1 eps_p
//
// For identity gains both sides reduce to plain Euclidean energies. Only
// floating-point error should remain in the residual.
struct EnergyCheckReport {
  double lhs = 0.0;
  double rhs = 0.0;
  double relative_residual = 0.0;
  double condition_estimate = 0.0;  // 1-norm condition of M
  bool singular = false;            // M not invertible; sides not comparable
};

EnergyCheckReport energy_relation_check(std::span<const double> true_weights,
                                        std::span<const double> weights_before,
                                        std::span<const double> weights_after,
                                        const SubbandFrame& frame,
                                        std::span<const double> gains);

/// Sample estimate of the largest stable step size,
/// 2 E[eps_a^T Gamma e] / E[e^T Gamma e] with
/// Gamma = M^-T (U^T G^2 U) M^-1. Equals 2 exactly when the run is
/// noise-free (eps_a == e), strictly below 2 otherwise.
class StepBoundAccumulator {
 public:
  /// Accumulates one iteration. `errors` are the observed subband errors for
  /// this frame; weights_before is w(k).
  void accumulate(const SubbandFrame& frame, std::span<const double> gains,
                  std::span<const double> true_weights,
                  std::span<const double> weights_before,
                  std::span<const double> errors);

  double estimate() const;
  size_t count() const { return count_; }

 private:
  double numerator_ = 0.0;
  double denominator_ = 0.0;
  size_t count_ = 0;
};

}  // namespace pnsaf
