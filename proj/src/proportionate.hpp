#pragma once

#include <span>
#include <vector>

namespace pnsaf {

/// Rule for the diagonal proportionate matrix G(k). Identity gives every tap
/// the same share (plain NSAF); ipnlms blends a uniform share with a share
/// proportional to the tap magnitude:
///
///   g_m = (1 - alpha) / (2M) + (1 + alpha) |w_m| / (2 ||w||_1 + xi)
///
/// alpha in [-1, 1): alpha = -1 recovers the uniform rule, values near 1
/// weight almost everything by magnitude (1.0 itself is rejected, it would
/// zero the gain of inactive taps).
struct GainRule {
  enum class Kind { identity, ipnlms };
  Kind kind = Kind::identity;
  double alpha = 0.0;
  double xi = 1e-3;

  static GainRule identity() { return {}; }
  static GainRule ipnlms(double alpha = 0.0, double xi = 1e-3);
};

using GainVector = std::vector<double>;

void compute_gains(const GainRule& rule, std::span<const double> weights,
                   std::span<double> gains_out);
GainVector compute_gains(const GainRule& rule, std::span<const double> weights);

double gain_sum(std::span<const double> gains);

}  // namespace pnsaf
