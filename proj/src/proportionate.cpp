#include "proportionate.hpp"

#include <cmath>

#include "errors.hpp"

namespace pnsaf {

GainRule GainRule::ipnlms(double alpha, double xi) {
  require(alpha >= -1.0 && alpha < 1.0, Status::invalid_argument,
          "ipnlms alpha must be in [-1, 1)");
  require(xi > 0.0 && std::isfinite(xi), Status::invalid_argument,
          "ipnlms xi must be positive");
  GainRule rule;
  rule.kind = Kind::ipnlms;
  rule.alpha = alpha;
  rule.xi = xi;
  return rule;
}

void compute_gains(const GainRule& rule, std::span<const double> weights,
                   std::span<double> gains_out) {
  const size_t m = weights.size();
  require(m > 0, Status::invalid_argument, "weights are empty");
  require(gains_out.size() == m, Status::invalid_argument,
          "gain output size mismatch");

  if (rule.kind == GainRule::Kind::identity) {
    for (auto& g : gains_out) g = 1.0;
    return;
  }

  double l1 = 0.0;
  for (double w : weights) l1 += std::abs(w);
  const double uniform = (1.0 - rule.alpha) / (2.0 * static_cast<double>(m));
  const double scale = (1.0 + rule.alpha) / (2.0 * l1 + rule.xi);
  for (size_t i = 0; i < m; ++i)
    gains_out[i] = uniform + scale * std::abs(weights[i]);
}

GainVector compute_gains(const GainRule& rule,
                         std::span<const double> weights) {
  GainVector gains(weights.size());
  compute_gains(rule, weights, gains);
  return gains;
}

double gain_sum(std::span<const double> gains) {
  double sum = 0.0;
  for (double g : gains) sum += g;
  return sum;
}

}  // namespace pnsaf
