#include "diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include "errors.hpp"

namespace pnsaf {
namespace {

// Dense column-major N x N helpers; N stays tiny (subband count).
struct SmallMatrix {
  int n = 0;
  std::vector<double> a;  // a[i + j*n]

  double& at(int i, int j) { return a[i + j * n]; }
  double at(int i, int j) const { return a[i + j * n]; }
};

// Gauss-Jordan inverse with partial pivoting. Returns false when singular.
bool invert(SmallMatrix m, SmallMatrix& inv) {
  const int n = m.n;
  inv.n = n;
  inv.a.assign(n * n, 0.0);
  for (int i = 0; i < n; ++i) inv.at(i, i) = 1.0;
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(m.at(r, col)) > std::abs(m.at(pivot, col))) pivot = r;
    if (m.at(pivot, col) == 0.0 || !std::isfinite(m.at(pivot, col)))
      return false;
    if (pivot != col) {
      for (int j = 0; j < n; ++j) {
        std::swap(m.at(col, j), m.at(pivot, j));
        std::swap(inv.at(col, j), inv.at(pivot, j));
      }
    }
    const double d = 1.0 / m.at(col, col);
    for (int j = 0; j < n; ++j) {
      m.at(col, j) *= d;
      inv.at(col, j) *= d;
    }
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = m.at(r, col);
      if (f == 0.0) continue;
      for (int j = 0; j < n; ++j) {
        m.at(r, j) -= f * m.at(col, j);
        inv.at(r, j) -= f * inv.at(col, j);
      }
    }
  }
  return true;
}

double one_norm(const SmallMatrix& m) {
  double worst = 0.0;
  for (int j = 0; j < m.n; ++j) {
    double col = 0.0;
    for (int i = 0; i < m.n; ++i) col += std::abs(m.at(i, j));
    worst = std::max(worst, col);
  }
  return worst;
}

// M_ij = sum_m weight[m] * u_i[m] * u_j[m] for a diagonal weight vector.
SmallMatrix gram(const SubbandFrame& frame, std::span<const double> diag,
                 bool squared) {
  const int n = static_cast<int>(frame.regressors.size());
  const int m = static_cast<int>(diag.size());
  SmallMatrix g;
  g.n = n;
  g.a.assign(n * n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      double acc = 0.0;
      for (int t = 0; t < m; ++t) {
        const double w = squared ? diag[t] * diag[t] : diag[t];
        acc += w * frame.regressors[i][t] * frame.regressors[j][t];
      }
      g.at(i, j) = acc;
      g.at(j, i) = acc;
    }
  }
  return g;
}

std::vector<double> mat_vec(const SmallMatrix& m,
                            std::span<const double> x) {
  std::vector<double> y(m.n, 0.0);
  for (int j = 0; j < m.n; ++j)
    for (int i = 0; i < m.n; ++i) y[i] += m.at(i, j) * x[j];
  return y;
}

double quad_form(const SmallMatrix& m, std::span<const double> x,
                 std::span<const double> y) {
  double acc = 0.0;
  for (int j = 0; j < m.n; ++j)
    for (int i = 0; i < m.n; ++i) acc += x[i] * m.at(i, j) * y[j];
  return acc;
}

std::vector<double> projection_errors(const SubbandFrame& frame,
                                      std::span<const double> reference,
                                      std::span<const double> weights) {
  const int n = static_cast<int>(frame.regressors.size());
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    const auto& u = frame.regressors[i];
    for (size_t t = 0; t < u.size(); ++t)
      acc += u[t] * (reference[t] - weights[t]);
    out[i] = acc;
  }
  return out;
}

}  // namespace

double nmsd_db(std::span<const double> true_weights,
               std::span<const double> weights, double floor_db) {
  require(true_weights.size() == weights.size(), Status::invalid_argument,
          "weight vector length mismatch");
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < weights.size(); ++i) {
    const double d = true_weights[i] - weights[i];
    num += d * d;
    den += true_weights[i] * true_weights[i];
  }
  require(den > 0.0, Status::invalid_argument,
          "true weights have zero norm; NMSD undefined");
  if (num == 0.0) return floor_db;
  return std::max(floor_db, 10.0 * std::log10(num / den));
}

std::vector<double> erle_db(std::span<const double> desired,
                            std::span<const double> error, int window) {
  require(desired.size() == error.size(), Status::invalid_argument,
          "sequence length mismatch");
  require(window >= 1, Status::invalid_argument, "window must be positive");
  require(static_cast<size_t>(window) <= desired.size(),
          Status::invalid_argument, "window exceeds the sequence length");

  constexpr double kClipDb = 120.0;
  std::vector<double> out(desired.size() - window + 1);
  double dpow = 0.0, epow = 0.0;
  for (int i = 0; i < window; ++i) {
    dpow += desired[i] * desired[i];
    epow += error[i] * error[i];
  }
  size_t j = 0;
  for (size_t n = window - 1; n < desired.size(); ++n, ++j) {
    double v;
    if (epow <= 0.0)
      v = kClipDb;
    else if (dpow <= 0.0)
      v = -kClipDb;
    else
      v = std::clamp(10.0 * std::log10(dpow / epow), -kClipDb, kClipDb);
    out[j] = v;
    if (n + 1 < desired.size()) {
      const size_t drop = n + 1 - window;
      dpow += desired[n + 1] * desired[n + 1] - desired[drop] * desired[drop];
      epow += error[n + 1] * error[n + 1] - error[drop] * error[drop];
    }
  }
  return out;
}

NoiseFreeErrors noise_free_errors(std::span<const double> true_weights,
                                  std::span<const double> weights_before,
                                  std::span<const double> weights_after,
                                  const SubbandFrame& frame) {
  NoiseFreeErrors result;
  result.a_priori = projection_errors(frame, true_weights, weights_before);
  result.a_posteriori = projection_errors(frame, true_weights, weights_after);
  return result;
}

EnergyCheckReport energy_relation_check(std::span<const double> true_weights,
                                        std::span<const double> weights_before,
                                        std::span<const double> weights_after,
                                        const SubbandFrame& frame,
                                        std::span<const double> gains) {
  EnergyCheckReport report;
  const SmallMatrix m = gram(frame, gains, /*squared=*/false);
  SmallMatrix minv;
  if (!invert(m, minv)) {
    report.singular = true;
    return report;
  }
  report.condition_estimate = one_norm(m) * one_norm(minv);

  const auto nfe = noise_free_errors(true_weights, weights_before,
                                     weights_after, frame);
  const auto xa = mat_vec(minv, nfe.a_priori);
  const auto xp = mat_vec(minv, nfe.a_posteriori);
  double qa = 0.0, qp = 0.0;
  for (size_t i = 0; i < xa.size(); ++i) {
    qa += nfe.a_priori[i] * xa[i];
    qp += nfe.a_posteriori[i] * xp[i];
  }

  double before = 0.0, after = 0.0;
  for (size_t t = 0; t < gains.size(); ++t) {
    require(gains[t] > 0.0, Status::invalid_argument,
            "energy check needs strictly positive gains");
    const double db = weights_before[t] - true_weights[t];
    const double da = weights_after[t] - true_weights[t];
    before += db * db / gains[t];
    after += da * da / gains[t];
  }

  report.lhs = after + qa;
  report.rhs = before + qp;
  const double scale =
      std::max({std::abs(report.lhs), std::abs(report.rhs), 1e-300});
  report.relative_residual = std::abs(report.lhs - report.rhs) / scale;
  return report;
}

void StepBoundAccumulator::accumulate(const SubbandFrame& frame,
                                      std::span<const double> gains,
                                      std::span<const double> true_weights,
                                      std::span<const double> weights_before,
                                      std::span<const double> errors) {
  const SmallMatrix m = gram(frame, gains, /*squared=*/false);
  SmallMatrix minv;
  require(invert(m, minv), Status::invalid_argument,
          "singular subband Gram matrix in step-bound estimate");
  const SmallMatrix s = gram(frame, gains, /*squared=*/true);

  const auto eps_a =
      projection_errors(frame, true_weights, weights_before);
  const auto xa = mat_vec(minv, eps_a);
  const auto xe = mat_vec(minv, errors);
  numerator_ += quad_form(s, xa, xe);
  denominator_ += quad_form(s, xe, xe);
  ++count_;
}

double StepBoundAccumulator::estimate() const {
  require(count_ > 0 && denominator_ > 0.0, Status::invalid_argument,
          "step-bound estimate needs at least one non-degenerate iteration");
  return 2.0 * numerator_ / denominator_;
}

}  // namespace pnsaf
