#include "filterbank.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>

#include "errors.hpp"

namespace pnsaf {
namespace {

constexpr double kPi = std::numbers::pi;

// Modified Bessel function of the first kind, order zero (power series).
double bessel_i0(double x) {
  double sum = 1.0;
  double term = 1.0;
  for (int k = 1; k < 64; ++k) {
    const double f = x / (2.0 * k);
    term *= f * f;
    sum += term;
    if (term < 1e-18 * sum) break;
  }
  return sum;
}

double kaiser_shape(double attenuation_db) {
  if (attenuation_db > 50.0) return 0.1102 * (attenuation_db - 8.7);
  if (attenuation_db >= 21.0)
    return 0.5842 * std::pow(attenuation_db - 21.0, 0.4) +
           0.07886 * (attenuation_db - 21.0);
  return 0.0;
}

std::vector<double> windowed_sinc(int length, double beta, double cutoff) {
  const double center = 0.5 * (length - 1);
  const double i0_beta = bessel_i0(beta);
  std::vector<double> taps(length);
  for (int n = 0; n < length; ++n) {
    const double x = n - center;
    const double ideal =
        std::abs(x) < 1e-12 ? cutoff / kPi : std::sin(cutoff * x) / (kPi * x);
    double t = 2.0 * n / (length - 1) - 1.0;
    const double arg = std::max(0.0, 1.0 - t * t);
    taps[n] = ideal * bessel_i0(beta * std::sqrt(arg)) / i0_beta;
  }
  return taps;
}

std::vector<std::vector<double>> modulate(std::span<const double> taps,
                                          int num_subbands) {
  const int length = static_cast<int>(taps.size());
  const double center = 0.5 * (length - 1);
  std::vector<std::vector<double>> filters(num_subbands);
  for (int i = 0; i < num_subbands; ++i) {
    const double omega = (kPi / num_subbands) * (i + 0.5);
    const double phase = (i % 2 == 0) ? kPi / 4.0 : -kPi / 4.0;
    filters[i].resize(length);
    for (int n = 0; n < length; ++n) {
      filters[i][n] = 2.0 * taps[n] * std::cos(omega * (n - center) + phase);
    }
  }
  return filters;
}

double bank_energy(const std::vector<std::vector<double>>& filters) {
  double e = 0.0;
  for (const auto& h : filters)
    for (double v : h) e += v * v;
  return e;
}

// Summed squared magnitude response of the modulated (and energy-normalized)
// bank on grid_size+1 points over [0, pi].
std::vector<double> power_sum_response(std::span<const double> taps,
                                       int num_subbands, int grid_size) {
  auto filters = modulate(taps, num_subbands);
  const double scale = 1.0 / bank_energy(filters);
  std::vector<double> total(grid_size + 1, 0.0);
  for (const auto& h : filters) {
    for (int j = 0; j <= grid_size; ++j) {
      const double omega = kPi * j / grid_size;
      const std::complex<double> z(std::cos(omega), -std::sin(omega));
      std::complex<double> acc(0.0, 0.0);
      for (int n = static_cast<int>(h.size()) - 1; n >= 0; --n)
        acc = acc * z + h[n];
      total[j] += std::norm(acc) * scale;
    }
  }
  return total;
}

// Peak deviation (dB) of the bank power sum from its mean over frequency.
double power_ripple_db(std::span<const double> taps, int num_subbands,
                       int grid_size) {
  const auto total = power_sum_response(taps, num_subbands, grid_size);
  double mean = 0.0;
  for (double v : total) mean += v;
  mean /= total.size();
  double worst = 0.0;
  for (double v : total)
    worst = std::max(worst, std::abs(10.0 * std::log10(v / mean)));
  return worst;
}

// Prototype rejection beyond pi/N (dB, relative to the DC gain).
double stopband_attenuation_db(std::span<const double> taps, int num_subbands,
                               int grid_size) {
  const auto mag = magnitude_response(taps, grid_size);
  const double dc = mag.front();
  const int start = static_cast<int>(
      std::ceil(static_cast<double>(grid_size) / num_subbands - 1e-9));
  double peak = 0.0;
  for (int j = start; j <= grid_size; ++j) peak = std::max(peak, mag[j]);
  if (peak <= 0.0) return 300.0;
  return -20.0 * std::log10(peak / dc);
}

struct Candidate {
  double beta = 0.0;
  double cutoff = 0.0;
  double attenuation_db = -std::numeric_limits<double>::infinity();
};

// Deterministic joint search over Kaiser shape and cutoff (see header).
Candidate search_design(int num_subbands, int length, double attenuation_db) {
  constexpr int kTuneGrid = 256;
  const double base = kPi / (2.0 * num_subbands);
  Candidate best;
  for (double target = 20.0; target <= attenuation_db + 1e-9; target += 1.0) {
    const double beta = kaiser_shape(target);
    const auto ripple = [&](double wc) {
      return power_ripple_db(windowed_sinc(length, beta, wc), num_subbands,
                             kTuneGrid);
    };

    // Ripple as a function of cutoff falls and then rises again; locate the
    // minimum by golden section.
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = base * 0.9, b = base * 1.5;
    double c = b - gr * (b - a), d = a + gr * (b - a);
    double fc = ripple(c), fd = ripple(d);
    for (int it = 0; it < 28; ++it) {
      if (fc < fd) {
        b = d; d = c; fd = fc;
        c = b - gr * (b - a); fc = ripple(c);
      } else {
        a = c; c = d; fc = fd;
        d = a + gr * (b - a); fd = ripple(d);
      }
    }
    const double wc_min = 0.5 * (a + b);
    if (ripple(wc_min) > kRippleBudgetDb) continue;

    // Smallest cutoff that still meets the ripple budget; attenuation only
    // improves as the cutoff shrinks.
    double lo = base * 0.8, hi = wc_min;
    double wc = wc_min;
    if (ripple(lo) <= kRippleBudgetDb) {
      wc = lo;
    } else {
      for (int it = 0; it < 40; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (ripple(mid) <= kRippleBudgetDb)
          hi = mid;
        else
          lo = mid;
      }
      wc = hi;
    }

    const double att = stopband_attenuation_db(
        windowed_sinc(length, beta, wc), num_subbands, kTuneGrid);
    if (att > best.attenuation_db) best = {beta, wc, att};
  }
  require(best.cutoff > 0.0, Status::internal_error,
          "prototype design search found no feasible candidate");
  return best;
}

}  // namespace

std::vector<double> magnitude_response(std::span<const double> taps,
                                       int grid_size) {
  std::vector<double> mag(grid_size + 1);
  for (int j = 0; j <= grid_size; ++j) {
    const double omega = kPi * j / grid_size;
    const std::complex<double> z(std::cos(omega), -std::sin(omega));
    std::complex<double> acc(0.0, 0.0);
    for (int n = static_cast<int>(taps.size()) - 1; n >= 0; --n)
      acc = acc * z + taps[n];
    mag[j] = std::abs(acc);
  }
  return mag;
}

PrototypeFilter design_prototype(int num_subbands, int length,
                                 double attenuation_db) {
  require(num_subbands >= 1, Status::invalid_argument,
          "num_subbands must be at least 1");
  require(std::isfinite(attenuation_db) && attenuation_db > 0.0,
          Status::invalid_argument, "attenuation_db must be positive");
  if (num_subbands == 1) {
    require(length >= 1, Status::invalid_argument, "length must be positive");
    return PrototypeFilter{{1.0}, 1, attenuation_db};
  }
  require(length >= 2 * num_subbands, Status::invalid_argument,
          "prototype length must be at least twice the subband count");

  const Candidate c = search_design(num_subbands, length, attenuation_db);
  PrototypeFilter proto{windowed_sinc(length, c.beta, c.cutoff), num_subbands,
                        attenuation_db};

  // Scale so the modulated bank's power response averages to one; by
  // Parseval that mean equals the total bank tap energy.
  const double scale = 1.0 / std::sqrt(bank_energy(
                           modulate(proto.taps, num_subbands)));
  for (double& t : proto.taps) t *= scale;

  // Enforce exact midpoint symmetry against accumulated rounding.
  const int L = proto.length();
  for (int n = 0; n < L / 2; ++n) {
    const double avg = 0.5 * (proto.taps[n] + proto.taps[L - 1 - n]);
    proto.taps[n] = avg;
    proto.taps[L - 1 - n] = avg;
  }
  return proto;
}

AnalysisBank modulate_bank(const PrototypeFilter& prototype) {
  require(prototype.length() > 0, Status::invalid_argument,
          "prototype is empty");
  for (double t : prototype.taps)
    require(std::isfinite(t), Status::invalid_argument,
            "prototype taps must be finite");
  if (prototype.num_subbands == 1) {
    return AnalysisBank{{{1.0}}, prototype};
  }
  return AnalysisBank{modulate(prototype.taps, prototype.num_subbands),
                      prototype};
}

AnalysisBank design_bank(int num_subbands, int length, double attenuation_db) {
  return modulate_bank(design_prototype(num_subbands, length, attenuation_db));
}

BankQualityReport bank_quality_report(const AnalysisBank& bank, int fft_size) {
  const int L = bank.prototype.length();
  require(fft_size >= 8 * L, Status::invalid_argument,
          "fft_size must be at least 8x the prototype length");
  require(fft_size > 0 && (fft_size & (fft_size - 1)) == 0,
          Status::invalid_argument, "fft_size must be a power of two");

  const int N = bank.num_subbands();
  BankQualityReport report;

  report.stopband_attenuation_db =
      stopband_attenuation_db(bank.prototype.taps, N, fft_size);

  std::vector<std::vector<double>> mags(N);
  for (int i = 0; i < N; ++i)
    mags[i] = magnitude_response(bank.filters[i], fft_size);

  std::vector<double> total(fft_size + 1, 0.0);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j <= fft_size; ++j) total[j] += mags[i][j] * mags[i][j];
  double mean = 0.0;
  for (double v : total) mean += v;
  mean /= total.size();
  double worst = 0.0;
  for (double v : total)
    worst = std::max(worst, std::abs(10.0 * std::log10(v / mean)));
  report.amplitude_distortion_db = worst;

  double alias = 0.0;
  for (int i = 0; i + 1 < N; ++i)
    for (int j = 0; j <= fft_size; ++j)
      alias = std::max(alias, mags[i][j] * mags[i + 1][j]);
  report.max_alias_level_db = alias > 0.0 ? 10.0 * std::log10(alias) : -300.0;
  return report;
}

AnalysisState::AnalysisState(const AnalysisBank& bank, int filter_length)
    : filters_(bank.filters),
      num_subbands_(bank.num_subbands()),
      filter_taps_(bank.filter_length()),
      regressor_length_(filter_length) {
  require(num_subbands_ >= 1 && filter_taps_ >= 1, Status::invalid_argument,
          "analysis bank is empty");
  require(filter_length >= 1, Status::invalid_argument,
          "regressor length must be positive");
  input_hist_.assign(filter_taps_, 0.0);
  desired_hist_.assign(filter_taps_, 0.0);
  subband_hist_.assign(num_subbands_, std::vector<double>(regressor_length_, 0.0));
}

void AnalysisState::reset() {
  std::fill(input_hist_.begin(), input_hist_.end(), 0.0);
  std::fill(desired_hist_.begin(), desired_hist_.end(), 0.0);
  for (auto& ring : subband_hist_) std::fill(ring.begin(), ring.end(), 0.0);
  hist_head_ = 0;
  sub_head_ = 0;
}

void AnalysisState::push_input(double u, double d) {
  input_hist_[hist_head_] = u;
  desired_hist_[hist_head_] = d;
  hist_head_ = (hist_head_ + 1) % filter_taps_;

  // Filter the input through every branch at the full rate; the regressor
  // needs consecutive (undecimated) subband samples.
  for (int i = 0; i < num_subbands_; ++i) {
    const auto& h = filters_[i];
    double acc = 0.0;
    int idx = hist_head_;  // oldest retained sample
    for (int l = filter_taps_ - 1; l >= 0; --l) {
      acc += h[l] * input_hist_[idx];
      idx = idx + 1 == filter_taps_ ? 0 : idx + 1;
    }
    subband_hist_[i][sub_head_] = acc;
  }
  sub_head_ = (sub_head_ + 1) % regressor_length_;
}

void AnalysisState::analyze_step(std::span<const double> input_block,
                                 std::span<const double> desired_block,
                                 SubbandFrame& out) {
  require(static_cast<int>(input_block.size()) == num_subbands_ &&
              static_cast<int>(desired_block.size()) == num_subbands_,
          Status::invalid_argument,
          "analysis blocks must hold exactly one sample per subband");

  for (int n = 0; n < num_subbands_; ++n)
    push_input(input_block[n], desired_block[n]);

  out.regressors.resize(num_subbands_);
  out.desired.resize(num_subbands_);

  // Desired branch only matters at the decimated instant.
  for (int i = 0; i < num_subbands_; ++i) {
    const auto& h = filters_[i];
    double acc = 0.0;
    int idx = hist_head_;
    for (int l = filter_taps_ - 1; l >= 0; --l) {
      acc += h[l] * desired_hist_[idx];
      idx = idx + 1 == filter_taps_ ? 0 : idx + 1;
    }
    out.desired[i] = acc;

    auto& reg = out.regressors[i];
    reg.resize(regressor_length_);
    const auto& ring = subband_hist_[i];
    int src = sub_head_ == 0 ? regressor_length_ - 1 : sub_head_ - 1;
    for (int m = 0; m < regressor_length_; ++m) {
      reg[m] = ring[src];
      src = src == 0 ? regressor_length_ - 1 : src - 1;
    }
  }
}

}  // namespace pnsaf
