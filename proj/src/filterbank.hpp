#pragma once

#include <span>
#include <vector>

namespace pnsaf {

// Cosine-modulated (pseudo-QMF) analysis filter bank with critical
// decimation. A single linear-phase lowpass prototype p[n] of length L is
// shifted to N uniform bands:
//
//   h_i[n] = 2 p[n] cos( (pi/N)(i + 0.5)(n - (L-1)/2) + (-1)^i pi/4 )
//
// The alternating +-pi/4 phase gives adjacent-band alias cancellation and
// keeps the summed power response flat at the spectrum edges. For N = 1 the
// bank degenerates to a unit impulse and the analysis is an exact tap-delay
// line.

struct PrototypeFilter {
  std::vector<double> taps;           // symmetric about the midpoint
  int num_subbands = 1;
  double target_attenuation_db = 60.0;

  int length() const { return static_cast<int>(taps.size()); }
};

/// Designs the lowpass prototype for an N-band bank.
///
/// The prototype is a Kaiser-windowed sinc. A literal cutoff of pi/(2N)
/// leaves the response 6 dB down at the band crossover, which dents the
/// summed power response by ~3 dB; pushing the crossover all the way to
/// -3 dB costs too much stopband with only L = 8N taps. The design therefore
/// searches deterministically over (window shape, cutoff): for each stopband
/// target at or below attenuation_db it picks the smallest cutoff whose
/// measured power ripple stays within kRippleBudgetDb, then keeps the
/// candidate with the best measured attenuation beyond pi/N.
///
/// num_subbands == 1 returns the single tap {1.0}. Requires length >= 2N for
/// N > 1 and a positive, finite attenuation.
PrototypeFilter design_prototype(int num_subbands, int length,
                                 double attenuation_db);

inline constexpr double kRippleBudgetDb = 0.7;

struct AnalysisBank {
  std::vector<std::vector<double>> filters;  // N filters, each length L
  PrototypeFilter prototype;

  int num_subbands() const { return static_cast<int>(filters.size()); }
  int filter_length() const {
    return filters.empty() ? 0 : static_cast<int>(filters.front().size());
  }
};

/// Applies the cosine modulation to a prototype. The bank is scaled so the
/// summed squared magnitude response averages to one over frequency.
AnalysisBank modulate_bank(const PrototypeFilter& prototype);

/// design_prototype + modulate_bank in one call.
AnalysisBank design_bank(int num_subbands, int length, double attenuation_db);

struct BankQualityReport {
  double stopband_attenuation_db = 0.0;  // prototype rejection beyond pi/N
  double amplitude_distortion_db = 0.0;  // peak deviation of sum|H_i|^2 from its mean
  double max_alias_level_db = 0.0;       // peak adjacent-band overlap product
};

/// Measures the bank on a frequency grid of fft_size points over [0, pi].
/// fft_size must be a power of two and at least 8 L.
BankQualityReport bank_quality_report(const AnalysisBank& bank, int fft_size);

/// One decimated tick's worth of analysis output: for each subband the
/// most-recent-first regressor [u_i(kN), u_i(kN-1), ..., u_i(kN-M+1)] and the
/// decimated desired sample d_i(kN).
struct SubbandFrame {
  std::vector<std::vector<double>> regressors;  // N x M
  std::vector<double> desired;                  // N
};

/// Full-rate filtering state for one bank instance. Consumes N fullband
/// input/desired samples per step (critical decimation) and exposes the
/// regressor snapshot at the decimated instant. Plain value type; not for
/// concurrent sharing.
class AnalysisState {
 public:
  AnalysisState(const AnalysisBank& bank, int filter_length);

  int num_subbands() const { return num_subbands_; }
  int regressor_length() const { return regressor_length_; }

  /// Advances by one decimated tick. Both blocks must hold exactly N samples,
  /// oldest first. The frame is resized as needed.
  void analyze_step(std::span<const double> input_block,
                    std::span<const double> desired_block, SubbandFrame& out);

  void reset();

 private:
  void push_input(double u, double d);

  std::vector<std::vector<double>> filters_;  // copy of the bank
  int num_subbands_ = 1;
  int filter_taps_ = 1;      // L
  int regressor_length_ = 1; // M

  // Ring buffers, most recent at head_-1 walking backwards.
  std::vector<double> input_hist_;    // length L
  std::vector<double> desired_hist_;  // length L
  int hist_head_ = 0;
  std::vector<std::vector<double>> subband_hist_;  // N rings of length M
  int sub_head_ = 0;
};

/// Magnitude response |H(e^{jw})| of an FIR filter on grid_size+1 points
/// spanning [0, pi].
std::vector<double> magnitude_response(std::span<const double> taps,
                                       int grid_size);

}  // namespace pnsaf
