#pragma once

#include <cstdint>
#include <span>

#include "filterbank.hpp"
#include "proportionate.hpp"
#include "step_control.hpp"

namespace pnsaf {

struct SafConfig {
  int filter_length = 512;   // adaptive taps M
  int num_subbands = 4;      // N
  double delta = 1e-3;       // update regularization, >= 0
  GainRule gain_rule;
  StepController step_controller = StepController::fixed(1.0);

  // Ticks to run analysis and telemetry without touching the weights. While
  // the delay lines are filling, the subband regressors are filtered copies
  // of the same few samples and the summed multiband correction can apply an
  // effective step of nearly N on their common direction, catapulting the
  // weights; holding the update until the regressors carry real data removes
  // that transient. 0 adapts from the first tick.
  int adaptation_delay_ticks = 0;
};

// Multiband adaptive filter. One decimated tick consumes N fullband
// input/desired samples and performs:
//
//   analysis            -> regressors u_i(k), desired d_i(k)
//   errors              -> e_i = d_i - u_i . w(k)
//   gains               -> G(k) from w(k)
//   steps               -> mu_i(k) from e_i
//   weight update       -> w(k+1) = w(k)
//                          + sum_i mu_i g e_i u_i / (u_i^T G u_i + delta)
//
// With num_subbands = 1 and identity gains the recursion is exactly NLMS.
// One engine instance is single-threaded; independent instances can run on
// separate threads.
class SafEngine {
 public:
  SafEngine(SafConfig config, const AnalysisBank& bank);

  /// One full tick. Both blocks must hold exactly num_subbands samples.
  /// Throws Status::diverged if the updated weights go non-finite.
  void process_block(std::span<const double> input,
                     std::span<const double> desired);

  // The individual stages, exposed so diagnostics can interleave with the
  // update. analyze() advances the analysis memories; subband_errors()
  // records the per-subband errors and outputs for the frame (update_weights
  // consumes the recorded errors); update_weights() applies the recursion
  // with caller-supplied gains and steps.
  const SubbandFrame& analyze(std::span<const double> input,
                              std::span<const double> desired);
  void subband_errors(const SubbandFrame& frame,
                      std::span<double> errors_out);
  void update_weights(const SubbandFrame& frame, std::span<const double> gains,
                      std::span<const double> steps);

  void reset();

  std::span<const double> weights() const { return weights_; }
  std::span<const double> last_errors() const { return errors_; }
  std::span<const double> last_steps() const { return steps_; }
  std::span<const double> last_gains() const { return gains_; }
  std::span<const double> last_outputs() const { return outputs_; }
  uint64_t iteration() const { return iteration_; }
  const SafConfig& config() const { return config_; }

 private:
  SafConfig config_;
  AnalysisState analysis_;
  SubbandFrame frame_;
  std::vector<double> weights_;
  std::vector<double> errors_, steps_, gains_, outputs_;
  std::vector<double> coeffs_;  // per-subband update coefficients
  uint64_t iteration_ = 0;
};

}  // namespace pnsaf
