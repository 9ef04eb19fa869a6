#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "proportionate.hpp"
#include "saf_engine.hpp"
#include "signals.hpp"
#include "step_control.hpp"

namespace pnsaf {

/// One algorithm entry in an experiment: a gain rule plus a step policy.
/// Controllers that need the noise variance get it per trial, from the
/// synthesized run.
struct AlgorithmSpec {
  std::string name;
  GainRule gain;
  StepController::Kind step_kind = StepController::Kind::fixed;
  double mu = 1.0;        // fixed
  double gamma = 9.0;     // set_membership
  double lambda = 3.5;    // shrinkage_vss
  double kappa = 1.0;     // shrinkage_vss
  double delta = 1e-3;

  StepController make_controller(double noise_variance, int num_subbands,
                                 int filter_length) const;
  void validate() const;
};

struct PathSpec {
  enum class Kind { synthetic, file };
  Kind kind = Kind::synthetic;
  int num_active = 32;
  double decay_rate = 4.0;
  std::string file;
};

struct MetricOptions {
  int nmsd_stride = 1;     // record every nmsd_stride-th tick
  bool erle = false;
  int erle_window = 1024;  // fullband samples
};

struct ExperimentSpec {
  SignalSource input;
  int filter_length = 512;
  int num_subbands = 4;
  int prototype_length = 0;  // 0 -> 8 * num_subbands
  double attenuation_db = 60.0;
  double snr_db = 30.0;      // +inf for noise-free
  PathSpec path;
  std::optional<uint64_t> path_flip_sample;
  uint64_t run_length = 240000;  // fullband samples, truncated to N
  int ensemble_size = 25;
  uint64_t base_seed = 1;
  MetricOptions metrics;
  std::vector<AlgorithmSpec> algorithms;

  void validate() const;
  int bank_length() const {
    return prototype_length > 0 ? prototype_length
                                : (num_subbands == 1 ? 1 : 8 * num_subbands);
  }
  uint64_t truncated_length() const {
    return run_length - run_length % static_cast<uint64_t>(num_subbands);
  }
  uint64_t num_ticks() const {
    return truncated_length() / static_cast<uint64_t>(num_subbands);
  }
  /// Flip applied at the nearest decimated boundary at or below the
  /// configured fullband index; 0 when no flip happens inside the run.
  uint64_t flip_tick() const;
};

struct TrialSeeds {
  uint64_t input = 0, noise = 0, path = 0;
};
TrialSeeds trial_seeds(uint64_t base_seed, int trial_index);

/// Per-trial telemetry at the recording stride.
struct MetricSeries {
  int num_subbands = 0;
  std::vector<uint64_t> ticks;
  std::vector<double> nmsd_db;
  std::vector<double> steps;    // ticks x N, subband-major per tick
  std::vector<double> abs_err;  // ticks x N
  std::vector<double> erle_db;  // per recorded tick, when enabled
  bool diverged = false;
  uint64_t diverged_at_tick = 0;
};

struct AlgorithmResult {
  std::string name;
  std::vector<uint64_t> ticks;
  std::vector<double> nmsd_db;   // ensemble mean (linear domain), in dB
  std::vector<double> steps;     // ticks x N ensemble means
  std::vector<double> erle_db;   // ensemble mean, when enabled
  double steady_state_nmsd_db = 0.0;
  int diverged_trials = 0;

  /// First recorded fullband index (tick * N) where the mean NMSD reaches
  /// threshold_db; empty when it never does.
  std::optional<uint64_t> time_to_db(double threshold_db,
                                     int num_subbands) const;
};

struct EnsembleResult {
  ExperimentSpec spec;
  uint64_t flip_tick = 0;
  std::vector<AlgorithmResult> algorithms;

  const AlgorithmResult& algorithm(const std::string& name) const;
  /// Algorithm names ordered best-first by steady-state NMSD.
  std::vector<std::string> ranking() const;
};

/// One full simulation of one algorithm: generates signals from the trial's
/// seed lineage, drives the engine block by block, applies the configured
/// path flip, records metrics. Divergence shows up as a flagged, truncated
/// series rather than an exception.
MetricSeries run_trial(const ExperimentSpec& spec, const AlgorithmSpec& algo,
                       int trial_index);

/// ensemble_size independent trials, every algorithm fed byte-identical
/// signals within a trial. Trials may run on several threads; the reduction
/// is performed in trial order so results do not depend on thread count.
EnsembleResult run_ensemble(const ExperimentSpec& spec, int threads = 1);

/// One ensemble per value with everything else held fixed. parameter is one
/// of "lambda", "mu", "subbands", "snr_db"; the filter bank is redesigned
/// when the subband count changes.
std::vector<EnsembleResult> sweep(const ExperimentSpec& spec,
                                  const std::string& parameter,
                                  const std::vector<double>& values,
                                  int threads = 1);
ExperimentSpec apply_sweep_value(const ExperimentSpec& spec,
                                 const std::string& parameter, double value);

/// Writes one CSV per algorithm into out_dir:
///   k,fullband_n,algorithm,nmsd_db[,erle_db],mu_0..mu_{N-1}
/// with %.9e numbers and LF line endings. Returns algorithm -> file name.
std::vector<std::pair<std::string, std::string>> export_csv(
    const EnsembleResult& result, const std::filesystem::path& out_dir);

/// Deterministic per-process cache of designed banks.
const AnalysisBank& cached_bank(int num_subbands, int length,
                                double attenuation_db);

}  // namespace pnsaf
