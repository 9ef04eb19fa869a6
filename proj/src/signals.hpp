#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace pnsaf {

/// Seeded Gaussian source: mt19937_64 driving a Marsaglia polar transform.
/// Fully determined by the seed; no library-dependent distributions.
class GaussianRng {
 public:
  explicit GaussianRng(uint64_t seed) : engine_(seed) {}

  double next();           // standard normal
  double uniform();        // [0, 1)
  uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

std::vector<double> gen_ar1(double pole, size_t n_samples, uint64_t seed);
std::vector<double> gen_white(double variance, size_t n_samples, uint64_t seed);

struct SparsityProfile {
  int num_active = 0;
  double decay_rate = 0.0;
  uint64_t seed = 0;
};

struct EchoPath {
  std::vector<double> weights;
  SparsityProfile profile;

  int length() const { return static_cast<int>(weights.size()); }
};

/// Random sparse impulse response: num_active taps at seeded positions within
/// the first max(num_active, 3M/4) indices, signed Gaussian amplitudes scaled
/// by exp(-decay_rate * position / M), normalized to unit Euclidean norm.
EchoPath gen_sparse_echo_path(int length, int num_active, double decay_rate,
                              uint64_t seed);

/// Negates every tap (abrupt path change for tracking experiments).
EchoPath flip_path(const EchoPath& path);

/// Reads an impulse response from a text file, one coefficient per line.
EchoPath load_path_csv(const std::filesystem::path& path);

/// Input model for experiments.
struct SignalSource {
  enum class Kind { ar1, white_gaussian, pcm_file };
  Kind kind = Kind::ar1;
  double pole = 0.95;           // ar1
  double variance = 1.0;        // white_gaussian
  std::string path;             // pcm_file

  void validate() const;
  std::vector<double> render(size_t n_samples, uint64_t seed) const;
};

/// One synthesized system run: d(n) = (w_o * u)(n) + eta(n) with the noise
/// variance set from the requested SNR over the whole run. snr_db = +inf
/// gives the noise-free output.
struct SystemRun {
  std::vector<double> input;
  std::vector<double> clean;    // noiseless echo, kept for diagnostics
  std::vector<double> desired;
  double noise_variance = 0.0;
  double snr_db = 0.0;
};

SystemRun synthesize_desired(const EchoPath& path, std::vector<double> input,
                             double snr_db, uint64_t seed);

struct WavData {
  std::vector<double> samples;  // scaled to [-1, 1)
  uint32_t sample_rate = 0;
};

/// Mono 16-bit PCM RIFF/WAVE reader, samples scaled by 1/32768.
WavData load_pcm_wav(const std::filesystem::path& path);

}  // namespace pnsaf
