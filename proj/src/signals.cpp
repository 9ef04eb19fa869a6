#include "signals.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "errors.hpp"

namespace pnsaf {

double GaussianRng::uniform() {
  // 53-bit mantissa in [0, 1).
  return (engine_() >> 11) * 0x1.0p-53;
}

double GaussianRng::next() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * f;
  have_spare_ = true;
  return u * f;
}

std::vector<double> gen_ar1(double pole, size_t n_samples, uint64_t seed) {
  require(std::abs(pole) < 1.0, Status::invalid_argument,
          "AR(1) pole must satisfy |pole| < 1");
  require(n_samples > 0, Status::invalid_argument,
          "sample count must be positive");
  GaussianRng rng(seed);
  std::vector<double> u(n_samples);
  double prev = 0.0;
  for (size_t n = 0; n < n_samples; ++n) {
    prev = pole * prev + rng.next();
    u[n] = prev;
  }
  return u;
}

std::vector<double> gen_white(double variance, size_t n_samples,
                              uint64_t seed) {
  require(variance > 0.0, Status::invalid_argument,
          "variance must be positive");
  require(n_samples > 0, Status::invalid_argument,
          "sample count must be positive");
  GaussianRng rng(seed);
  const double sigma = std::sqrt(variance);
  std::vector<double> u(n_samples);
  for (auto& x : u) x = sigma * rng.next();
  return u;
}

EchoPath gen_sparse_echo_path(int length, int num_active, double decay_rate,
                              uint64_t seed) {
  require(length > 0, Status::invalid_argument, "path length must be positive");
  require(num_active > 0 && num_active <= length, Status::invalid_argument,
          "num_active must be in [1, length]");

  GaussianRng rng(seed);
  // Active taps live in the early part of the response, like a real echo
  // path; the window widens when num_active would not fit.
  const int window = std::max(num_active, (3 * length) / 4);

  // Partial Fisher-Yates draw of num_active distinct positions.
  std::vector<int> positions(window);
  for (int i = 0; i < window; ++i) positions[i] = i;
  for (int i = 0; i < num_active; ++i) {
    const int j = i + static_cast<int>(rng.next_u64() % (window - i));
    std::swap(positions[i], positions[j]);
  }

  EchoPath path;
  path.weights.assign(length, 0.0);
  path.profile = {num_active, decay_rate, seed};
  for (int i = 0; i < num_active; ++i) {
    const int pos = positions[i];
    path.weights[pos] =
        rng.next() * std::exp(-decay_rate * pos / static_cast<double>(length));
  }
  double norm = 0.0;
  for (double w : path.weights) norm += w * w;
  require(norm > 0.0, Status::internal_error, "degenerate all-zero path draw");
  norm = 1.0 / std::sqrt(norm);
  for (double& w : path.weights) w *= norm;
  return path;
}

EchoPath flip_path(const EchoPath& path) {
  EchoPath flipped = path;
  for (double& w : flipped.weights) w = -w;
  return flipped;
}

EchoPath load_path_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Status::io_error, "cannot open path file: " + path.string());
  EchoPath result;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    try {
      result.weights.push_back(std::stod(line));
    } catch (const std::exception&) {
      fail(Status::parse_error,
           "invalid coefficient in " + path.string() + ": " + line);
    }
  }
  require(!result.weights.empty(), Status::parse_error,
          "path file holds no coefficients: " + path.string());
  bool any_nonzero = false;
  for (double w : result.weights) {
    require(std::isfinite(w), Status::parse_error,
            "path file holds a non-finite coefficient");
    any_nonzero = any_nonzero || w != 0.0;
  }
  require(any_nonzero, Status::invalid_argument, "path is identically zero");
  return result;
}

void SignalSource::validate() const {
  switch (kind) {
    case Kind::ar1:
      require(std::abs(pole) < 1.0, Status::invalid_argument,
              "AR(1) pole must satisfy |pole| < 1");
      break;
    case Kind::white_gaussian:
      require(variance > 0.0, Status::invalid_argument,
              "white noise variance must be positive");
      break;
    case Kind::pcm_file:
      require(!path.empty(), Status::invalid_argument,
              "pcm_file source needs a path");
      break;
  }
}

std::vector<double> SignalSource::render(size_t n_samples,
                                         uint64_t seed) const {
  validate();
  switch (kind) {
    case Kind::ar1:
      return gen_ar1(pole, n_samples, seed);
    case Kind::white_gaussian:
      return gen_white(variance, n_samples, seed);
    case Kind::pcm_file: {
      WavData wav = load_pcm_wav(path);
      require(wav.samples.size() >= n_samples, Status::invalid_argument,
              "WAV file shorter than the requested run length");
      wav.samples.resize(n_samples);
      return std::move(wav.samples);
    }
  }
  fail(Status::internal_error, "unreachable signal source kind");
}

SystemRun synthesize_desired(const EchoPath& path, std::vector<double> input,
                             double snr_db, uint64_t seed) {
  require(!input.empty(), Status::invalid_argument, "input is empty");
  const size_t n = input.size();
  const int taps = path.length();
  require(taps > 0, Status::invalid_argument, "echo path is empty");

  SystemRun run;
  run.snr_db = snr_db;
  run.clean.resize(n);
  for (size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    const int span = std::min<int>(taps, static_cast<int>(i) + 1);
    for (int m = 0; m < span; ++m) acc += path.weights[m] * input[i - m];
    run.clean[i] = acc;
  }

  double power = 0.0;
  for (double c : run.clean) power += c * c;
  power /= static_cast<double>(n);
  require(power > 0.0, Status::invalid_argument,
          "input produces an all-zero echo; SNR is undefined");

  run.desired = run.clean;
  if (std::isinf(snr_db)) {
    run.noise_variance = 0.0;
  } else {
    run.noise_variance = power * std::pow(10.0, -snr_db / 10.0);
    GaussianRng rng(seed);
    const double sigma = std::sqrt(run.noise_variance);
    for (double& d : run.desired) d += sigma * rng.next();
  }
  run.input = std::move(input);
  return run;
}

namespace {

uint32_t read_u32(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | static_cast<uint32_t>(p[1]) << 8 |
         static_cast<uint32_t>(p[2]) << 16 | static_cast<uint32_t>(p[3]) << 24;
}

uint16_t read_u16(const unsigned char* p) {
  return static_cast<uint16_t>(p[0] | p[1] << 8);
}

}  // namespace

WavData load_pcm_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Status::io_error, "cannot open WAV file: " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());

  require(bytes.size() >= 12 && std::memcmp(bytes.data(), "RIFF", 4) == 0 &&
              std::memcmp(bytes.data() + 8, "WAVE", 4) == 0,
          Status::parse_error, "not a RIFF/WAVE file");

  bool have_fmt = false;
  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t sample_rate = 0;
  const unsigned char* data = nullptr;
  uint32_t data_size = 0;

  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const uint32_t size = read_u32(chunk + 4);
    const size_t body = pos + 8;
    if (body + size > bytes.size())
      fail(Status::parse_error, "truncated WAV chunk");
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      require(size >= 16, Status::parse_error, "fmt chunk too small");
      format = read_u16(bytes.data() + body);
      channels = read_u16(bytes.data() + body + 2);
      sample_rate = read_u32(bytes.data() + body + 4);
      bits = read_u16(bytes.data() + body + 14);
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      data_size = size;
    }
    pos = body + size + (size & 1);  // chunks are word-aligned
  }

  require(have_fmt, Status::parse_error, "missing fmt chunk");
  require(data != nullptr, Status::parse_error, "missing data chunk");
  if (format != 1)
    fail(Status::unsupported_format, "unsupported encoding (PCM only)");
  if (channels != 1)
    fail(Status::unsupported_format, "unsupported channel count");
  if (bits != 16)
    fail(Status::unsupported_format, "unsupported bit depth (16-bit only)");
  if (data_size < 2) fail(Status::parse_error, "empty audio");

  WavData wav;
  wav.sample_rate = sample_rate;
  const size_t count = data_size / 2;
  wav.samples.resize(count);
  for (size_t i = 0; i < count; ++i) {
    const int16_t s =
        static_cast<int16_t>(data[2 * i] | (data[2 * i + 1] << 8));
    wav.samples[i] = s / 32768.0;
  }
  return wav;
}

}  // namespace pnsaf
