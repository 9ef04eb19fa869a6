#include "harness.hpp"

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <thread>
#include <tuple>

#include "diagnostics.hpp"
#include "errors.hpp"

namespace pnsaf {

StepController AlgorithmSpec::make_controller(double noise_variance,
                                              int num_subbands,
                                              int filter_length) const {
  switch (step_kind) {
    case StepController::Kind::fixed:
      return StepController::fixed(mu);
    case StepController::Kind::set_membership:
      return StepController::set_membership(gamma, noise_variance,
                                            num_subbands);
    case StepController::Kind::shrinkage_vss:
      return StepController::shrinkage_vss(lambda, kappa, noise_variance,
                                           num_subbands, filter_length);
  }
  fail(Status::internal_error, "unreachable step kind");
}

void AlgorithmSpec::validate() const {
  require(!name.empty(), Status::invalid_argument,
          "algorithm entries need a name");
  require(delta >= 0.0 && std::isfinite(delta), Status::invalid_argument,
          "delta must be nonnegative");
  switch (step_kind) {
    case StepController::Kind::fixed:
      require(mu > 0.0 && mu < 2.0, Status::invalid_argument,
              "fixed step size must be in (0, 2)");
      break;
    case StepController::Kind::set_membership:
      require(gamma > 0.0, Status::invalid_argument,
              "gamma must be positive");
      break;
    case StepController::Kind::shrinkage_vss:
      require(lambda > 0.0, Status::invalid_argument,
              "lambda must be positive");
      require(kappa >= 1.0 && kappa <= 6.0, Status::invalid_argument,
              "kappa must be in [1, 6]");
      break;
  }
  if (gain.kind == GainRule::Kind::ipnlms)
    GainRule::ipnlms(gain.alpha, gain.xi);  // revalidates the parameters
}

void ExperimentSpec::validate() const {
  input.validate();
  require(filter_length > 0, Status::invalid_argument,
          "filter_length must be positive");
  require(num_subbands >= 1 && num_subbands <= 64, Status::invalid_argument,
          "num_subbands must be in [1, 64]");
  if (num_subbands > 1)
    require(bank_length() >= 2 * num_subbands, Status::invalid_argument,
            "prototype_length must be at least twice the subband count");
  require(std::isfinite(attenuation_db) && attenuation_db > 0.0,
          Status::invalid_argument, "attenuation_db must be positive");
  require(snr_db == std::numeric_limits<double>::infinity() ||
              std::isfinite(snr_db),
          Status::invalid_argument, "snr_db must be finite or +inf");
  if (path.kind == PathSpec::Kind::synthetic) {
    require(path.num_active > 0 && path.num_active <= filter_length,
            Status::invalid_argument,
            "path num_active must be in [1, filter_length]");
  } else {
    require(!path.file.empty(), Status::invalid_argument,
            "file path spec needs a file name");
  }
  require(truncated_length() >= static_cast<uint64_t>(num_subbands),
          Status::invalid_argument, "run_length shorter than one block");
  require(ensemble_size >= 1, Status::invalid_argument,
          "ensemble_size must be at least 1");
  require(metrics.nmsd_stride >= 1, Status::invalid_argument,
          "nmsd_stride must be at least 1");
  require(metrics.erle_window >= 1, Status::invalid_argument,
          "erle_window must be at least 1");
  require(!algorithms.empty(), Status::invalid_argument,
          "experiment needs at least one algorithm");
  for (const auto& a : algorithms) a.validate();
  for (size_t i = 0; i < algorithms.size(); ++i)
    for (size_t j = i + 1; j < algorithms.size(); ++j)
      require(algorithms[i].name != algorithms[j].name,
              Status::invalid_argument, "duplicate algorithm name");
}

uint64_t ExperimentSpec::flip_tick() const {
  if (!path_flip_sample) return 0;
  const uint64_t tick = *path_flip_sample / num_subbands;
  return tick < num_ticks() ? tick : 0;
}

TrialSeeds trial_seeds(uint64_t base_seed, int trial_index) {
  const uint64_t t = static_cast<uint64_t>(trial_index);
  return {base_seed + t, base_seed + t + 1'000'000u,
          base_seed + t + 2'000'000u};
}

const AnalysisBank& cached_bank(int num_subbands, int length,
                                double attenuation_db) {
  static std::mutex mutex;
  static std::map<std::tuple<int, int, double>, std::unique_ptr<AnalysisBank>>
      cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto& slot = cache[{num_subbands, length, attenuation_db}];
  if (!slot)
    slot = std::make_unique<AnalysisBank>(
        design_bank(num_subbands, length, attenuation_db));
  return *slot;
}

namespace {

struct TrialContext {
  SystemRun run;
  EchoPath path;
  uint64_t flip_tick = 0;  // 0 = none
};

EchoPath make_path(const ExperimentSpec& spec, uint64_t path_seed) {
  if (spec.path.kind == PathSpec::Kind::file)
    return load_path_csv(spec.path.file);
  return gen_sparse_echo_path(spec.filter_length, spec.path.num_active,
                              spec.path.decay_rate, path_seed);
}

TrialContext make_trial_context(const ExperimentSpec& spec, int trial_index) {
  const TrialSeeds seeds = trial_seeds(spec.base_seed, trial_index);
  TrialContext ctx;
  ctx.path = make_path(spec, seeds.path);
  require(ctx.path.length() == spec.filter_length, Status::invalid_argument,
          "path length does not match filter_length");
  auto input = spec.input.render(spec.truncated_length(), seeds.input);
  ctx.run = synthesize_desired(ctx.path, std::move(input), spec.snr_db,
                               seeds.noise);
  ctx.flip_tick = spec.flip_tick();
  if (ctx.flip_tick > 0) {
    const uint64_t flip_sample = ctx.flip_tick * spec.num_subbands;
    for (uint64_t n = flip_sample; n < ctx.run.clean.size(); ++n) {
      ctx.run.desired[n] -= 2.0 * ctx.run.clean[n];
      ctx.run.clean[n] = -ctx.run.clean[n];
    }
  }
  return ctx;
}

MetricSeries run_algorithm(const ExperimentSpec& spec,
                           const AlgorithmSpec& algo, const TrialContext& ctx,
                           const AnalysisBank& bank) {
  const int n = spec.num_subbands;
  const int m = spec.filter_length;
  const uint64_t ticks = spec.num_ticks();
  const int stride = spec.metrics.nmsd_stride;

  SafConfig config;
  config.filter_length = m;
  config.num_subbands = n;
  config.delta = algo.delta;
  config.gain_rule = algo.gain;
  config.step_controller =
      algo.make_controller(ctx.run.noise_variance, n, m);
  // Adapt only once the regressors carry a full window of real samples; the
  // gate is shared by every algorithm, so paired comparisons stay fair.
  config.adaptation_delay_ticks = (m + n - 1) / n;
  SafEngine engine(config, bank);

  MetricSeries series;
  series.num_subbands = n;
  const size_t expected = static_cast<size_t>((ticks + stride - 1) / stride);
  series.ticks.reserve(expected);
  series.nmsd_db.reserve(expected);
  series.steps.reserve(expected * n);
  series.abs_err.reserve(expected * n);

  const bool erle = spec.metrics.erle;
  std::vector<double> fullband_error;
  std::vector<double> input_ring;
  size_t ring_head = 0;
  if (erle) {
    fullband_error.resize(ctx.run.input.size());
    input_ring.assign(m, 0.0);
  }

  const auto& w_o = ctx.path.weights;
  std::vector<double> flipped;
  if (ctx.flip_tick > 0) {
    flipped = w_o;
    for (double& w : flipped) w = -w;
  }

  for (uint64_t k = 1; k <= ticks; ++k) {
    const size_t offset = static_cast<size_t>((k - 1)) * n;
    const std::span<const double> in(ctx.run.input.data() + offset, n);
    const std::span<const double> des(ctx.run.desired.data() + offset, n);

    if (erle) {
      // Fullband residual against the weights in force for this block.
      const auto w = engine.weights();
      for (int j = 0; j < n; ++j) {
        input_ring[ring_head] = in[j];
        double y = 0.0;
        size_t idx = ring_head;
        for (int t = 0; t < m; ++t) {
          y += w[t] * input_ring[idx];
          idx = idx == 0 ? m - 1 : idx - 1;
        }
        fullband_error[offset + j] = des[j] - y;
        ring_head = ring_head + 1 == static_cast<size_t>(m) ? 0 : ring_head + 1;
      }
    }

    try {
      engine.process_block(in, des);
    } catch (const Error& e) {
      if (e.status() != Status::diverged) throw;
      series.diverged = true;
      series.diverged_at_tick = k;
      break;
    }

    if ((k - 1) % stride == 0 || k == ticks) {
      const auto& truth =
          (ctx.flip_tick > 0 && k > ctx.flip_tick) ? flipped : w_o;
      series.ticks.push_back(k);
      series.nmsd_db.push_back(nmsd_db(truth, engine.weights()));
      const auto mu = engine.last_steps();
      const auto err = engine.last_errors();
      for (int i = 0; i < n; ++i) {
        series.steps.push_back(mu[i]);
        series.abs_err.push_back(std::abs(err[i]));
      }
    }
  }

  if (erle) {
    const int window = spec.metrics.erle_window;
    std::vector<double> erle_series;
    if (fullband_error.size() >= static_cast<size_t>(window))
      erle_series = erle_db(ctx.run.desired, fullband_error, window);
    series.erle_db.resize(series.ticks.size(), 0.0);
    for (size_t j = 0; j < series.ticks.size(); ++j) {
      const uint64_t sample = series.ticks[j] * n;  // 1-based count
      if (sample >= static_cast<uint64_t>(window) && !erle_series.empty()) {
        const size_t idx =
            std::min(static_cast<size_t>(sample - window),
                     erle_series.size() - 1);
        series.erle_db[j] = erle_series[idx];
      }
    }
  }
  return series;
}

struct Accumulator {
  size_t points = 0;
  int num_subbands = 0;
  bool erle = false;
  std::vector<uint64_t> ticks;
  std::vector<double> msd_linear;       // sum over trials
  std::vector<double> steps;            // sums
  std::vector<double> erle_linear;      // sums
  std::vector<uint32_t> alive;          // trials contributing per point
  int diverged_trials = 0;

  // The grid comes from the spec, not from the first series, so a diverged
  // (truncated) first trial cannot shrink the ensemble.
  explicit Accumulator(const ExperimentSpec& spec) {
    num_subbands = spec.num_subbands;
    erle = spec.metrics.erle;
    const uint64_t total = spec.num_ticks();
    for (uint64_t k = 1; k <= total; ++k)
      if ((k - 1) % spec.metrics.nmsd_stride == 0 || k == total)
        ticks.push_back(k);
    points = ticks.size();
    msd_linear.assign(points, 0.0);
    steps.assign(points * num_subbands, 0.0);
    erle_linear.assign(erle ? points : 0, 0.0);
    alive.assign(points, 0);
  }

  void add(const MetricSeries& series) {
    if (series.diverged) ++diverged_trials;
    const size_t available = series.ticks.size();
    for (size_t j = 0; j < available && j < points; ++j) {
      msd_linear[j] += std::pow(10.0, series.nmsd_db[j] / 10.0);
      for (int i = 0; i < num_subbands; ++i)
        steps[j * num_subbands + i] += series.steps[j * num_subbands + i];
      if (erle)
        erle_linear[j] += std::pow(10.0, series.erle_db[j] / 10.0);
      ++alive[j];
    }
  }

  AlgorithmResult finish(const std::string& name, uint64_t flip_tick) const {
    AlgorithmResult out;
    out.name = name;
    out.ticks = ticks;
    out.diverged_trials = diverged_trials;
    out.nmsd_db.resize(points);
    out.steps.resize(points * num_subbands);
    if (erle) out.erle_db.resize(points);
    for (size_t j = 0; j < points; ++j) {
      const double count = alive[j] > 0 ? alive[j] : 1;
      out.nmsd_db[j] = 10.0 * std::log10(msd_linear[j] / count);
      for (int i = 0; i < num_subbands; ++i)
        out.steps[j * num_subbands + i] = steps[j * num_subbands + i] / count;
      if (erle)
        out.erle_db[j] = 10.0 * std::log10(erle_linear[j] / count);
    }

    // Steady state: mean linear deviation over the last 10000 ticks before
    // the flip (or before the end when there is none).
    const uint64_t window_end =
        flip_tick > 0 ? flip_tick : (ticks.empty() ? 0 : ticks.back());
    const uint64_t window_lo = window_end > 10000 ? window_end - 10000 : 0;
    size_t end = 0;
    while (end < points && ticks[end] <= window_end) ++end;
    size_t begin = end;
    while (begin > 0 && ticks[begin - 1] > window_lo) --begin;
    double acc = 0.0;
    size_t cnt = 0;
    for (size_t j = begin; j < end; ++j, ++cnt) {
      const double count = alive[j] > 0 ? alive[j] : 1;
      acc += msd_linear[j] / count;
    }
    out.steady_state_nmsd_db = cnt > 0 ? 10.0 * std::log10(acc / cnt) : 0.0;
    return out;
  }
};

}  // namespace

MetricSeries run_trial(const ExperimentSpec& spec, const AlgorithmSpec& algo,
                       int trial_index) {
  spec.validate();
  algo.validate();
  const AnalysisBank& bank =
      cached_bank(spec.num_subbands, spec.bank_length(), spec.attenuation_db);
  const TrialContext ctx = make_trial_context(spec, trial_index);
  return run_algorithm(spec, algo, ctx, bank);
}

EnsembleResult run_ensemble(const ExperimentSpec& spec, int threads) {
  spec.validate();
  const AnalysisBank& bank =
      cached_bank(spec.num_subbands, spec.bank_length(), spec.attenuation_db);

  const int trials = spec.ensemble_size;
  const size_t algos = spec.algorithms.size();
  std::vector<Accumulator> acc(algos, Accumulator(spec));

  using TrialOutput = std::vector<MetricSeries>;  // one series per algorithm
  auto run_one = [&](int trial) {
    const TrialContext ctx = make_trial_context(spec, trial);
    TrialOutput out;
    out.reserve(algos);
    for (const auto& algo : spec.algorithms)
      out.push_back(run_algorithm(spec, algo, ctx, bank));
    return out;
  };

  const int workers = std::max(1, std::min(threads, trials));
  if (workers == 1) {
    for (int t = 0; t < trials; ++t) {
      const TrialOutput out = run_one(t);
      for (size_t a = 0; a < algos; ++a) acc[a].add(out[a]);
    }
  } else {
    // Workers fill a slot table; reduction happens in trial order so the
    // result is independent of scheduling.
    std::mutex mutex;
    std::condition_variable ready;
    std::map<int, TrialOutput> done;
    int next_trial = 0;
    std::exception_ptr failure;

    auto worker = [&]() {
      for (;;) {
        int mine;
        {
          std::lock_guard<std::mutex> lock(mutex);
          if (failure || next_trial >= trials) return;
          mine = next_trial++;
        }
        try {
          TrialOutput out = run_one(mine);
          std::lock_guard<std::mutex> lock(mutex);
          done.emplace(mine, std::move(out));
          ready.notify_all();
        } catch (...) {
          std::lock_guard<std::mutex> lock(mutex);
          failure = std::current_exception();
          ready.notify_all();
          return;
        }
      }
    };

    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);

    int reduced = 0;
    {
      std::unique_lock<std::mutex> lock(mutex);
      while (reduced < trials) {
        ready.wait(lock, [&] {
          return failure || done.count(reduced) > 0;
        });
        if (failure) break;
        TrialOutput out = std::move(done.at(reduced));
        done.erase(reduced);
        lock.unlock();
        for (size_t a = 0; a < algos; ++a) acc[a].add(out[a]);
        ++reduced;
        lock.lock();
      }
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
  }

  EnsembleResult result;
  result.spec = spec;
  result.flip_tick = spec.flip_tick();
  result.algorithms.reserve(algos);
  for (size_t a = 0; a < algos; ++a)
    result.algorithms.push_back(
        acc[a].finish(spec.algorithms[a].name, result.flip_tick));
  return result;
}

ExperimentSpec apply_sweep_value(const ExperimentSpec& spec,
                                 const std::string& parameter, double value) {
  ExperimentSpec out = spec;
  if (parameter == "lambda") {
    require(value > 0.0, Status::invalid_argument, "lambda must be positive");
    bool any = false;
    for (auto& a : out.algorithms)
      if (a.step_kind == StepController::Kind::shrinkage_vss) {
        a.lambda = value;
        any = true;
      }
    require(any, Status::invalid_argument,
            "lambda sweep needs a shrinkage_vss algorithm");
  } else if (parameter == "mu") {
    require(value > 0.0 && value < 2.0, Status::invalid_argument,
            "mu must be in (0, 2)");
    bool any = false;
    for (auto& a : out.algorithms)
      if (a.step_kind == StepController::Kind::fixed) {
        a.mu = value;
        any = true;
      }
    require(any, Status::invalid_argument,
            "mu sweep needs a fixed-step algorithm");
  } else if (parameter == "subbands") {
    const int n = static_cast<int>(value);
    require(n >= 1 && n == value, Status::invalid_argument,
            "subbands must be a positive integer");
    out.num_subbands = n;
    out.prototype_length = 0;  // rederive from the subband count
  } else if (parameter == "snr_db") {
    out.snr_db = value;
  } else {
    fail(Status::invalid_argument, "unknown sweep parameter: " + parameter);
  }
  out.validate();
  return out;
}

std::vector<EnsembleResult> sweep(const ExperimentSpec& spec,
                                  const std::string& parameter,
                                  const std::vector<double>& values,
                                  int threads) {
  require(!values.empty(), Status::invalid_argument,
          "sweep needs at least one value");
  std::vector<EnsembleResult> results;
  results.reserve(values.size());
  for (double v : values)
    results.push_back(run_ensemble(apply_sweep_value(spec, parameter, v),
                                   threads));
  return results;
}

std::optional<uint64_t> AlgorithmResult::time_to_db(double threshold_db,
                                                    int num_subbands) const {
  for (size_t j = 0; j < nmsd_db.size(); ++j)
    if (nmsd_db[j] <= threshold_db) return ticks[j] * num_subbands;
  return std::nullopt;
}

const AlgorithmResult& EnsembleResult::algorithm(
    const std::string& name) const {
  for (const auto& a : algorithms)
    if (a.name == name) return a;
  fail(Status::invalid_argument, "no such algorithm in result: " + name);
}

std::vector<std::string> EnsembleResult::ranking() const {
  std::vector<const AlgorithmResult*> order;
  for (const auto& a : algorithms) order.push_back(&a);
  std::stable_sort(order.begin(), order.end(),
                   [](const AlgorithmResult* a, const AlgorithmResult* b) {
                     return a->steady_state_nmsd_db < b->steady_state_nmsd_db;
                   });
  std::vector<std::string> names;
  for (const auto* a : order) names.push_back(a->name);
  return names;
}

namespace {

std::string sanitize_filename(const std::string& name) {
  std::string out;
  for (char c : name) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '-' || c == '_' ||
                    c == '.';
    out.push_back(ok ? c : '_');
  }
  if (out.empty()) out = "algorithm";
  return out;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> export_csv(
    const EnsembleResult& result, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec && !std::filesystem::is_directory(out_dir))
    fail(Status::io_error, "cannot create output directory: " +
                               out_dir.string());

  const int n = result.spec.num_subbands;
  const bool erle = result.spec.metrics.erle;
  std::vector<std::pair<std::string, std::string>> files;

  for (const auto& algo : result.algorithms) {
    const std::string file = sanitize_filename(algo.name) + ".csv";
    std::ofstream out(out_dir / file, std::ios::binary);
    if (!out)
      fail(Status::io_error, "cannot write " + (out_dir / file).string());

    out << "k,fullband_n,algorithm,nmsd_db";
    if (erle) out << ",erle_db";
    for (int i = 0; i < n; ++i) out << ",mu_" << i;
    out << "\n";

    char buf[32];
    for (size_t j = 0; j < algo.ticks.size(); ++j) {
      out << algo.ticks[j] << ',' << algo.ticks[j] * n << ',' << algo.name;
      std::snprintf(buf, sizeof buf, ",%.9e", algo.nmsd_db[j]);
      out << buf;
      if (erle) {
        std::snprintf(buf, sizeof buf, ",%.9e", algo.erle_db[j]);
        out << buf;
      }
      for (int i = 0; i < n; ++i) {
        std::snprintf(buf, sizeof buf, ",%.9e", algo.steps[j * n + i]);
        out << buf;
      }
      out << "\n";
    }
    files.emplace_back(algo.name, file);
  }
  return files;
}

}  // namespace pnsaf
