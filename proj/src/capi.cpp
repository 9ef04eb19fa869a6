#include "pnsaf.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <filesystem>
#include <fstream>
#include <new>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "config.hpp"
#include "errors.hpp"
#include "harness.hpp"
#include "saf_engine.hpp"

struct pnsaf_bank {
  pnsaf::AnalysisBank bank;
};

struct pnsaf_engine {
  pnsaf::SafEngine engine;
};

struct pnsaf_experiment {
  std::string config_text;
  std::string notices;  // newline-joined
  int threads = 1;
  std::string summary;  // JSON, filled by run/sweep
};

namespace {

thread_local std::string t_last_error;

pnsaf_status to_status(pnsaf::Status s) {
  using pnsaf::Status;
  switch (s) {
    case Status::ok: return PNSAF_OK;
    case Status::invalid_argument: return PNSAF_E_INVALID_ARGUMENT;
    case Status::io_error: return PNSAF_E_IO;
    case Status::parse_error: return PNSAF_E_PARSE;
    case Status::unsupported_format: return PNSAF_E_UNSUPPORTED_FORMAT;
    case Status::diverged: return PNSAF_E_DIVERGED;
    case Status::internal_error: return PNSAF_E_INTERNAL;
  }
  return PNSAF_E_INTERNAL;
}

// Runs the body and maps exceptions to status codes.
template <typename Fn>
pnsaf_status guarded(Fn&& fn) {
  try {
    fn();
    t_last_error.clear();
    return PNSAF_OK;
  } catch (const pnsaf::Error& e) {
    t_last_error = e.what();
    return to_status(e.status());
  } catch (const std::bad_alloc&) {
    t_last_error = "out of memory";
    return PNSAF_E_INTERNAL;
  } catch (const std::exception& e) {
    t_last_error = e.what();
    return PNSAF_E_INTERNAL;
  }
}

pnsaf_status invalid(const char* message) {
  t_last_error = message;
  return PNSAF_E_INVALID_ARGUMENT;
}

pnsaf_status copy_out(std::span<const double> src, double* out,
                      size_t capacity) {
  if (!out) return invalid("out is NULL");
  if (capacity < src.size()) return invalid("output capacity too small");
  std::memcpy(out, src.data(), src.size() * sizeof(double));
  return PNSAF_OK;
}

pnsaf_status load_experiment(std::string text, pnsaf_experiment** out) {
  if (!out) return invalid("out is NULL");
  *out = nullptr;
  return guarded([&] {
    // Parse eagerly so malformed configs fail at load time.
    const pnsaf::ParsedConfig parsed = pnsaf::parse_config_text(text);
    auto handle = std::make_unique<pnsaf_experiment>();
    handle->config_text = std::move(text);
    std::ostringstream joined;
    for (const auto& n : parsed.notices) joined << n << "\n";
    handle->notices = joined.str();
    *out = handle.release();
  });
}

std::string summary_json(const std::vector<pnsaf::EnsembleResult>& results) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : results) {
    nlohmann::json entry;
    entry["subbands"] = r.spec.num_subbands;
    entry["snr_db"] = std::isinf(r.spec.snr_db)
                          ? nlohmann::json("inf")
                          : nlohmann::json(r.spec.snr_db);
    nlohmann::json algos = nlohmann::json::array();
    for (const auto& a : r.algorithms) {
      nlohmann::json e = {{"name", a.name},
                          {"steady_state_nmsd_db", a.steady_state_nmsd_db},
                          {"diverged_trials", a.diverged_trials}};
      const auto t20 = a.time_to_db(-20.0, r.spec.num_subbands);
      e["time_to_minus20db_fullband"] =
          t20 ? nlohmann::json(*t20) : nlohmann::json(nullptr);
      algos.push_back(e);
    }
    entry["algorithms"] = algos;
    entry["ranking"] = r.ranking();
    out.push_back(entry);
  }
  return out.dump(2);
}

int total_diverged(const pnsaf::EnsembleResult& r) {
  int d = 0;
  for (const auto& a : r.algorithms) d += a.diverged_trials;
  return d;
}

}  // namespace

extern "C" {

const char* pnsaf_status_name(pnsaf_status status) {
  switch (status) {
    case PNSAF_OK: return "ok";
    case PNSAF_E_INVALID_ARGUMENT: return "invalid_argument";
    case PNSAF_E_IO: return "io_error";
    case PNSAF_E_PARSE: return "parse_error";
    case PNSAF_E_UNSUPPORTED_FORMAT: return "unsupported_format";
    case PNSAF_E_DIVERGED: return "diverged";
    case PNSAF_E_INTERNAL: return "internal_error";
  }
  return "unknown";
}

const char* pnsaf_last_error(void) { return t_last_error.c_str(); }

const char* pnsaf_version(void) { return "0.1.0"; }

/* ---- bank ---------------------------------------------------------------*/

pnsaf_status pnsaf_bank_design(int32_t num_subbands, int32_t prototype_length,
                               double attenuation_db, pnsaf_bank** out_bank) {
  if (!out_bank) return invalid("out_bank is NULL");
  *out_bank = nullptr;
  return guarded([&] {
    auto handle = std::make_unique<pnsaf_bank>();
    handle->bank =
        pnsaf::design_bank(num_subbands, prototype_length, attenuation_db);
    *out_bank = handle.release();
  });
}

void pnsaf_bank_free(pnsaf_bank* bank) { delete bank; }

int32_t pnsaf_bank_num_subbands(const pnsaf_bank* bank) {
  return bank ? bank->bank.num_subbands() : 0;
}

int32_t pnsaf_bank_prototype_length(const pnsaf_bank* bank) {
  return bank ? bank->bank.prototype.length() : 0;
}

pnsaf_status pnsaf_bank_prototype_taps(const pnsaf_bank* bank, double* taps,
                                       size_t capacity) {
  if (!bank || !taps) return invalid("bank or taps is NULL");
  const auto& t = bank->bank.prototype.taps;
  if (capacity < t.size()) return invalid("taps capacity too small");
  std::memcpy(taps, t.data(), t.size() * sizeof(double));
  return PNSAF_OK;
}

pnsaf_status pnsaf_bank_quality_report(const pnsaf_bank* bank,
                                       int32_t fft_size,
                                       pnsaf_bank_quality* out) {
  if (!bank || !out) return invalid("bank or out is NULL");
  return guarded([&] {
    const auto report = pnsaf::bank_quality_report(bank->bank, fft_size);
    out->stopband_attenuation_db = report.stopband_attenuation_db;
    out->amplitude_distortion_db = report.amplitude_distortion_db;
    out->max_alias_level_db = report.max_alias_level_db;
  });
}

/* ---- engine -------------------------------------------------------------*/

void pnsaf_engine_config_init(pnsaf_engine_config* config) {
  if (!config) return;
  std::memset(config, 0, sizeof *config);
  config->filter_length = 512;
  config->num_subbands = 4;
  config->regularization = 1e-3;
  config->gain_kind = PNSAF_GAIN_IDENTITY;
  config->gain_alpha = 0.0;
  config->gain_xi = 1e-3;
  config->step_kind = PNSAF_STEP_FIXED;
  config->step_mu = 1.0;
  config->step_gamma = 9.0;
  config->step_lambda = 3.5;
  config->step_kappa = 1.0;
  config->noise_variance = 0.0;
}

pnsaf_status pnsaf_engine_create(const pnsaf_engine_config* config,
                                 const pnsaf_bank* bank,
                                 pnsaf_engine** out_engine) {
  if (!config || !bank || !out_engine)
    return invalid("config, bank, or out_engine is NULL");
  *out_engine = nullptr;
  return guarded([&] {
    pnsaf::SafConfig cfg;
    cfg.filter_length = config->filter_length;
    cfg.num_subbands = config->num_subbands;
    cfg.delta = config->regularization;
    cfg.gain_rule = config->gain_kind == PNSAF_GAIN_IPNLMS
                        ? pnsaf::GainRule::ipnlms(config->gain_alpha,
                                                  config->gain_xi)
                        : pnsaf::GainRule::identity();
    switch (config->step_kind) {
      case PNSAF_STEP_FIXED:
        cfg.step_controller = pnsaf::StepController::fixed(config->step_mu);
        break;
      case PNSAF_STEP_SET_MEMBERSHIP:
        cfg.step_controller = pnsaf::StepController::set_membership(
            config->step_gamma, config->noise_variance, config->num_subbands);
        break;
      case PNSAF_STEP_SHRINKAGE_VSS:
        cfg.step_controller = pnsaf::StepController::shrinkage_vss(
            config->step_lambda, config->step_kappa, config->noise_variance,
            config->num_subbands, config->filter_length);
        break;
      default:
        pnsaf::fail(pnsaf::Status::invalid_argument, "unknown step kind");
    }
    *out_engine = new pnsaf_engine{pnsaf::SafEngine(cfg, bank->bank)};
  });
}

void pnsaf_engine_free(pnsaf_engine* engine) { delete engine; }

pnsaf_status pnsaf_engine_process(pnsaf_engine* engine, const double* input,
                                  const double* desired, size_t n_samples) {
  if (!engine || !input || !desired)
    return invalid("engine, input, or desired is NULL");
  const size_t n =
      static_cast<size_t>(engine->engine.config().num_subbands);
  if (n_samples == 0 || n_samples % n != 0)
    return invalid("n_samples must be a nonzero multiple of num_subbands");
  return guarded([&] {
    for (size_t off = 0; off < n_samples; off += n)
      engine->engine.process_block({input + off, n}, {desired + off, n});
  });
}

pnsaf_status pnsaf_engine_weights(const pnsaf_engine* engine, double* out,
                                  size_t capacity) {
  if (!engine) return invalid("engine is NULL");
  return copy_out(engine->engine.weights(), out, capacity);
}

pnsaf_status pnsaf_engine_last_steps(const pnsaf_engine* engine, double* out,
                                     size_t capacity) {
  if (!engine) return invalid("engine is NULL");
  return copy_out(engine->engine.last_steps(), out, capacity);
}

pnsaf_status pnsaf_engine_last_errors(const pnsaf_engine* engine, double* out,
                                      size_t capacity) {
  if (!engine) return invalid("engine is NULL");
  return copy_out(engine->engine.last_errors(), out, capacity);
}

uint64_t pnsaf_engine_iteration(const pnsaf_engine* engine) {
  return engine ? engine->engine.iteration() : 0;
}

pnsaf_status pnsaf_engine_reset(pnsaf_engine* engine) {
  if (!engine) return invalid("engine is NULL");
  return guarded([&] { engine->engine.reset(); });
}

/* ---- experiments --------------------------------------------------------*/

pnsaf_status pnsaf_experiment_load_file(const char* path,
                                        pnsaf_experiment** out) {
  if (!path) return invalid("path is NULL");
  std::string text;
  const pnsaf_status read = guarded([&] {
    std::ifstream in(path);
    if (!in)
      pnsaf::fail(pnsaf::Status::io_error,
                  std::string("cannot open config: ") + path);
    text.assign(std::istreambuf_iterator<char>(in),
                std::istreambuf_iterator<char>());
  });
  if (read != PNSAF_OK) return read;
  return load_experiment(std::move(text), out);
}

pnsaf_status pnsaf_experiment_load_string(const char* json_text,
                                          pnsaf_experiment** out) {
  if (!json_text) return invalid("json_text is NULL");
  return load_experiment(json_text, out);
}

void pnsaf_experiment_free(pnsaf_experiment* experiment) { delete experiment; }

pnsaf_status pnsaf_experiment_override(pnsaf_experiment* experiment,
                                       const char* assignment) {
  if (!experiment || !assignment)
    return invalid("experiment or assignment is NULL");
  return guarded([&] {
    std::string updated =
        pnsaf::apply_override(experiment->config_text, assignment);
    pnsaf::parse_config_text(updated);  // reject bad values immediately
    experiment->config_text = std::move(updated);
  });
}

pnsaf_status pnsaf_experiment_set_seed(pnsaf_experiment* experiment,
                                       uint64_t seed) {
  if (!experiment) return invalid("experiment is NULL");
  return pnsaf_experiment_override(
      experiment, ("base_seed=" + std::to_string(seed)).c_str());
}

pnsaf_status pnsaf_experiment_set_threads(pnsaf_experiment* experiment,
                                          int32_t threads) {
  if (!experiment) return invalid("experiment is NULL");
  if (threads < 1) return invalid("threads must be at least 1");
  experiment->threads = threads;
  return PNSAF_OK;
}

const char* pnsaf_experiment_notices(const pnsaf_experiment* experiment) {
  return experiment ? experiment->notices.c_str() : "";
}

pnsaf_status pnsaf_experiment_run(pnsaf_experiment* experiment,
                                  const char* out_dir) {
  if (!experiment || !out_dir) return invalid("experiment or out_dir is NULL");
  bool diverged = false;
  const pnsaf_status status = guarded([&] {
    const auto parsed = pnsaf::parse_config_text(experiment->config_text);
    const auto result =
        pnsaf::run_ensemble(parsed.spec, experiment->threads);
    const auto files = pnsaf::export_csv(result, out_dir);
    pnsaf::write_manifest(result, files, out_dir);
    experiment->summary = summary_json({result});
    diverged = total_diverged(result) > 0;
  });
  if (status != PNSAF_OK) return status;
  if (diverged) {
    t_last_error = "one or more trials diverged; outputs are flagged";
    return PNSAF_E_DIVERGED;
  }
  return PNSAF_OK;
}

pnsaf_status pnsaf_experiment_sweep(pnsaf_experiment* experiment,
                                    const char* parameter,
                                    const char* values_csv,
                                    const char* out_dir) {
  if (!experiment || !parameter || !values_csv || !out_dir)
    return invalid("experiment, parameter, values, or out_dir is NULL");
  bool diverged = false;
  const pnsaf_status status = guarded([&] {
    std::vector<double> values;
    std::stringstream ss(values_csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item.empty()) continue;
      try {
        values.push_back(std::stod(item));
      } catch (const std::exception&) {
        pnsaf::fail(pnsaf::Status::invalid_argument,
                    "bad sweep value: " + item);
      }
    }
    pnsaf::require(!values.empty(), pnsaf::Status::invalid_argument,
                   "sweep needs at least one value");

    const auto parsed = pnsaf::parse_config_text(experiment->config_text);
    std::vector<pnsaf::EnsembleResult> results;
    for (double v : values) {
      auto spec = pnsaf::apply_sweep_value(parsed.spec, parameter, v);
      auto result = pnsaf::run_ensemble(spec, experiment->threads);
      std::ostringstream sub;
      sub << parameter << "=" << v;
      const std::filesystem::path dir =
          std::filesystem::path(out_dir) / sub.str();
      const auto files = pnsaf::export_csv(result, dir);
      pnsaf::write_manifest(result, files, dir);
      diverged = diverged || total_diverged(result) > 0;
      results.push_back(std::move(result));
    }
    experiment->summary = summary_json(results);
  });
  if (status != PNSAF_OK) return status;
  if (diverged) {
    t_last_error = "one or more trials diverged; outputs are flagged";
    return PNSAF_E_DIVERGED;
  }
  return PNSAF_OK;
}

char* pnsaf_experiment_summary_json(const pnsaf_experiment* experiment) {
  if (!experiment || experiment->summary.empty()) return nullptr;
  char* out = static_cast<char*>(std::malloc(experiment->summary.size() + 1));
  if (!out) return nullptr;
  std::memcpy(out, experiment->summary.c_str(),
              experiment->summary.size() + 1);
  return out;
}

void pnsaf_string_free(char* text) { std::free(text); }

} /* extern "C" */
