// pnsaf command-line front end. Talks to the shared library through the C
// API only.

#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pnsaf.h"

namespace {

int fail_with(pnsaf_status status, const char* what) {
  std::fprintf(stderr, "pnsaf: %s failed: %s (%s)\n", what,
               pnsaf_last_error(), pnsaf_status_name(status));
  return 1;
}

std::string default_out_dir() {
  const char* env = std::getenv("PNSAF_OUT_DIR");
  return env && *env ? env : "pnsaf_out";
}

struct ExperimentHandle {
  pnsaf_experiment* h = nullptr;
  ~ExperimentHandle() { pnsaf_experiment_free(h); }
};

int prepare_experiment(const std::string& config,
                       const std::vector<std::string>& overrides,
                       uint64_t seed, bool seed_set, int threads,
                       ExperimentHandle& exp) {
  pnsaf_status status = pnsaf_experiment_load_file(config.c_str(), &exp.h);
  if (status != PNSAF_OK) return fail_with(status, "loading config");
  for (const auto& o : overrides) {
    status = pnsaf_experiment_override(exp.h, o.c_str());
    if (status != PNSAF_OK) return fail_with(status, "applying override");
  }
  if (seed_set) {
    status = pnsaf_experiment_set_seed(exp.h, seed);
    if (status != PNSAF_OK) return fail_with(status, "setting seed");
  }
  status = pnsaf_experiment_set_threads(exp.h, threads);
  if (status != PNSAF_OK) return fail_with(status, "setting threads");

  const char* notices = pnsaf_experiment_notices(exp.h);
  if (notices && *notices) std::fprintf(stderr, "%s", notices);
  return 0;
}

void print_summary(pnsaf_experiment* exp) {
  char* summary = pnsaf_experiment_summary_json(exp);
  if (summary) {
    std::printf("%s\n", summary);
    pnsaf_string_free(summary);
  }
}

int cmd_design(int subbands, int length, double attenuation,
               const std::string& out_path) {
  pnsaf_bank* bank = nullptr;
  pnsaf_status status =
      pnsaf_bank_design(subbands, length, attenuation, &bank);
  if (status != PNSAF_OK) return fail_with(status, "bank design");

  const int32_t taps = pnsaf_bank_prototype_length(bank);
  std::vector<double> coeffs(taps);
  pnsaf_bank_prototype_taps(bank, coeffs.data(), coeffs.size());

  FILE* out = std::fopen(out_path.c_str(), "wb");
  if (!out) {
    std::fprintf(stderr, "pnsaf: cannot write %s\n", out_path.c_str());
    pnsaf_bank_free(bank);
    return 1;
  }
  for (double c : coeffs) std::fprintf(out, "%.17g\n", c);
  std::fclose(out);

  int grid = 8 * taps;
  while (grid & (grid - 1)) ++grid;  // next power of two
  if (grid < 1024) grid = 1024;
  pnsaf_bank_quality quality;
  status = pnsaf_bank_quality_report(bank, grid, &quality);
  pnsaf_bank_free(bank);
  if (status != PNSAF_OK) return fail_with(status, "quality report");

  const std::string report_path = out_path + ".report.txt";
  FILE* report = std::fopen(report_path.c_str(), "wb");
  const char* fmt =
      "subbands: %d\nprototype_length: %d\n"
      "stopband_attenuation_db: %.3f\namplitude_distortion_db: %.3f\n"
      "max_alias_level_db: %.3f\n";
  std::printf(fmt, subbands, taps, quality.stopband_attenuation_db,
              quality.amplitude_distortion_db, quality.max_alias_level_db);
  if (report) {
    std::fprintf(report, fmt, subbands, taps,
                 quality.stopband_attenuation_db,
                 quality.amplitude_distortion_db, quality.max_alias_level_db);
    std::fclose(report);
  }
  std::printf("wrote %s and %s\n", out_path.c_str(), report_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Subband adaptive filtering benchmark (NSAF / IPNSAF family)"};
  app.require_subcommand(1);

  // design
  auto* design = app.add_subcommand(
      "design", "Design an analysis prototype and report bank quality");
  int subbands = 4;
  int length = 0;
  double attenuation = 60.0;
  std::string design_out = "prototype.csv";
  design->add_option("--subbands", subbands, "Number of subbands")
      ->check(CLI::PositiveNumber);
  design->add_option("--length", length,
                     "Prototype length (default 8x subbands)");
  design->add_option("--attenuation", attenuation,
                     "Target stopband attenuation in dB");
  design->add_option("--out", design_out, "Coefficient output file");

  // shared run/sweep options
  std::string config, out_dir;
  std::vector<std::string> overrides;
  uint64_t seed = 0;
  int threads = 1;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config, "Experiment config (JSON)")
        ->required();
    cmd->add_option("--out", out_dir, "Output directory");
    cmd->add_option("--override", overrides,
                    "key.path=value config override (repeatable)");
    cmd->add_option("--seed", seed, "Base seed override");
    cmd->add_option("--threads", threads, "Worker thread cap")
        ->check(CLI::PositiveNumber);
  };

  auto* run = app.add_subcommand("run", "Run an experiment ensemble");
  add_common(run);

  auto* swp = app.add_subcommand("sweep", "Sweep one parameter");
  std::string param;
  std::string values;
  add_common(swp);
  swp->add_option("--param", param, "lambda | mu | subbands | snr_db")
      ->required();
  swp->add_option("--values", values, "Comma-separated values")->required();

  CLI11_PARSE(app, argc, argv);

  if (design->parsed()) {
    if (length == 0) length = subbands == 1 ? 1 : 8 * subbands;
    return cmd_design(subbands, length, attenuation, design_out);
  }

  if (out_dir.empty()) out_dir = default_out_dir();
  const bool seed_set = run->count("--seed") > 0 || swp->count("--seed") > 0;

  ExperimentHandle exp;
  const int prep =
      prepare_experiment(config, overrides, seed, seed_set, threads, exp);
  if (prep != 0) return prep;

  pnsaf_status status;
  if (run->parsed()) {
    status = pnsaf_experiment_run(exp.h, out_dir.c_str());
  } else {
    status = pnsaf_experiment_sweep(exp.h, param.c_str(), values.c_str(),
                                    out_dir.c_str());
  }

  if (status == PNSAF_OK || status == PNSAF_E_DIVERGED) print_summary(exp.h);
  if (status != PNSAF_OK)
    return fail_with(status, run->parsed() ? "run" : "sweep");
  std::printf("results written to %s\n", out_dir.c_str());
  return 0;
}
