#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "pnsaf.h"

namespace {

const char* kConfig = R"json({
  "input": {"type": "ar1", "pole": 0.9},
  "filter_length": 32,
  "subbands": 2,
  "snr_db": 30,
  "path": {"type": "synthetic", "num_active": 4, "decay_rate": 1.0},
  "run_length": 4000,
  "ensemble_size": 2,
  "base_seed": 9,
  "algorithms": [
    {"name": "vss", "gain": {"type": "ipnlms"},
     "step": {"type": "shrinkage_vss"}}
  ]
})json";

}  // namespace

TEST_CASE("status names and version") {
  CHECK(std::string(pnsaf_status_name(PNSAF_OK)) == "ok");
  CHECK(std::string(pnsaf_status_name(PNSAF_E_PARSE)) == "parse_error");
  CHECK(pnsaf_version() != nullptr);
}

TEST_CASE("bank design through the C surface") {
  pnsaf_bank* bank = nullptr;
  REQUIRE(pnsaf_bank_design(4, 32, 60.0, &bank) == PNSAF_OK);
  REQUIRE(bank != nullptr);
  CHECK(pnsaf_bank_num_subbands(bank) == 4);
  CHECK(pnsaf_bank_prototype_length(bank) == 32);

  std::vector<double> taps(32);
  CHECK(pnsaf_bank_prototype_taps(bank, taps.data(), taps.size()) == PNSAF_OK);
  for (int n = 0; n < 32; ++n)
    CHECK(std::abs(taps[n] - taps[31 - n]) <= 1e-12);
  CHECK(pnsaf_bank_prototype_taps(bank, taps.data(), 4) ==
        PNSAF_E_INVALID_ARGUMENT);

  pnsaf_bank_quality quality;
  CHECK(pnsaf_bank_quality_report(bank, 4096, &quality) == PNSAF_OK);
  CHECK(quality.stopband_attenuation_db >= 50.0);
  CHECK(quality.amplitude_distortion_db <= 1.0);
  CHECK(pnsaf_bank_quality_report(bank, 100, &quality) ==
        PNSAF_E_INVALID_ARGUMENT);
  CHECK(std::strlen(pnsaf_last_error()) > 0);

  pnsaf_bank_free(bank);

  pnsaf_bank* bad = nullptr;
  CHECK(pnsaf_bank_design(4, 4, 60.0, &bad) == PNSAF_E_INVALID_ARGUMENT);
  CHECK(bad == nullptr);
}

TEST_CASE("engine lifecycle through the C surface") {
  pnsaf_bank* bank = nullptr;
  REQUIRE(pnsaf_bank_design(2, 16, 60.0, &bank) == PNSAF_OK);

  pnsaf_engine_config config;
  pnsaf_engine_config_init(&config);
  config.filter_length = 16;
  config.num_subbands = 2;
  config.gain_kind = PNSAF_GAIN_IPNLMS;
  config.step_kind = PNSAF_STEP_SHRINKAGE_VSS;
  config.noise_variance = 1e-3;

  pnsaf_engine* engine = nullptr;
  REQUIRE(pnsaf_engine_create(&config, bank, &engine) == PNSAF_OK);

  std::vector<double> input(400), desired(400);
  uint64_t state = 12345;
  auto next = [&state]() {
    state = state * 6364136223846793005ull + 1442695040888963407ull;
    return static_cast<double>(state >> 11) / (1ull << 53) - 0.5;
  };
  for (size_t i = 0; i < input.size(); ++i) {
    input[i] = next();
    desired[i] = 0.5 * input[i] + (i >= 3 ? -0.25 * input[i - 3] : 0.0);
  }

  CHECK(pnsaf_engine_process(engine, input.data(), desired.data(), 400) ==
        PNSAF_OK);
  CHECK(pnsaf_engine_iteration(engine) == 200);
  CHECK(pnsaf_engine_process(engine, input.data(), desired.data(), 3) ==
        PNSAF_E_INVALID_ARGUMENT);  // not a multiple of the band count

  std::vector<double> weights(16), steps(2), errors(2);
  CHECK(pnsaf_engine_weights(engine, weights.data(), 16) == PNSAF_OK);
  CHECK(pnsaf_engine_last_steps(engine, steps.data(), 2) == PNSAF_OK);
  CHECK(pnsaf_engine_last_errors(engine, errors.data(), 2) == PNSAF_OK);
  for (double mu : steps) {
    CHECK(mu >= 0.0);
    CHECK(mu < 1.0);
  }

  CHECK(pnsaf_engine_reset(engine) == PNSAF_OK);
  CHECK(pnsaf_engine_iteration(engine) == 0);
  CHECK(pnsaf_engine_weights(engine, weights.data(), 16) == PNSAF_OK);
  for (double w : weights) CHECK(w == 0.0);

  pnsaf_engine_free(engine);
  pnsaf_bank_free(bank);
}

TEST_CASE("engine rejects a mismatched bank") {
  pnsaf_bank* bank = nullptr;
  REQUIRE(pnsaf_bank_design(4, 32, 60.0, &bank) == PNSAF_OK);
  pnsaf_engine_config config;
  pnsaf_engine_config_init(&config);
  config.num_subbands = 2;
  pnsaf_engine* engine = nullptr;
  CHECK(pnsaf_engine_create(&config, bank, &engine) ==
        PNSAF_E_INVALID_ARGUMENT);
  pnsaf_bank_free(bank);
}

TEST_CASE("experiment through the C surface") {
  pnsaf_experiment* exp = nullptr;
  REQUIRE(pnsaf_experiment_load_string(kConfig, &exp) == PNSAF_OK);

  CHECK(pnsaf_experiment_override(exp, "ensemble_size=1") == PNSAF_OK);
  CHECK(pnsaf_experiment_override(exp, "subbands=-1") ==
        PNSAF_E_INVALID_ARGUMENT);
  CHECK(pnsaf_experiment_set_seed(exp, 77) == PNSAF_OK);
  CHECK(pnsaf_experiment_set_threads(exp, 2) == PNSAF_OK);

  const auto dir = std::filesystem::temp_directory_path() / "pnsaf_capi_run";
  std::filesystem::remove_all(dir);
  REQUIRE(pnsaf_experiment_run(exp, dir.c_str()) == PNSAF_OK);
  CHECK(std::filesystem::exists(dir / "vss.csv"));
  CHECK(std::filesystem::exists(dir / "manifest.json"));

  char* summary = pnsaf_experiment_summary_json(exp);
  REQUIRE(summary != nullptr);
  CHECK(std::string(summary).find("steady_state_nmsd_db") !=
        std::string::npos);
  pnsaf_string_free(summary);
  pnsaf_experiment_free(exp);
  std::filesystem::remove_all(dir);
}

TEST_CASE("experiment sweep through the C surface") {
  pnsaf_experiment* exp = nullptr;
  REQUIRE(pnsaf_experiment_load_string(kConfig, &exp) == PNSAF_OK);
  REQUIRE(pnsaf_experiment_override(exp, "ensemble_size=1") == PNSAF_OK);
  REQUIRE(pnsaf_experiment_override(exp, "run_length=2000") == PNSAF_OK);

  const auto dir = std::filesystem::temp_directory_path() / "pnsaf_capi_sweep";
  std::filesystem::remove_all(dir);
  REQUIRE(pnsaf_experiment_sweep(exp, "lambda", "3,4", dir.c_str()) ==
          PNSAF_OK);
  CHECK(std::filesystem::exists(dir / "lambda=3" / "vss.csv"));
  CHECK(std::filesystem::exists(dir / "lambda=4" / "manifest.json"));

  CHECK(pnsaf_experiment_sweep(exp, "lambda", "", dir.c_str()) ==
        PNSAF_E_INVALID_ARGUMENT);
  CHECK(pnsaf_experiment_sweep(exp, "nope", "1", dir.c_str()) ==
        PNSAF_E_INVALID_ARGUMENT);
  pnsaf_experiment_free(exp);
  std::filesystem::remove_all(dir);
}

TEST_CASE("malformed config fails at load with no handle") {
  pnsaf_experiment* exp = nullptr;
  CHECK(pnsaf_experiment_load_string("{", &exp) == PNSAF_E_PARSE);
  CHECK(exp == nullptr);
  CHECK(pnsaf_experiment_load_file("/no/such/file.json", &exp) == PNSAF_E_IO);
  CHECK(exp == nullptr);
}
