/* pnsaf — proportionate normalized subband adaptive filtering.
 *
 * C interface to the shared library: opaque handles, status codes, no
 * ownership surprises. Every function that can fail returns a pnsaf_status;
 * pnsaf_last_error() describes the most recent failure on the calling
 * thread. Handles are freed with their matching *_free function; passing
 * NULL to a *_free is a no-op.
 */
#ifndef PNSAF_H
#define PNSAF_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pnsaf_status {
  PNSAF_OK = 0,
  PNSAF_E_INVALID_ARGUMENT = 1,
  PNSAF_E_IO = 2,
  PNSAF_E_PARSE = 3,
  PNSAF_E_UNSUPPORTED_FORMAT = 4,
  PNSAF_E_DIVERGED = 5,
  PNSAF_E_INTERNAL = 6
} pnsaf_status;

const char* pnsaf_status_name(pnsaf_status status);
const char* pnsaf_last_error(void); /* thread-local; valid until next call */
const char* pnsaf_version(void);

/* ---- analysis filter bank ---------------------------------------------- */

typedef struct pnsaf_bank pnsaf_bank;

/* Designs a cosine-modulated analysis bank: num_subbands branches from a
 * linear-phase prototype of prototype_length taps targeting the given
 * stopband attenuation. Deterministic for fixed inputs. */
pnsaf_status pnsaf_bank_design(int32_t num_subbands, int32_t prototype_length,
                               double attenuation_db, pnsaf_bank** out_bank);
void pnsaf_bank_free(pnsaf_bank* bank);

int32_t pnsaf_bank_num_subbands(const pnsaf_bank* bank);
int32_t pnsaf_bank_prototype_length(const pnsaf_bank* bank);
pnsaf_status pnsaf_bank_prototype_taps(const pnsaf_bank* bank, double* taps,
                                       size_t capacity);

typedef struct pnsaf_bank_quality {
  double stopband_attenuation_db; /* prototype rejection beyond pi/N */
  double amplitude_distortion_db; /* peak deviation of sum |H_i|^2 from mean */
  double max_alias_level_db;      /* peak adjacent-band overlap product */
} pnsaf_bank_quality;

/* fft_size: frequency-grid resolution, a power of two >= 8x the prototype
 * length. */
pnsaf_status pnsaf_bank_quality_report(const pnsaf_bank* bank,
                                       int32_t fft_size,
                                       pnsaf_bank_quality* out);

/* ---- adaptive engine ---------------------------------------------------- */

typedef enum pnsaf_gain_kind {
  PNSAF_GAIN_IDENTITY = 0, /* plain NSAF */
  PNSAF_GAIN_IPNLMS = 1    /* magnitude-proportionate blend */
} pnsaf_gain_kind;

typedef enum pnsaf_step_kind {
  PNSAF_STEP_FIXED = 0,
  PNSAF_STEP_SET_MEMBERSHIP = 1,
  PNSAF_STEP_SHRINKAGE_VSS = 2
} pnsaf_step_kind;

typedef struct pnsaf_engine_config {
  int32_t filter_length; /* adaptive taps */
  int32_t num_subbands;  /* must match the bank */
  double regularization; /* update denominator offset, >= 0 */

  pnsaf_gain_kind gain_kind;
  double gain_alpha; /* ipnlms blend, [-1, 1) */
  double gain_xi;    /* ipnlms divide guard, > 0 */

  pnsaf_step_kind step_kind;
  double step_mu;     /* fixed: (0, 2) */
  double step_gamma;  /* set-membership bound scale */
  double step_lambda; /* shrinkage threshold scale */
  double step_kappa;  /* shrinkage forgetting scale, [1, 6] */

  double noise_variance; /* required by the adaptive step kinds */
} pnsaf_engine_config;

/* Fills a config with the library defaults (identity gains, fixed step 1.0,
 * 512 taps, 4 subbands, regularization 1e-3). */
void pnsaf_engine_config_init(pnsaf_engine_config* config);

typedef struct pnsaf_engine pnsaf_engine;

pnsaf_status pnsaf_engine_create(const pnsaf_engine_config* config,
                                 const pnsaf_bank* bank,
                                 pnsaf_engine** out_engine);
void pnsaf_engine_free(pnsaf_engine* engine);

/* Feeds fullband samples; n_samples must be a multiple of the subband
 * count (each block of N samples is one adaptation step). Returns
 * PNSAF_E_DIVERGED if the weights go non-finite. */
pnsaf_status pnsaf_engine_process(pnsaf_engine* engine, const double* input,
                                  const double* desired, size_t n_samples);

pnsaf_status pnsaf_engine_weights(const pnsaf_engine* engine, double* out,
                                  size_t capacity);
pnsaf_status pnsaf_engine_last_steps(const pnsaf_engine* engine, double* out,
                                     size_t capacity);
pnsaf_status pnsaf_engine_last_errors(const pnsaf_engine* engine, double* out,
                                      size_t capacity);
uint64_t pnsaf_engine_iteration(const pnsaf_engine* engine);
pnsaf_status pnsaf_engine_reset(pnsaf_engine* engine);

/* ---- experiments -------------------------------------------------------- */

/* A declarative benchmark scenario loaded from a JSON config document. Runs
 * a seeded ensemble of system-identification trials and writes one CSV per
 * algorithm plus manifest.json into an output directory. */
typedef struct pnsaf_experiment pnsaf_experiment;

pnsaf_status pnsaf_experiment_load_file(const char* path,
                                        pnsaf_experiment** out);
pnsaf_status pnsaf_experiment_load_string(const char* json_text,
                                          pnsaf_experiment** out);
void pnsaf_experiment_free(pnsaf_experiment* experiment);

/* "key.path=value" applied on top of the loaded document. */
pnsaf_status pnsaf_experiment_override(pnsaf_experiment* experiment,
                                       const char* assignment);
pnsaf_status pnsaf_experiment_set_seed(pnsaf_experiment* experiment,
                                       uint64_t seed);
pnsaf_status pnsaf_experiment_set_threads(pnsaf_experiment* experiment,
                                          int32_t threads);

/* Newline-separated notices about defaulted config keys ("" when none). */
const char* pnsaf_experiment_notices(const pnsaf_experiment* experiment);

/* Runs the ensemble and exports CSVs + manifest. Returns PNSAF_E_DIVERGED
 * when any trial diverged (outputs are still written, flagged in the
 * manifest). */
pnsaf_status pnsaf_experiment_run(pnsaf_experiment* experiment,
                                  const char* out_dir);

/* One ensemble per comma-separated value, each exported into a
 * parameter=value subdirectory of out_dir. parameter is one of lambda, mu,
 * subbands, snr_db. */
pnsaf_status pnsaf_experiment_sweep(pnsaf_experiment* experiment,
                                    const char* parameter,
                                    const char* values_csv,
                                    const char* out_dir);

/* JSON summary of the last run (steady-state NMSD, convergence, divergence
 * counts per algorithm). Caller frees with pnsaf_string_free. NULL before
 * the first run. */
char* pnsaf_experiment_summary_json(const pnsaf_experiment* experiment);
void pnsaf_string_free(char* text);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* PNSAF_H */
