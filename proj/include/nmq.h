/* nmq — discrete-time simulator for monitored open quantum systems with
 * memory: conveyor-belt collision dynamics, heterodyne monitoring,
 * retrodiction, and causal spectral factorization of coupling kernels.
 *
 * C interface to the shared library. All functions return nmq_status; on
 * failure nmq_last_error() carries a human-readable message (thread-local).
 * Handles are opaque and must be released with their matching free call.
 */
#ifndef NMQ_H
#define NMQ_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum nmq_status {
    NMQ_OK = 0,
    NMQ_ERR_CONFIG = 1,   /* malformed or inconsistent configuration */
    NMQ_ERR_NUMERIC = 2,  /* numeric failure (indefinite input, degenerate state, ...) */
    NMQ_ERR_IO = 3,       /* file system failure */
    NMQ_ERR_INVALID = 4   /* null handle or bad argument */
} nmq_status;

/* Library version string, e.g. "0.1.0". */
const char* nmq_version(void);

/* Message describing the most recent failure on this thread. Never NULL. */
const char* nmq_last_error(void);

/* ---- experiments --------------------------------------------------------- */

typedef struct nmq_experiment nmq_experiment;

/* Parses a JSON experiment configuration (strict: unknown keys rejected). */
nmq_status nmq_experiment_parse(const char* json_text, nmq_experiment** out);

/* Loads and parses a JSON experiment configuration file. */
nmq_status nmq_experiment_load(const char* path, nmq_experiment** out);

void nmq_experiment_free(nmq_experiment* exp);

/* Overrides applied after parsing. */
nmq_status nmq_experiment_set_seed(nmq_experiment* exp, uint64_t seed);
nmq_status nmq_experiment_set_output_dir(nmq_experiment* exp, const char* dir);
nmq_status nmq_experiment_set_threads(nmq_experiment* exp, int threads);
/* format: "csv", "json", or "csv,json". */
nmq_status nmq_experiment_set_format(nmq_experiment* exp, const char* format);

/* Runs one subcommand: "factorize" | "trajectory" | "ensemble" |
 * "nonselective" | "validate". Output files plus manifest.json are written
 * into the configured directory. "validate" returns NMQ_ERR_NUMERIC when a
 * check fails; the per-check report is available via nmq_experiment_report.
 */
nmq_status nmq_experiment_run(nmq_experiment* exp, const char* subcommand);

/* Report text produced by the last nmq_experiment_run on this handle
 * (pass/fail lines for "validate", a short summary otherwise). Never NULL;
 * owned by the handle. */
const char* nmq_experiment_report(const nmq_experiment* exp);

/* ---- array-level helpers --------------------------------------------------
 * Complex arrays are passed as interleaved doubles (re, im), length 2*n.
 */

/* alpha_m = dt * sum_k kappa_{m+k} * conj(kappa_k), m = 0..n-1. */
nmq_status nmq_kernel_reconstruct(double dt, size_t n, const double* kappa,
                                  double* alpha_out);

/* Causal spectral factorization of an m-lag correlation into an n_out-tap
 * kernel. residual_out (optional) receives the reconstruction residual. */
nmq_status nmq_kernel_factorize(double dt, size_t m, const double* alpha,
                                size_t n_out, double* kappa_out, double* residual_out);

/* i.i.d. circularly symmetric complex Gaussian bins, E|xi|^2 = 1,
 * deterministic in seed. */
nmq_status nmq_white_noise(size_t n, double dt, uint64_t seed, double* out);

#ifdef __cplusplus
}
#endif

#endif /* NMQ_H */
