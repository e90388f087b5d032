#ifndef SSMGD_H
#define SSMGD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum {
  SSMGD_STATUS_OK = 0,
  SSMGD_STATUS_NULL_POINTER = 1,
  SSMGD_STATUS_DOMAIN = 2,
  SSMGD_STATUS_NON_STOCHASTIC = 3,
  SSMGD_STATUS_NO_UNIQUE_STATIONARY = 4,
  SSMGD_STATUS_FIT = 5,
  SSMGD_STATUS_DIMENSION_MISMATCH = 6,
  SSMGD_STATUS_SINGULAR = 7,
  SSMGD_STATUS_NON_FINITE = 8,
  SSMGD_STATUS_CONFIG = 9,
  SSMGD_STATUS_IO = 10,
  SSMGD_STATUS_BUFFER_TOO_SMALL = 11,
  SSMGD_STATUS_PANIC = 12,
} SsmgdStatus;

/**
 * Bound variant selector.
 */
typedef enum {
  SSMGD_VARIANT_PAPER = 0,
  SSMGD_VARIANT_CONSERVATIVE = 1,
} SsmgdVariant;

/**
 * Opaque finite-state chain.
 */
typedef struct SsmgdChain SsmgdChain;

/**
 * Opaque gradient family.
 */
typedef struct SsmgdFamily SsmgdFamily;

/**
 * Assumption constants of a family under a stationary law.
 */
typedef struct {
  double sigma2;
  double kappa;
  double eta;
  double alpha;
} SsmgdCertificate;

/**
 * Constants shared by the sampling-error bounds.
 */
typedef struct {
  double theta;
  double alpha;
  double sigma2;
  double eta;
  double delta;
} SsmgdBoundInputs;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length excluding the NUL.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t ssmgd_last_error_message(char *buf, size_t len);

/**
 * Two-state chain `[[1−p, p], [q, 1−q]]`.
 *
 * # Safety
 * `out` must be valid for writing a pointer.
 */
SsmgdStatus ssmgd_chain_two_state(double p, double q, SsmgdChain **out);

/**
 * Lazy walk on an `n`-cycle with holding probability `h`.
 *
 * # Safety
 * `out` must be valid for writing a pointer.
 */
SsmgdStatus ssmgd_chain_cycle_walk(size_t n, double h, SsmgdChain **out);

/**
 * Truncated renewal chain with tail exponent `k` on `m` states.
 *
 * # Safety
 * `out` must be valid for writing a pointer.
 */
SsmgdStatus ssmgd_chain_renewal_tail(double k, size_t m, SsmgdChain **out);

/**
 * Chain with independent draws from `rho[0..n]`.
 *
 * # Safety
 * `rho` must be valid for `n` reads and `out` for writing a pointer.
 */
SsmgdStatus ssmgd_chain_iid(const double *rho, size_t n, SsmgdChain **out);

/**
 * Chain from a row-major `n × n` transition matrix.
 *
 * # Safety
 * `transition` must be valid for `n * n` reads and `out` for writing a pointer.
 */
SsmgdStatus ssmgd_chain_from_matrix(const double *transition, size_t n, SsmgdChain **out);

/**
 * Releases a chain. Null is ignored.
 *
 * # Safety
 * `chain` must come from a chain constructor and not be used afterwards.
 */
void ssmgd_chain_free(SsmgdChain *chain);

/**
 * # Safety
 * `chain` must be a live handle and `out` valid for writing.
 */
SsmgdStatus ssmgd_chain_n_states(const SsmgdChain *chain, size_t *out);

/**
 * Writes the stationary distribution into `out[0..n_states]`.
 *
 * # Safety
 * `chain` must be a live handle and `out` valid for `len` writes.
 */
SsmgdStatus ssmgd_chain_stationary(const SsmgdChain *chain, double *out, size_t len);

/**
 * φ_t and β_t for `t = 1..=horizon`, written to `phi[t−1]` and `beta[t−1]`.
 * Either output may be null to skip it.
 *
 * # Safety
 * `chain` must be a live handle; non-null outputs must hold `horizon` values.
 */
SsmgdStatus ssmgd_mixing_profile(const SsmgdChain *chain,
                                 size_t horizon,
                                 double *phi,
                                 double *beta);

/**
 * Majorizing `D r^t` envelope of `seq[0..len]` (index `t − 1` holds time `t`).
 * The all-zero sequence yields `D = r = 0`.
 *
 * # Safety
 * `seq` must be valid for `len` reads; `d` and `r` valid for writing.
 */
SsmgdStatus ssmgd_fit_exponential_envelope(const double *seq, size_t len, double *d, double *r);

/**
 * Random quadratic family with spectra in `[kappa, eta]`.
 *
 * # Safety
 * `out` must be valid for writing a pointer.
 */
SsmgdStatus ssmgd_family_random_quadratic(size_t dim,
                                          size_t n_states,
                                          double kappa,
                                          double eta,
                                          double noise_scale,
                                          uint64_t seed,
                                          SsmgdFamily **out);

/**
 * Gaussian-kernel least squares on `m` grid points with `sin(2πx)` labels plus
 * uniform noise of amplitude `noise`.
 *
 * # Safety
 * `out` must be valid for writing a pointer.
 */
SsmgdStatus ssmgd_family_kernel(size_t m,
                                double bandwidth,
                                double lambda,
                                double noise,
                                uint64_t seed,
                                SsmgdFamily **out);

/**
 * Releases a family. Null is ignored.
 *
 * # Safety
 * `family` must come from a family constructor and not be used afterwards.
 */
void ssmgd_family_free(SsmgdFamily *family);

/**
 * Length of the point representation.
 *
 * # Safety
 * `family` must be a live handle and `out` valid for writing.
 */
SsmgdStatus ssmgd_family_dim(const SsmgdFamily *family, size_t *out);

/**
 * Certificate of `family` under the stationary law of `chain`.
 *
 * # Safety
 * Handles must be live and `out` valid for writing.
 */
SsmgdStatus ssmgd_certify(const SsmgdFamily *family,
                          const SsmgdChain *chain,
                          SsmgdCertificate *out);

/**
 * Minimizer `w*` of the stationary risk, written to `out[0..dim]`.
 *
 * # Safety
 * Handles must be live and `out` valid for `len` writes.
 */
SsmgdStatus ssmgd_minimizer(const SsmgdFamily *family,
                            const SsmgdChain *chain,
                            double *out,
                            size_t len);

/**
 * One decomposed run on a stationary path drawn with `path_seed`, step sizes
 * `1/(η t^θ)` with η from the certificate. For each of the `n_checkpoints`
 * strictly increasing times, writes `‖w_t − w*‖`, `‖u_t‖` and `‖v_t‖`; any
 * output may be null to skip it.
 *
 * # Safety
 * Handles must be live; `w1` valid for `dim` reads, `checkpoints` for
 * `n_checkpoints` reads, non-null outputs for `n_checkpoints` writes.
 */
SsmgdStatus ssmgd_run_decomposed(const SsmgdFamily *family,
                                 const SsmgdChain *chain,
                                 double theta,
                                 uint64_t path_seed,
                                 const double *w1,
                                 size_t dim,
                                 const size_t *checkpoints,
                                 size_t n_checkpoints,
                                 double *total_err,
                                 double *init_err,
                                 double *samp_err);

/**
 * The constant `C_θ`, θ ∈ (½, 1).
 *
 * # Safety
 * `out` must be valid for writing.
 */
SsmgdStatus ssmgd_c_theta(double theta, double *out);

/**
 * Deterministic bound on `‖u_t‖`.
 *
 * # Safety
 * `out` must be valid for writing.
 */
SsmgdStatus ssmgd_init_bound(size_t t,
                             double theta,
                             double alpha,
                             double r1_norm,
                             SsmgdVariant variant,
                             double *out);

/**
 * Bound on `‖v_t‖²` under `φ_t ≤ D r^t` (θ < 1).
 *
 * # Safety
 * `inputs` must be valid for reading and `out` for writing.
 */
SsmgdStatus ssmgd_samp_bound_exp_phi(size_t t,
                                     const SsmgdBoundInputs *inputs,
                                     double d,
                                     double r,
                                     double *out);

/**
 * Bound on `‖v_t‖²` for θ = 1 and α < ½.
 *
 * # Safety
 * `inputs` must be valid for reading and `out` for writing.
 */
SsmgdStatus ssmgd_samp_bound_theta1(size_t t,
                                    const SsmgdBoundInputs *inputs,
                                    double d,
                                    double r,
                                    double *out);

/**
 * Bound on `‖v_t‖²` from the exact partial sum `S_t = Σ_{i≤t} φ_i`.
 *
 * # Safety
 * `inputs` must be valid for reading and `out` for writing.
 */
SsmgdStatus ssmgd_samp_bound_generic(size_t t,
                                     const SsmgdBoundInputs *inputs,
                                     double partial_sum,
                                     double *out);

/**
 * Rate exponent under `φ_t ~ t^{−k}`; `log_factor` is set when a
 * `(log t)^{1/2}` factor applies.
 *
 * # Safety
 * Outputs must be valid for writing.
 */
SsmgdStatus ssmgd_poly_rate_exponent(double theta, double k, double *exponent, bool *log_factor);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SSMGD_H */
