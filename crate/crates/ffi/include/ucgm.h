#ifndef UCGM_H
#define UCGM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every call.
 */
typedef enum UcgmStatus {
  UCGM_STATUS_OK = 0,
  UCGM_STATUS_NULL_POINTER = 1,
  UCGM_STATUS_INVALID_ARGUMENT = 2,
  UCGM_STATUS_CONFIG = 3,
  UCGM_STATUS_IO = 4,
  UCGM_STATUS_FORMAT = 5,
  UCGM_STATUS_DIMENSION_MISMATCH = 6,
  UCGM_STATUS_NON_FINITE = 7,
  UCGM_STATUS_SINGULAR = 8,
  UCGM_STATUS_BUFFER_TOO_SMALL = 9,
  UCGM_STATUS_PANIC = 10,
} UcgmStatus;

/**
 * How fresh noise is injected during sampling.
 */
typedef enum UcgmRhoPolicy {
  /**
   * Uses `UcgmSamplerConfig::rho` at every step.
   */
  UCGM_RHO_POLICY_CONSTANT = 0,
  UCGM_RHO_POLICY_SDE = 1,
  UCGM_RHO_POLICY_SDE_SQUARED = 2,
} UcgmRhoPolicy;

/**
 * Opaque trained estimator.
 */
typedef struct UcgmModel UcgmModel;

/**
 * Transport coefficients at one time.
 */
typedef struct UcgmCoefficients {
  double alpha;
  double gamma;
  double alpha_hat;
  double gamma_hat;
  double denom;
} UcgmCoefficients;

/**
 * Sampler settings on a uniform time grid.
 */
typedef struct UcgmSamplerConfig {
  uint32_t steps;
  /**
   * 1 or 2.
   */
  uint8_t order;
  double kappa;
  enum UcgmRhoPolicy rho_policy;
  double rho;
} UcgmSamplerConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *ucgm_version(void);

/**
 * Copies the calling thread's last error message into `buf` (NUL-terminated,
 * truncated to `len`). Returns the buffer size the full message needs.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t ucgm_last_error(char *buf, size_t len);

/**
 * Coefficients of a transport family (`linear`, `relinear`, `trigflow`,
 * `edm`, `triglinear`, `random`) at time `t`.
 *
 * # Safety
 * `family` must be a NUL-terminated string and `out` a valid pointer.
 */
enum UcgmStatus ucgm_transport_coefficients(const char *family,
                                            double t,
                                            struct UcgmCoefficients *out);

/**
 * Randomly initialized estimator with `n_hidden` hidden layers of the given
 * widths. `classes` is 0 for an unconditional model.
 *
 * # Safety
 * `hidden` must point to `n_hidden` values and `out` must be valid.
 */
enum UcgmStatus ucgm_model_init(size_t dim,
                                const size_t *hidden,
                                size_t n_hidden,
                                size_t classes,
                                uint64_t seed,
                                struct UcgmModel **out);

/**
 * Loads a weight file. `activation` is `silu`, `tanh` or null for silu.
 *
 * # Safety
 * `path` must be a NUL-terminated string, `activation` null or one, `out` valid.
 */
enum UcgmStatus ucgm_model_load(const char *path, const char *activation, struct UcgmModel **out);

/**
 * Writes the model's weights to `path`.
 *
 * # Safety
 * `model` must come from this library and `path` be a NUL-terminated string.
 */
enum UcgmStatus ucgm_model_save(const struct UcgmModel *model_ptr, const char *path);

/**
 * Releases a model. Null is ignored.
 *
 * # Safety
 * `model` must be null or a handle from this library that was not freed yet.
 */
void ucgm_model_free(struct UcgmModel *model_ptr);

/**
 * Data dimension of a model, or 0 for null.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t ucgm_model_dim(const struct UcgmModel *model_ptr);

/**
 * Network output `F(x_t, t, c)`. A negative `cond` means unconditional.
 *
 * # Safety
 * `x` must hold `dim` values and `out` `out_len` writable values.
 */
enum UcgmStatus ucgm_model_forward(const struct UcgmModel *model_ptr,
                                   const double *x,
                                   size_t dim,
                                   double t,
                                   int64_t cond,
                                   double *out,
                                   size_t out_len);

/**
 * Default sampler settings: 64 steps, first order, kappa 0.4, no fresh noise.
 */
struct UcgmSamplerConfig ucgm_sampler_config_default(void);

/**
 * Draws `n` samples (row-major, `n * dim` values) with `model` as both the
 * evaluation and correction network.
 *
 * # Safety
 * `model` must be live, `family` and `config` valid, `out` must hold `out_len` values.
 */
enum UcgmStatus ucgm_sample(const struct UcgmModel *model_ptr,
                            const char *family,
                            const struct UcgmSamplerConfig *config,
                            size_t n,
                            uint64_t seed,
                            int64_t cond,
                            double *out,
                            size_t out_len);

/**
 * Trains from configuration text (the `key = value` run format) and returns
 * the EMA model. When `shift`/`scale` are non-null they receive the per-axis
 * standardizer, so raw samples are `x * scale + shift`.
 *
 * # Safety
 * `config_text` must be a NUL-terminated string, `out` valid, and `shift`/`scale`
 * null or holding `axes` writable values.
 */
enum UcgmStatus ucgm_train(const char *config_text,
                           struct UcgmModel **out,
                           double *shift,
                           double *scale,
                           size_t axes);

/**
 * Wasserstein-1 distance between two 1D sample sets.
 *
 * # Safety
 * `a` and `b` must hold `na` and `nb` values; `out` must be valid.
 */
enum UcgmStatus ucgm_wasserstein1(const double *a,
                                  size_t na,
                                  const double *b,
                                  size_t nb,
                                  uint64_t seed,
                                  double *out);

/**
 * Energy distance between two row-major sample sets of dimension `dim`.
 *
 * # Safety
 * `a` and `b` must hold `na * dim` and `nb * dim` values; `out` must be valid.
 */
enum UcgmStatus ucgm_energy_distance(const double *a,
                                     size_t na,
                                     const double *b,
                                     size_t nb,
                                     size_t dim,
                                     uint64_t seed,
                                     double *out);

/**
 * `F0^{-1}(Phi(x1))` for the equal-weight mixture `N(-m, sigma^2)`, `N(m, sigma^2)`.
 *
 * # Safety
 * `out` must be valid.
 */
enum UcgmStatus ucgm_bimodal_quantile_transport(double m, double sigma, double x1, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* UCGM_H */
