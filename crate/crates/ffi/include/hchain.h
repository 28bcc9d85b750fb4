#ifndef HCHAIN_H
#define HCHAIN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum HcStatus {
  HC_STATUS_OK = 0,
  HC_STATUS_NULL_POINTER = 1,
  HC_STATUS_INVALID_UTF8 = 2,
  HC_STATUS_INVALID_CONFIG = 3,
  HC_STATUS_INVALID_MODEL = 4,
  HC_STATUS_ENGINE_FAILURE = 5,
  HC_STATUS_BUFFER_TOO_SMALL = 6,
  HC_STATUS_PANIC = 7,
} HcStatus;

// Validated chain model.
typedef struct HcModel HcModel;

// Solved temperature profile with bond currents.
typedef struct HcProfile HcProfile;

// Monte Carlo run length; `burn_in < 0` selects the automatic burn-in.
typedef struct HcSimOptions {
  size_t replicas;
  size_t periods;
  int64_t burn_in;
  size_t steps_per_period;
  uint64_t seed;
} HcSimOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Builds a model from a JSON config (`n, gamma, omega0, t_minus, theta, a, b, force, l_max`).
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum HcStatus hc_model_from_json(const char *json, struct HcModel **out);

// Builds a model from parameters and `len` force coefficients `(ells[k], re[k] + i im[k])`.
//
// # Safety
// `ells`, `re`, `im` must be valid for `len` reads (may be null when `len = 0`); `out` must be writable.
enum HcStatus hc_model_new(size_t n,
                           double gamma,
                           double omega0,
                           double t_minus,
                           double theta,
                           double a,
                           double b,
                           const int64_t *ells,
                           const double *re,
                           const double *im,
                           size_t len,
                           struct HcModel **out);

// # Safety
// `model` must be null or a handle from `hc_model_*` not yet freed.
void hc_model_free(struct HcModel *model);

// Number of sites `n + 1`; zero for a null handle.
//
// # Safety
// `model` must be null or a live handle.
size_t hc_model_sites(const struct HcModel *model);

// Time-averaged current `J_n` and, in the scaling regime, its limit `J` (NaN otherwise).
//
// # Safety
// `model` must be a live handle; `j_n` and `j_limit` must be writable.
enum HcStatus hc_current(const struct HcModel *model, double *j_n, double *j_limit);

// Solves the temperature profile and every bond current.
//
// # Safety
// `model` must be a live handle; `out` must be writable.
enum HcStatus hc_profile_solve(const struct HcModel *model, struct HcProfile **out);

// # Safety
// `profile` must be null or a handle from `hc_profile_solve` not yet freed.
void hc_profile_free(struct HcProfile *profile);

// Copies `⟨p_x²⟩`, `x = 0..=n`, into `buf` (at least `n + 1` values).
//
// # Safety
// `profile` must be a live handle; `buf` must be valid for `len` writes.
enum HcStatus hc_profile_p2(const struct HcProfile *profile, double *buf, size_t len);

// Copies the currents through bonds `(x, x+1)`, `x = -1..=n`, into `buf` (at least `n + 2` values).
//
// # Safety
// `profile` must be a live handle; `buf` must be valid for `len` writes.
enum HcStatus hc_profile_bond_currents(const struct HcProfile *profile, double *buf, size_t len);

// `J_n` of a solved profile; NaN for a null handle.
//
// # Safety
// `profile` must be null or a live handle.
double hc_profile_current(const struct HcProfile *profile);

// Monte Carlo estimate of `⟨p_x²⟩`: means and standard errors, `n + 1` values each.
//
// # Safety
// `model` must be a live handle, `opts` readable, `mean` and `stderr` valid for `len` writes.
enum HcStatus hc_simulate_p2(const struct HcModel *model,
                             const struct HcSimOptions *opts,
                             double *mean,
                             double *stderr,
                             size_t len);

// Copies the last error message of the calling thread into `buf` (NUL-terminated,
// truncated to `len - 1` bytes) and returns its full length in bytes.
//
// # Safety
// `buf` must be null or valid for `len` writes.
size_t hc_last_error(char *buf, size_t len);

// Static description of a status code.
const char *hc_status_str(enum HcStatus status);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HCHAIN_H */
