#ifndef DIOPH_LAB_H
#define DIOPH_LAB_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum DiophStatus {
  DIOPH_STATUS_OK = 0,
  DIOPH_STATUS_NULL_POINTER = 1,
  DIOPH_STATUS_INVALID_INPUT = 2,
  DIOPH_STATUS_PARSE = 3,
  DIOPH_STATUS_CONFIG = 4,
  DIOPH_STATUS_PRECISION_EXHAUSTED = 5,
  DIOPH_STATUS_BUDGET_EXCEEDED = 6,
  DIOPH_STATUS_SOLVER_INCOMPLETE = 7,
  DIOPH_STATUS_IO = 8,
  DIOPH_STATUS_NOT_FOUND = 9,
  DIOPH_STATUS_REPLAY_MISMATCH = 10,
  DIOPH_STATUS_BUFFER_TOO_SMALL = 11,
  DIOPH_STATUS_PANIC = 12,
} DiophStatus;

/**
 * Opaque approximation function.
 */
typedef struct DiophPsi DiophPsi;

/**
 * Opaque affine subspace.
 */
typedef struct DiophSubspace DiophSubspace;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread. Valid until the next call
 * on the same thread; never null.
 */
const char *dioph_last_error(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void dioph_string_free(char *s);

/**
 * Parses a subspace from TOML (`d`, `n`, `tilt`, `shift`).
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` a valid pointer.
 */
enum DiophStatus dioph_subspace_parse(const char *toml, struct DiophSubspace **out_handle);

/**
 * # Safety
 * `h` must come from [`dioph_subspace_parse`] and not be freed twice.
 */
void dioph_subspace_free(struct DiophSubspace *h);

/**
 * Ambient dimension `d` and parameter dimension `n`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum DiophStatus dioph_subspace_dims(const struct DiophSubspace *h, uintptr_t *d, uintptr_t *n);

/**
 * Parses an approximation function, e.g. `kind = "power_log"` with `tau = "1/2"`.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` a valid pointer.
 */
enum DiophStatus dioph_psi_parse(const char *toml, struct DiophPsi **out_handle);

/**
 * # Safety
 * `h` must come from [`dioph_psi_parse`] and not be freed twice.
 */
void dioph_psi_free(struct DiophPsi *h);

/**
 * Certified value of `psi(q)` enclosed in `[lo, hi]`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum DiophStatus dioph_psi_eval(const struct DiophPsi *h, uint64_t q, double *lo, double *hi);

/**
 * Exact count of rational points near the subspace from a count config
 * (`subspace`, `q`, `delta`, `ball`) in TOML.
 *
 * # Safety
 * `config` must be a NUL-terminated string and `count` a valid pointer.
 */
enum DiophStatus dioph_count_exact(const char *config,
                                   uint32_t bits,
                                   uint64_t budget,
                                   uint64_t *count);

/**
 * Covering witness at the point `x` given as `n` exact literals.
 * Writes `q`, then `p_1..p_n` into `p_hat` (capacity `cap`), and the
 * certified verdict into `valid`.
 *
 * # Safety
 * `x` must hold `n` NUL-terminated strings; `p_hat` must hold `cap` slots.
 */
enum DiophStatus dioph_covering_witness(const struct DiophSubspace *subspace,
                                        const struct DiophPsi *psi,
                                        const char *const *x,
                                        uintptr_t n,
                                        uint64_t n_big,
                                        int64_t *p_hat,
                                        uintptr_t cap,
                                        bool *valid);

/**
 * Exponent test for `sum psi(q)^(d-n+s) q^(n-s)`; `s` is a rational literal.
 *
 * # Safety
 * Pointers must be valid.
 */
enum DiophStatus dioph_classify_series(const struct DiophPsi *psi,
                                       uintptr_t d,
                                       uintptr_t n,
                                       const char *s,
                                       bool *diverges);

/**
 * Runs a subcommand by name with a TOML config, writing outputs and the
 * ledger under `out_dir`. The run id is returned in `run_id` (free with
 * [`dioph_string_free`]) and the verdict in `passed`.
 *
 * # Safety
 * Strings must be NUL-terminated; output pointers must be valid.
 */
enum DiophStatus dioph_run(const char *subcommand,
                           const char *config,
                           uint64_t seed,
                           uintptr_t threads,
                           uint32_t bits,
                           uint64_t budget,
                           const char *out_dir,
                           char **run_id,
                           bool *passed);

/**
 * Replays a ledger entry; `threads = 0` keeps the recorded count.
 * A digest mismatch returns `DIOPH_STATUS_REPLAY_MISMATCH`.
 *
 * # Safety
 * Strings must be NUL-terminated.
 */
enum DiophStatus dioph_replay(const char *run_id, const char *out_dir, uintptr_t threads);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DIOPH_LAB_H */
