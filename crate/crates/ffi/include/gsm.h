#ifndef GSM_H
#define GSM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GsmSpace {
  GSM_SPACE_ROUMIEU = 0,
  GSM_SPACE_BEURLING = 1,
} GsmSpace;

typedef enum GsmStatus {
  GSM_STATUS_OK = 0,
  GSM_STATUS_NULL_POINTER = 1,
  GSM_STATUS_INVALID_ARGUMENT = 2,
  GSM_STATUS_DEGREE_TOO_SMALL = 3,
  GSM_STATUS_OUT_OF_RANGE = 4,
  GSM_STATUS_PRECISION = 5,
  GSM_STATUS_HYPOTHESIS = 6,
  GSM_STATUS_INTERNAL = 7,
  GSM_STATUS_PANIC = 8,
} GsmStatus;

typedef enum GsmVerdict {
  GSM_VERDICT_CONTINUOUS = 0,
  GSM_VERDICT_NOT_CONTINUOUS = 1,
  GSM_VERDICT_TRIVIAL_SPACE = 2,
  GSM_VERDICT_UNKNOWN = 3,
} GsmVerdict;

// Opaque coefficient table.
typedef struct GsmCoeffTable GsmCoeffTable;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or NULL. Valid until the next
// failing call on the same thread.
const char *gsm_last_error(void);

// Releases a string returned by this library. NULL is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void gsm_string_free(char *s);

// Builds the table `C[k][n]` for `0 <= k <= k_max`.
//
// # Safety
// `out` must be a valid pointer.
enum GsmStatus gsm_table_build(uint32_t m, uint32_t k_max, struct GsmCoeffTable **out);

// Releases a table. NULL is ignored.
//
// # Safety
// `t` must come from [`gsm_table_build`] and not have been freed.
void gsm_table_free(struct GsmCoeffTable *t);

// # Safety
// `t` and `out` must be valid pointers.
enum GsmStatus gsm_table_m(const struct GsmCoeffTable *t, uint32_t *out);

// # Safety
// `t` and `out` must be valid pointers.
enum GsmStatus gsm_table_k_max(const struct GsmCoeffTable *t, uint32_t *out);

// Number of entries in row `k`.
//
// # Safety
// `t` and `out` must be valid pointers.
enum GsmStatus gsm_table_row_len(const struct GsmCoeffTable *t, uint32_t k, size_t *out);

// `C[k][n]` as a decimal string.
//
// # Safety
// `t` and `out` must be valid pointers.
enum GsmStatus gsm_table_coeff(const struct GsmCoeffTable *t, uint32_t k, size_t n, char **out);

// The table as JSON: `{"m": .., "k_max": .., "rows": [...]}` with one array
// of decimal strings per `k = 1..=k_max`.
//
// # Safety
// `t` and `out` must be valid pointers.
enum GsmStatus gsm_table_to_json(const struct GsmCoeffTable *t, char **out);

// Compares the table with the independent oracles. `certified` is set to 1
// when no cell disagrees.
//
// # Safety
// All pointers must be valid.
enum GsmStatus gsm_table_certify(const struct GsmCoeffTable *t,
                                 int *certified,
                                 uint64_t *discrepancies);

// `ln|p_{±im,k}(x)|` as a decimal string. `sign` is `+1` or `-1`; `x` is a
// nonnegative rational such as `"3"`, `"5/2"` or `"0.75"`, evaluated exactly.
//
// # Safety
// `t`, `x` and `out` must be valid pointers; `x` NUL-terminated.
enum GsmStatus gsm_log_magnitude(const struct GsmCoeffTable *t,
                                 uint32_t k,
                                 int sign,
                                 const char *x,
                                 uint32_t precision_bits,
                                 char **out);

// `k_j`: the smallest integer in `[4jm/(m-1), (4j+1)m/(m-1)]`.
//
// # Safety
// `out` must be a valid pointer.
enum GsmStatus gsm_kj(uint32_t m, uint32_t j, uint32_t *out);

// Classifies the multiplier (or, with `propagator != 0`, the propagator) at
// rational `theta` and `s`. `space` is a [`GsmSpace`] value;
// `boundary_excluded` may be NULL.
//
// # Safety
// String arguments must be NUL-terminated; `verdict` must be valid.
enum GsmStatus gsm_wedge_classify(const char *theta,
                                  const char *s,
                                  uint32_t m,
                                  int space,
                                  uint32_t d,
                                  int monomial,
                                  int propagator,
                                  int t_nonzero,
                                  enum GsmVerdict *verdict,
                                  int *boundary_excluded);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* GSM_H */
