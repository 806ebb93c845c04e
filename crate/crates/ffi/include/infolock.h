#ifndef INFOLOCK_H
#define INFOLOCK_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum IlStatus {
  IL_STATUS_OK = 0,
  IL_STATUS_NULL_POINTER = 1,
  IL_STATUS_INVALID_PARAMETER = 2,
  IL_STATUS_DIMENSION_MISMATCH = 3,
  IL_STATUS_INVALID_STATE = 4,
  IL_STATUS_BUDGET_EXCEEDED = 5,
  IL_STATUS_SIDE_CONDITION = 6,
  IL_STATUS_NUMERICAL = 7,
  IL_STATUS_PANIC = 8,
} IlStatus;

typedef enum IlStrategy {
  IL_STRATEGY_PROJECTIVE_GRADIENT = 0,
  IL_STRATEGY_QUASI_RANDOM = 1,
} IlStrategy;

typedef enum IlThresholdKind {
  IL_THRESHOLD_KIND_THM_LOCKING = 0,
  IL_THRESHOLD_KIND_COR_UNIHIGH = 1,
  IL_THRESHOLD_KIND_COR_MODMOD = 2,
  IL_THRESHOLD_KIND_COR_UNIHIGH_POVM = 3,
  IL_THRESHOLD_KIND_COR_MODMOD_POVM = 4,
  IL_THRESHOLD_KIND_THM_DECODE = 5,
} IlThresholdKind;

// Opaque locking scheme.
typedef struct IlScheme IlScheme;

// Qubit counts and entropies in bits.
typedef struct IlThresholdInput {
  double n;
  double c;
  double k;
  double e;
  double eps;
  double p_fail;
  double hmin_m;
  double h2_m;
  double hmax_m;
  double hmin_e;
  double h2_e;
} IlThresholdInput;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message of this thread, NUL-terminated and
// truncated to `cap` bytes, into `buf`. Returns the full message length
// without the terminator; `buf` may be null to query the length.
//
// # Safety
// `buf` must be null or point to `cap` writable bytes.
size_t il_last_error_message(char *buf, size_t cap);

// Haar-random scheme on `C ⊗ K` with an `E`-dimensional entangled resource.
// `p` (length `c·k`) and `schmidt` (length `e`) may be null for the
// uniform distribution and maximal entanglement.
//
// # Safety
// Non-null arrays must hold the stated number of elements; `out_scheme`
// must be writable.
enum IlStatus il_scheme_new_haar(size_t c,
                                 size_t k,
                                 size_t e,
                                 const double *p,
                                 const double *schmidt,
                                 uint64_t seed,
                                 struct IlScheme **out_scheme);

// # Safety
// `scheme` must be null or a handle from [`il_scheme_new_haar`] that has
// not been freed.
void il_scheme_free(struct IlScheme *scheme);

// Dimension of `C ⊗ E′`, the system a measurement acts on.
//
// # Safety
// `scheme` must be a live handle and `out_dim` writable.
enum IlStatus il_scheme_measured_dim(const struct IlScheme *scheme, size_t *out_dim);

// `g_M` for the projective measurement onto the columns of `basis`, a
// `d×d` unitary with `d` = [`il_scheme_measured_dim`], stored column-major
// as interleaved real and imaginary parts (`2·d·d` doubles). A null
// `basis` selects the computational basis.
//
// # Safety
// `scheme` must be a live handle, `basis` null or readable, `out_value`
// writable.
enum IlStatus il_distinguishability(const struct IlScheme *scheme,
                                    const double *basis,
                                    double *out_value);

// Optimized lower bound on the largest `g_M` over measurements.
//
// # Safety
// `scheme` must be a live handle and `out_value` writable.
enum IlStatus il_optimize(const struct IlScheme *scheme,
                          enum IlStrategy strategy,
                          size_t restarts,
                          uint64_t seed,
                          double *out_value);

// Bound on the Haar average of `g_M` for a fixed measurement.
//
// # Safety
// `scheme` must be a live handle and `out_value` writable.
enum IlStatus il_expectation_bound(const struct IlScheme *scheme, double *out_value);

// Fills `out_input` for a uniform `(c + k)`-bit message and maximal
// entanglement on `e` qubits.
//
// # Safety
// `out_input` must be writable.
enum IlStatus il_threshold_input_uniform(double c,
                                         double k,
                                         double e,
                                         double eps,
                                         double p_fail,
                                         struct IlThresholdInput *out_input);

// Key-size threshold in bits and the rounded qubit count.
//
// # Safety
// `t` must be readable; `out_value` and `out_qubits` writable.
enum IlStatus il_key_threshold(const struct IlThresholdInput *t,
                               enum IlThresholdKind kind,
                               double *out_value,
                               double *out_qubits);

// Largest key size, in bits, for which decoding succeeds.
//
// # Safety
// `t` must be readable and `out_value` writable.
enum IlStatus il_decode_threshold(const struct IlThresholdInput *t, double *out_value);

// # Safety
// `out_value` must be writable.
enum IlStatus il_alicki_fannes_bound(double eps, size_t m, double *out_value);

// # Safety
// `out_value` must be writable.
enum IlStatus il_chernoff_bound(size_t d, size_t s, double eta, double *out_value);

// # Safety
// `out_value` must be writable.
enum IlStatus il_levy_bound(double theta, size_t d, double eps, double *out_value);

// Trace distance and accessible information guarantees of the locked key
// protocol.
//
// # Safety
// `out_trace` and `out_iacc` must be writable.
enum IlStatus il_qkd_security_bounds(double eps, size_t n, double *out_trace, double *out_iacc);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* INFOLOCK_H */
