#ifndef ISAC_FFI_H
#define ISAC_FFI_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum IsacStatus {
  ISAC_STATUS_OK = 0,
  ISAC_STATUS_NULL_POINTER = 1,
  ISAC_STATUS_INVALID_UTF8 = 2,
  // Bad configuration, dimension or solver choice.
  ISAC_STATUS_INVALID_ARGUMENT = 3,
  // The solver or scenario generator failed.
  ISAC_STATUS_SOLVE_FAILED = 4,
  // Caller buffer shorter than the data.
  ISAC_STATUS_BUFFER_TOO_SMALL = 5,
  ISAC_STATUS_PANIC = 6,
} IsacStatus;

// UA strategies reachable without a network backend.
typedef enum IsacUaSolver {
  ISAC_UA_SOLVER_BRUTE = 0,
  // Gale-Shapley matching, frozen after the first AO iteration.
  ISAC_UA_SOLVER_GALE_SHAPLEY = 1,
  ISAC_UA_SOLVER_COALITION = 2,
  // Deterministic offline stand-in for the chat-model pipeline.
  ISAC_UA_SOLVER_STUB = 3,
} IsacUaSolver;

typedef struct IsacAoResult IsacAoResult;

// A drawn network: configuration, geometry and channels.
typedef struct IsacProblem IsacProblem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. The pointer stays
// valid until the next `isac_*` call on the same thread.
const char *isac_last_error_message(void);

// Draws a network from a JSON configuration (NULL for defaults) and `seed`.
//
// # Safety
// `config_json` is NULL or a NUL-terminated string; `out` is a valid pointer.
enum IsacStatus isac_problem_new(const char *config_json, uint64_t seed, struct IsacProblem **out);

// Any output pointer may be NULL to skip it.
//
// # Safety
// `p` comes from [`isac_problem_new`] and is not yet freed.
enum IsacStatus isac_problem_dims(const struct IsacProblem *p, size_t *k, size_t *n, size_t *m);

// # Safety
// `p` is NULL or comes from [`isac_problem_new`] and is not yet freed.
void isac_problem_free(struct IsacProblem *p);

// Alternating optimization of association and beamformers. `solver` is an
// [`IsacUaSolver`] value.
//
// # Safety
// `p` is a live problem handle; `out` is a valid pointer.
enum IsacStatus isac_ao_solve(const struct IsacProblem *p,
                              uint32_t solver,
                              struct IsacAoResult **out);

// Final sum rate and whether every BS passed the constraint audit.
//
// # Safety
// `r` is a live result handle; the outputs are valid pointers.
enum IsacStatus isac_result_summary(const struct IsacAoResult *r,
                                    double *sum_rate,
                                    bool *audit_passes,
                                    size_t *iterations);

// Writes the 0-based serving BS of each CU. `len` always receives N, so a
// call with `cap = 0` queries the size (and returns `BufferTooSmall`).
//
// # Safety
// `r` is a live result handle; `buf` holds `cap` writable entries.
enum IsacStatus isac_result_assignment(const struct IsacAoResult *r,
                                       size_t *buf,
                                       size_t cap,
                                       size_t *len);

// Sum rate after each outer iteration, same size protocol as
// [`isac_result_assignment`].
//
// # Safety
// `r` is a live result handle; `buf` holds `cap` writable entries.
enum IsacStatus isac_result_trace(const struct IsacAoResult *r,
                                  double *buf,
                                  size_t cap,
                                  size_t *len);

// # Safety
// `r` is NULL or comes from [`isac_ao_solve`] and is not yet freed.
void isac_result_free(struct IsacAoResult *r);

// Association alone on a row-major `k × n` SINR table (linear scale).
// Writes `n` 0-based BS indices and the bandwidth-weighted sum rate.
// `solver` is an [`IsacUaSolver`] value.
//
// # Safety
// `sinr` holds `k * n` readable values, `assignment` holds `n` writable
// entries and `rate` is a valid pointer.
enum IsacStatus isac_ua_solve(const double *sinr,
                              size_t k,
                              size_t n,
                              double bandwidth,
                              uint32_t solver,
                              size_t *assignment,
                              double *rate);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ISAC_FFI_H */
