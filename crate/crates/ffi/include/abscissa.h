#ifndef ABSCISSA_H
#define ABSCISSA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AbscissaMethod {
  ABSCISSA_METHOD_UPPER = 0,
  ABSCISSA_METHOD_LOWER_ESF = 1,
  ABSCISSA_METHOD_LOWER_GL = 2,
  ABSCISSA_METHOD_NAIVE_LOWER = 3,
  ABSCISSA_METHOD_HERMITE = 4,
} AbscissaMethod;

typedef enum AbscissaStatus {
  ABSCISSA_STATUS_OK = 0,
  ABSCISSA_STATUS_NULL_POINTER = 1,
  ABSCISSA_STATUS_INVALID_UTF8 = 2,
  ABSCISSA_STATUS_PARSE_ERROR = 3,
  ABSCISSA_STATUS_INVALID_INPUT = 4,
  ABSCISSA_STATUS_SOLVER_FAILED = 5,
  ABSCISSA_STATUS_CERTIFICATE_REJECTED = 6,
  ABSCISSA_STATUS_IO = 7,
  ABSCISSA_STATUS_PANIC = 8,
} AbscissaStatus;

/**
 * A parameterized polynomial, optionally with a Hermite matrix.
 */
typedef struct AbscissaProblem AbscissaProblem;

/**
 * A solved approximation with its certificate.
 */
typedef struct AbscissaResult AbscissaResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *abscissa_last_error(void);

/**
 * Parses `s^m + ...` with parameters `q1..qn` into a new problem.
 *
 * # Safety
 * `text` must be a nul-terminated string and `out` a valid pointer.
 */
enum AbscissaStatus abscissa_problem_parse(const char *text,
                                           size_t n,
                                           struct AbscissaProblem **out);

/**
 * Builds a problem from the JSON problem-file format.
 *
 * # Safety
 * `json` must be a nul-terminated string and `out` a valid pointer.
 */
enum AbscissaStatus abscissa_problem_from_json(const char *json, struct AbscissaProblem **out);

/**
 * # Safety
 * `problem` must come from this library and not be used afterwards.
 */
void abscissa_problem_free(struct AbscissaProblem *problem);

/**
 * Number of parameters.
 *
 * # Safety
 * `problem` must be a live handle or null.
 */
size_t abscissa_problem_num_params(const struct AbscissaProblem *problem);

/**
 * Largest real part of the roots at `q`.
 *
 * # Safety
 * `problem` must be live, `q` must point to `len` doubles, `out` valid.
 */
enum AbscissaStatus abscissa_oracle_abscissa(const struct AbscissaProblem *problem,
                                             const double *q,
                                             size_t len,
                                             double *out);

/**
 * Smallest real part of the roots at `q`.
 *
 * # Safety
 * As for [`abscissa_oracle_abscissa`].
 */
enum AbscissaStatus abscissa_oracle_min_realpart(const struct AbscissaProblem *problem,
                                                 const double *q,
                                                 size_t len,
                                                 double *out);

/**
 * Solves one level of a hierarchy. `dprime` is read only by the
 * Gauss-Lucas method. Non-positive tolerances select the defaults.
 *
 * # Safety
 * `problem` must be live and `out` valid.
 */
enum AbscissaStatus abscissa_solve(const struct AbscissaProblem *problem,
                                   enum AbscissaMethod method,
                                   size_t d,
                                   size_t dprime,
                                   double gap_tol,
                                   double feas_tol,
                                   struct AbscissaResult **out);

/**
 * # Safety
 * `result` must come from this library and not be used afterwards.
 */
void abscissa_result_free(struct AbscissaResult *result);

/**
 * Integral of the approximation over the parameter box.
 *
 * # Safety
 * `result` must be live and `out` valid.
 */
enum AbscissaStatus abscissa_result_objective(const struct AbscissaResult *result, double *out);

/**
 * Value of the approximating polynomial at `q`.
 *
 * # Safety
 * `result` must be live, `q` must point to `len` doubles, `out` valid.
 */
enum AbscissaStatus abscissa_result_eval(const struct AbscissaResult *result,
                                         const double *q,
                                         size_t len,
                                         double *out);

/**
 * Largest coefficient of the certificate identity's residual.
 *
 * # Safety
 * `result` must be live and `out` valid.
 */
enum AbscissaStatus abscissa_result_identity_residual(const struct AbscissaResult *result,
                                                      double *out);

/**
 * The result in the CLI's JSON format. Release with [`abscissa_string_free`].
 *
 * # Safety
 * `result` must be live and `out` valid.
 */
enum AbscissaStatus abscissa_result_to_json(const struct AbscissaResult *result, char **out);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void abscissa_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ABSCISSA_H */
