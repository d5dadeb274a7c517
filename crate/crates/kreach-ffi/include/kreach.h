/*
 * C interface to the kreach safety verifier.
 *
 * All handles are opaque and must be released with the matching *_free
 * function.  Functions returning int use the KREACH_* status codes; on any
 * nonzero return, kreach_last_error_message() describes the failure.
 */

#ifndef KREACH_H
#define KREACH_H

/* Generated by cbindgen from the kreach-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * The call completed.  Note that a completed verification reports
 * `KREACH_OK` for both safe and unsafe verdicts; code 1 is deliberately
 * unused so these codes line up with the CLI's exit codes, where 1 means
 * "verified unsafe".
 */
#define KREACH_OK 0

/**
 * Bad input: unreadable or malformed file, unknown strategy name,
 * inconsistent problem dimensions.
 */
#define KREACH_ERR_USAGE 2

/**
 * Numerical failure: error control could not certify the requested
 * accuracy, or counter-example validation failed.
 */
#define KREACH_ERR_NUMERICAL 3

/**
 * A required pointer argument was null.
 */
#define KREACH_ERR_NULL 4

/**
 * A string argument was not valid UTF-8.
 */
#define KREACH_ERR_UTF8 5

/**
 * The library panicked internally; the handles involved are unchanged
 * but the failure is a bug worth reporting.
 */
#define KREACH_ERR_PANIC 6

/**
 * Opaque handle to a loaded verification problem.
 */
typedef struct KreachProblem KreachProblem;

/**
 * Opaque handle to the outcome of a verification run.
 */
typedef struct KreachVerdict KreachVerdict;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failing kreach_* call on this thread, or
 * null when no call has failed yet.  The pointer stays valid until the
 * next failing call on the same thread; do not free it.
 */
const char *kreach_last_error_message(void);

/**
 * Load a verification problem from a JSON description (the format the
 * CLI's `gen` command writes).  On success stores a fresh handle in
 * `out`; release it with [`kreach_problem_free`].
 */
int kreach_problem_load(const char *path, struct KreachProblem **out);

/**
 * Release a problem handle (null is ignored).
 */
void kreach_problem_free(struct KreachProblem *problem);

/**
 * Number of states, or 0 when `problem` is null.
 */
uint64_t kreach_problem_states(const struct KreachProblem *problem);

/**
 * Dimension of the initial space (columns of E), or 0 when null.
 */
uint64_t kreach_problem_init_dim(const struct KreachProblem *problem);

/**
 * Number of outputs (rows of C), or 0 when null.
 */
uint64_t kreach_problem_outputs(const struct KreachProblem *problem);

/**
 * Number of time steps covering the horizon, or 0 when null.
 */
uint64_t kreach_problem_steps(const struct KreachProblem *problem);

/**
 * Verify the problem over its full time horizon.
 *
 * `strategy` selects the simulation backend: `"auto"` (or null) picks
 * from size and symmetry, the other accepted names are `"dense"`,
 * `"rk45"`, `"arnoldi"`, and `"lanczos"`.  `epsilon` is the certified
 * trajectory-error budget for the Krylov backends; pass 0 or a negative
 * value for the default (1e-8).
 *
 * A completed run returns `KREACH_OK` whether the system is safe or not;
 * inspect the verdict handle stored in `out` and release it with
 * [`kreach_verdict_free`].  Verification only reads the problem, so
 * concurrent calls on one problem handle from several threads are fine.
 */
int kreach_verify(const struct KreachProblem *problem,
                  const char *strategy,
                  double epsilon,
                  struct KreachVerdict **out);

/**
 * Release a verdict handle (null is ignored).
 */
void kreach_verdict_free(struct KreachVerdict *verdict);

/**
 * 1 when the system is safe, 0 when unsafe, -1 when `verdict` is null.
 */
int kreach_verdict_is_safe(const struct KreachVerdict *verdict);

/**
 * Index of the first step whose reachable outputs meet the unsafe set,
 * or -1 when safe or null.
 */
int64_t kreach_verdict_step(const struct KreachVerdict *verdict);

/**
 * Time of the first unsafe step, or NaN when safe or null.
 */
double kreach_verdict_time(const struct KreachVerdict *verdict);

/**
 * Relative error of the independent counter-example re-simulation, or
 * NaN when safe or null.
 */
double kreach_verdict_validation_error(const struct KreachVerdict *verdict);

/**
 * Serialize the full verdict (status, witness point, certified error,
 * Krylov statistics, ...) as a JSON string.  Stores a NUL-terminated
 * string in `out`; release it with [`kreach_string_free`].
 */
int kreach_verdict_json(const struct KreachVerdict *verdict, char **out);

/**
 * Release a string returned by this library (null is ignored).
 */
void kreach_string_free(char *string);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* KREACH_H */
