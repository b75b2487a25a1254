#ifndef COEXIST_H
#define COEXIST_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes shared by every entry point.
 */
typedef enum CoexStatus {
  CoexStatus_Ok = 0,
  CoexStatus_NullArgument = 1,
  CoexStatus_InvalidConfig = 2,
  CoexStatus_SolverFailure = 3,
  CoexStatus_Infeasible = 4,
  CoexStatus_InternalPanic = 5,
} CoexStatus;

/**
 * Computation route selector for `coexist_analyze`.
 */
typedef enum CoexMethod {
  CoexMethod_ClosedForm = 0,
  CoexMethod_ChainSolve = 1,
} CoexMethod;

/**
 * Opaque scenario handle.
 */
typedef struct CoexConfig CoexConfig;

/**
 * Throughput fractions for one scenario.
 */
typedef struct CoexThroughput {
  double lambda_a;
  double lambda_c;
  double lambda_total;
  double alpha_c;
} CoexThroughput;

/**
 * Counters and empirical rates of one simulation run.
 */
typedef struct CoexSimStats {
  uint64_t n_success_a;
  uint64_t n_success_c;
  uint64_t collisions_a;
  uint64_t collisions_c;
  double lambda_a_hat;
  double lambda_c_hat;
  double idle_fraction;
} CoexSimStats;

/**
 * Optimum of the proportion-constrained throughput maximization.
 */
typedef struct CoexOptimum {
  double rho_a;
  double rho_c;
  uint32_t l_c;
  double lambda_max;
  double achieved_ratio;
} CoexOptimum;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Version string of the underlying library; static storage, do not free.
 */
const char *coexist_version(void);

/**
 * Message describing the most recent failure on this thread. Valid until
 * the next failing call on the same thread; do not free.
 */
const char *coexist_last_error_message(void);

/**
 * Create a scenario from per-node transmission probabilities.
 *
 * # Safety
 * `out` must be a valid pointer; the returned handle must be released with
 * `coexist_config_free`.
 */
enum CoexStatus coexist_config_new(uint32_t n_a,
                                   uint32_t n_c,
                                   double q_a,
                                   double q_c,
                                   uint32_t s,
                                   uint32_t l_c,
                                   struct CoexConfig **out);

/**
 * Create a scenario from collective no-transmission probabilities,
 * inverting `rho = (1-q)^n`.
 *
 * # Safety
 * As `coexist_config_new`.
 */
enum CoexStatus coexist_config_from_rho(uint32_t n_a,
                                        uint32_t n_c,
                                        double rho_a,
                                        double rho_c,
                                        uint32_t s,
                                        uint32_t l_c,
                                        struct CoexConfig **out);

/**
 * Release a scenario handle. Null is accepted and ignored.
 *
 * # Safety
 * `config` must have come from a `coexist_config_*` constructor and must
 * not be used afterwards.
 */
void coexist_config_free(struct CoexConfig *config);

/**
 * Evaluate throughputs through the selected route.
 *
 * # Safety
 * `config` and `out` must be valid pointers.
 */
enum CoexStatus coexist_analyze(const struct CoexConfig *config,
                                enum CoexMethod method,
                                struct CoexThroughput *out);

/**
 * Run the generic-mode simulator for `duration` mini-slots.
 *
 * # Safety
 * `config` and `out` must be valid pointers.
 */
enum CoexStatus coexist_simulate(const struct CoexConfig *config,
                                 uint64_t duration,
                                 uint64_t seed,
                                 struct CoexSimStats *out);

/**
 * Maximize total throughput under the desired proportion `gamma`, searching
 * packet times 1..=l_c_max.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum CoexStatus coexist_optimize(double gamma,
                                 uint32_t n_a,
                                 uint32_t n_c,
                                 uint32_t s,
                                 uint32_t l_c_max,
                                 double rho_a_step,
                                 struct CoexOptimum *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COEXIST_H */
