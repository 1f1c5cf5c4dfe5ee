#ifndef SUBSIDY_MTE_H
#define SUBSIDY_MTE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SmteStatus {
  SMTE_OK = 0,
  SMTE_NULL_POINTER = 1,
  SMTE_INVALID_ARGUMENT = 2,
  SMTE_DOMAIN = 3,
  SMTE_ASSUMPTION = 4,
  SMTE_NUMERICAL = 5,
  SMTE_MISSING_CELL = 6,
  SMTE_PANIC = 7,
} SmteStatus;

typedef enum SmteCostKind {
  SMTE_COST_ZERO = 0,
  SMTE_COST_VOUCHER = 1,
  SMTE_COST_CONSTANT_PER_ELIGIBLE = 2,
} SmteCostKind;

typedef enum SmteMethod {
  SMTE_METHOD_AUTO = 0,
  SMTE_METHOD_POSITIVE = 1,
  SMTE_METHOD_NEGATIVE = 2,
  SMTE_METHOD_GENERAL = 3,
} SmteMethod;

typedef enum SmteSolutionKind {
  SMTE_INTERIOR = 0,
  SMTE_CORNER_LOW = 1,
  SMTE_CORNER_HIGH = 2,
} SmteSolutionKind;

/**
 * Opaque MTE curve.
 */
typedef struct SmteMte SmteMte;

/**
 * Opaque propensity score.
 */
typedef struct SmtePropensity SmtePropensity;

typedef struct SmteSolveResult {
  double z_star;
  double u_star;
  double lambda;
  double welfare;
  enum SmteSolutionKind kind;
} SmteSolveResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *smte_last_error(void);

double smte_norm_cdf(double x);

/**
 * # Safety
 * `out_value` must be a valid pointer.
 */
enum SmteStatus smte_norm_quantile(double p, double *out_value);

/**
 * Normal-model MTE `xᵀlevel − slope·Φ⁻¹(u)`; `level` has a leading
 * intercept. Returns null on failure.
 *
 * # Safety
 * `level` must point to `n_level` doubles.
 */
struct SmteMte *smte_mte_normal(const double *level, size_t n_level, double slope);

/**
 * MTE curve from its JSON form (as written in `fit.json`).
 *
 * # Safety
 * `json` must be a NUL-terminated string.
 */
struct SmteMte *smte_mte_from_json(const char *json);

/**
 * # Safety
 * `mte` must come from an `smte_mte_*` constructor and not be used after.
 */
void smte_mte_free(struct SmteMte *mte);

/**
 * # Safety
 * Pointers must be valid for the given lengths.
 */
enum SmteStatus smte_mte_eval(const struct SmteMte *mte,
                              const double *x,
                              size_t n_x,
                              double u,
                              double *out_value);

/**
 * Probit propensity `Φ(xᵀβ_D + γz)`; `beta_d` has a leading intercept.
 *
 * # Safety
 * `beta_d` must point to `n_beta` doubles.
 */
struct SmtePropensity *smte_propensity_probit(const double *beta_d, size_t n_beta, double gamma);

/**
 * Linear propensity `a + xᵀβ_x + wᵀβ_w + γz`.
 *
 * # Safety
 * Pointers must be valid for the given lengths.
 */
struct SmtePropensity *smte_propensity_linear(double intercept,
                                              const double *beta_x,
                                              size_t n_beta_x,
                                              const double *beta_w,
                                              size_t n_beta_w,
                                              double gamma);

/**
 * # Safety
 * `json` must be a NUL-terminated string.
 */
struct SmtePropensity *smte_propensity_from_json(const char *json);

/**
 * # Safety
 * `g` must come from an `smte_propensity_*` constructor and not be used after.
 */
void smte_propensity_free(struct SmtePropensity *g);

/**
 * # Safety
 * Pointers must be valid for the given lengths.
 */
enum SmteStatus smte_propensity_eval(const struct SmtePropensity *g,
                                     const double *x,
                                     size_t n_x,
                                     const double *w,
                                     size_t n_w,
                                     double z,
                                     double *out_value);

/**
 * Marginal benefit of subsidy `Λ(x, w, z)`.
 *
 * # Safety
 * Pointers must be valid for the given lengths.
 */
enum SmteStatus smte_lambda(const struct SmteMte *mte,
                            const struct SmtePropensity *g,
                            enum SmteCostKind cost,
                            double cost_amount,
                            const double *x,
                            size_t n_x,
                            const double *w,
                            size_t n_w,
                            double z,
                            double *out_value);

/**
 * Optimal subsidy for one cell over `[z_lo, z_hi]`.
 *
 * # Safety
 * Pointers must be valid for the given lengths.
 */
enum SmteStatus smte_solve_cell(const struct SmteMte *mte,
                                const struct SmtePropensity *g,
                                enum SmteCostKind cost,
                                double cost_amount,
                                const double *x,
                                size_t n_x,
                                const double *w,
                                size_t n_w,
                                double z_lo,
                                double z_hi,
                                enum SmteMethod method,
                                struct SmteSolveResult *out_result);

/**
 * Net welfare of a rule over `n_cells` cells; `xs` and `ws` are row-major
 * `n_cells × x_dim` and `n_cells × w_dim`.
 *
 * # Safety
 * Pointers must be valid for the given lengths.
 */
enum SmteStatus smte_welfare(const struct SmteMte *mte,
                             const struct SmtePropensity *g,
                             enum SmteCostKind cost,
                             double cost_amount,
                             size_t n_cells,
                             const double *xs,
                             size_t x_dim,
                             const double *ws,
                             size_t w_dim,
                             const double *weights,
                             const double *assignment,
                             double z_lo,
                             double z_hi,
                             double *out_value);

/**
 * Library version as a static NUL-terminated string.
 */
const char *smte_version(void);

/**
 * Nonzero when `status` is `SMTE_OK`.
 */
int smte_ok(enum SmteStatus status);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SUBSIDY_MTE_H */
