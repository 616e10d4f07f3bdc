#ifndef NHARMONIC_H
#define NHARMONIC_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Result code of every call.
typedef enum NhStatus {
  NH_STATUS_OK = 0,
  NH_STATUS_DOMAIN = 1,
  NH_STATUS_NITSCHE_VIOLATION = 2,
  NH_STATUS_NON_REGULAR_METRIC = 3,
  NH_STATUS_UNBOUNDED = 4,
  NH_STATUS_RANGE = 5,
  NH_STATUS_DIVERGENT = 6,
  NH_STATUS_QUADRATURE = 7,
  NH_STATUS_NO_CONVERGENCE = 8,
  NH_STATUS_DEGENERATE_JACOBIAN = 9,
  NH_STATUS_NOT_SERIALIZABLE = 10,
  NH_STATUS_IO = 11,
  NH_STATUS_NULL_POINTER = 12,
  NH_STATUS_INVALID_ARGUMENT = 13,
  NH_STATUS_BUFFER_TOO_SMALL = 14,
  NH_STATUS_PANIC = 15,
} NhStatus;

// Opaque radial metric.
typedef struct NhMetric NhMetric;

// Opaque solved radial profile.
typedef struct NhSolution NhSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL if none. The
// pointer stays valid until the next failing call on the same thread.
const char *nh_last_error(void);

// Library version as a static NUL-terminated string.
const char *nh_version(void);

// `rho(s) = value` (`value > 0`).
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum NhStatus nh_metric_constant(double value, struct NhMetric **out);

// `rho(s) = s^nu`.
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum NhStatus nh_metric_power(double nu, struct NhMetric **out);

// Parse `constant`, `constant:<v>` or `power:<nu>`.
//
// # Safety
// `spec` must be a NUL-terminated string; `out` as in [`nh_metric_constant`].
enum NhStatus nh_metric_parse(const char *spec, struct NhMetric **out);

// Release a metric. NULL is ignored.
//
// # Safety
// `metric` must come from an `nh_metric_*` constructor and not be used again.
void nh_metric_free(struct NhMetric *metric);

// `rho(s)`.
//
// # Safety
// Pointers must be valid.
enum NhStatus nh_metric_eval(const struct NhMetric *metric, double s, double *out);

// Whether `rho(s) s^n >= rho(1)` on `[1, r_star]`.
//
// # Safety
// Pointers must be valid.
enum NhStatus nh_check_regular(const struct NhMetric *metric,
                               uint32_t n,
                               double r_star,
                               bool *regular);

// `Phi(zeta)`.
//
// # Safety
// `out` must be valid.
enum NhStatus nh_phi(double zeta, uint32_t n, double *out);

// `Psi(w)`, the inverse of `Phi` on `zeta >= 0`.
//
// # Safety
// `out` must be valid.
enum NhStatus nh_psi(double w, uint32_t n, double *out);

// `kappa_n`; `NH_STATUS_UNBOUNDED` for `n = 3`.
//
// # Safety
// `out` must be valid.
enum NhStatus nh_kappa(uint32_t n, double *out);

// Admissible range of the characteristic constant; `c_min` is `-INFINITY`
// when unbounded.
//
// # Safety
// Pointers must be valid.
enum NhStatus nh_c_bounds(const struct NhMetric *metric, uint32_t n, double *c_min, double *c_max);

// `R = H_c^{-1}(R_*)`, the domain radius mapped onto `r_star`.
//
// # Safety
// Pointers must be valid.
enum NhStatus nh_outer_radius(const struct NhMetric *metric,
                              uint32_t n,
                              double c,
                              double r_star,
                              double *out);

// Characteristic constant of the radial map `A(1, R) -> A(1, R_*)`.
// On `NH_STATUS_NITSCHE_VIOLATION`, `min_r_star` (if not NULL) receives the
// smallest admissible `R_*`, or NaN if unknown.
//
// # Safety
// `metric` and `c` must be valid; `min_r_star` may be NULL.
enum NhStatus nh_solve_c(const struct NhMetric *metric,
                         uint32_t n,
                         double big_r,
                         double r_star,
                         double *c,
                         double *min_r_star);

// Smallest admissible outer image radius for `A(1, R)`.
//
// # Safety
// Pointers must be valid.
enum NhStatus nh_nitsche_bound(const struct NhMetric *metric,
                               uint32_t n,
                               double big_r,
                               double *out);

// Solve the radial profile with constant `c` onto `A(1, r_star)` on a grid
// of `grid` cells (0 selects the default).
//
// # Safety
// `metric` and `out` must be valid.
enum NhStatus nh_solve_profile(const struct NhMetric *metric,
                               uint32_t n,
                               double c,
                               double r_star,
                               size_t grid,
                               struct NhSolution **out);

// Release a solution. NULL is ignored.
//
// # Safety
// `sol` must come from [`nh_solve_profile`] and not be used again.
void nh_solution_free(struct NhSolution *sol);

// `c`, `R` and `R_*` of a solution. Any out pointer may be NULL.
//
// # Safety
// `sol` must be valid.
enum NhStatus nh_solution_info(const struct NhSolution *sol,
                               double *c,
                               double *big_r,
                               double *r_star);

// `H(t)` and `H'(t)`; either out pointer may be NULL.
//
// # Safety
// `sol` must be valid.
enum NhStatus nh_solution_eval(const struct NhSolution *sol, double t, double *h, double *dh);

// Number of grid nodes.
//
// # Safety
// Pointers must be valid.
enum NhStatus nh_solution_grid_len(const struct NhSolution *sol, size_t *len);

// Copy the grid into `t` and `h` (each of capacity `cap`). Fails with
// `NH_STATUS_BUFFER_TOO_SMALL` if `cap` is below the grid length.
//
// # Safety
// `t` and `h` must point to at least `cap` writable doubles.
enum NhStatus nh_solution_grid(const struct NhSolution *sol, double *t, double *h, size_t cap);

// Energy of the solution and its sharp lower bound.
//
// # Safety
// Pointers must be valid.
enum NhStatus nh_solution_energy(const struct NhSolution *sol, double *energy, double *lower_bound);

// Sweep the homothety family over `[1, lambda_max]` in `steps` steps.
// `witness` receives the witness `lambda`, or NaN when none was found.
//
// # Safety
// Pointers must be valid.
enum NhStatus nh_nonminimality(const struct NhSolution *sol,
                               double lambda_max,
                               size_t steps,
                               bool *non_minimal,
                               double *witness);

// The solution as JSON. Release the string with [`nh_string_free`].
//
// # Safety
// Pointers must be valid.
enum NhStatus nh_solution_to_json(const struct NhSolution *sol, char **out);

// Release a string returned by this library. NULL is ignored.
//
// # Safety
// `s` must come from this library and not be used again.
void nh_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NHARMONIC_H */
