#include <math.h>
#include <stdio.h>
#include <stdlib.h>

#include "nharmonic.h"

#define CHECK(call)                                                        \
  do {                                                                     \
    NhStatus st_ = (call);                                                 \
    if (st_ != NH_STATUS_OK) {                                             \
      fprintf(stderr, "%s -> %d: %s\n", #call, (int)st_, nh_last_error()); \
      return 1;                                                            \
    }                                                                      \
  } while (0)

int main(void) {
  NhMetric *rho = NULL;
  CHECK(nh_metric_parse("constant", &rho));

  double c = 0.0;
  CHECK(nh_solve_c(rho, 3, 1.5902999119667365, 2.0, &c, NULL));
  if (fabs(c + 5.0) > 1e-9) {
    fprintf(stderr, "c = %.17g\n", c);
    return 1;
  }

  NhSolution *sol = NULL;
  CHECK(nh_solve_profile(rho, 3, c, 2.0, 256, &sol));
  double h = 0.0, e = 0.0, lb = 0.0;
  CHECK(nh_solution_eval(sol, 1.2, &h, NULL));
  CHECK(nh_solution_energy(sol, &e, &lb));
  if (!(h > 1.0 && h < 2.0) || fabs(e - lb) > 1e-6 * e) {
    return 1;
  }

  double min_r_star = 0.0;
  NhStatus st = nh_solve_c(rho, 3, 4.0, 1.0001, &c, &min_r_star);
  if (st != NH_STATUS_NITSCHE_VIOLATION || fabs(min_r_star - 2.7412616530002866) > 1e-9) {
    return 1;
  }

  nh_solution_free(sol);
  nh_metric_free(rho);
  printf("ok %s\n", nh_version());
  return 0;
}
