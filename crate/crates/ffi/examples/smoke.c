/* Minimal C client: builds a chain and a family, runs one trajectory and
 * evaluates a bound. Prints the final error and exits non-zero on failure. */
#include <math.h>
#include <stdio.h>

#include "ssmgd.h"

#define CHECK(call)                                                      \
  do {                                                                   \
    SsmgdStatus s_ = (call);                                             \
    if (s_ != SSMGD_STATUS_OK) {                                         \
      char msg_[256];                                                    \
      ssmgd_last_error_message(msg_, sizeof msg_);                       \
      fprintf(stderr, "%s failed (%d): %s\n", #call, (int)s_, msg_);     \
      return 1;                                                          \
    }                                                                    \
  } while (0)

int main(void) {
  SsmgdChain *chain = NULL;
  SsmgdFamily *family = NULL;
  CHECK(ssmgd_chain_two_state(0.25, 0.25, &chain));
  CHECK(ssmgd_family_random_quadratic(3, 2, 0.5, 2.0, 1.0, 7, &family));

  SsmgdCertificate cert;
  CHECK(ssmgd_certify(family, chain, &cert));

  double w1[3] = {1.0, 1.0, 1.0};
  size_t cps[3] = {1, 100, 1000};
  double total[3], init[3], samp[3];
  CHECK(ssmgd_run_decomposed(family, chain, 0.75, 42, w1, 3, cps, 3, total, init, samp));

  double bound;
  CHECK(ssmgd_init_bound(1000, 0.75, cert.alpha, init[0], SSMGD_VARIANT_CONSERVATIVE, &bound));
  if (!(init[2] <= bound + 1e-9)) {
    fprintf(stderr, "init error %g above bound %g\n", init[2], bound);
    return 1;
  }

  SsmgdChain *bad = NULL;
  if (ssmgd_chain_two_state(0.0, 0.5, &bad) != SSMGD_STATUS_DOMAIN || bad != NULL) {
    fprintf(stderr, "expected a domain error\n");
    return 1;
  }

  printf("alpha=%.6f total_err[1000]=%.6f\n", cert.alpha, total[2]);
  ssmgd_family_free(family);
  ssmgd_chain_free(chain);
  return 0;
}
