#include <math.h>
#include <stdio.h>
#include "loschmidt.h"

#define CHECK(call)                                                        \
    do {                                                                   \
        LsStatus s_ = (call);                                              \
        if (s_ != LS_STATUS_OK) {                                          \
            fprintf(stderr, "%s -> %d: %s\n", #call, (int)s_,              \
                    ls_last_error_message());                              \
            return 1;                                                      \
        }                                                                  \
    } while (0)

int main(void) {
    LsUnitary *u = NULL, *up = NULL;
    LsDecomposition *d = NULL, *dp = NULL;
    LsOverlap *o = NULL;
    double f[21];
    double ipr = 0.0;

    CHECK(ls_unitary_sample_cue(8, 42, &u));
    CHECK(ls_unitary_perturb(u, LS_PERTURBATION_QUBIT, 0.2, &up));
    CHECK(ls_decompose(u, &d));
    CHECK(ls_decompose(up, &dp));
    CHECK(ls_overlap_new(d, dp, &o));
    CHECK(ls_fidelity_spectral(o, 0, 20, f, 21));
    CHECK(ls_saturation_ipr(o, 0, &ipr));
    if (fabs(f[0] - 1.0) > 1e-12 || !(ipr > 0.0 && ipr <= 1.0)) {
        fprintf(stderr, "unexpected values %g %g\n", f[0], ipr);
        return 1;
    }
    if (ls_unitary_perturb(u, LS_PERTURBATION_SPIN, -1.0, &up) != LS_STATUS_INVALID_PERTURBATION) {
        fprintf(stderr, "negative delta accepted\n");
        return 1;
    }
    ls_overlap_free(o);
    ls_decomposition_free(d);
    ls_decomposition_free(dp);
    ls_unitary_free(u);
    ls_unitary_free(up);
    printf("ok %s\n", ls_version());
    return 0;
}
