#include <math.h>
#include <stdio.h>
#include <string.h>

#include "coag.h"

#define CHECK(call)                                                                   \
    do {                                                                              \
        CoagStatus s_ = (call);                                                       \
        if (s_ != COAG_STATUS_OK) {                                                   \
            fprintf(stderr, "%s failed (%d): %s\n", #call, s_, coag_last_error_message()); \
            return 1;                                                                 \
        }                                                                             \
    } while (0)

int main(void) {
    double etas[64];
    for (int i = 0; i < 64; ++i) etas[i] = pow(10.0, -3.0 + 6.0 * i / 63.0);

    CoagDensity *raw = NULL, *g = NULL, *profile = NULL;
    CHECK(coag_density_from_catalog("gamma(2,1)", NULL, 0, &raw));
    CHECK(coag_density_normalize(raw, COAG_KERNEL_CONSTANT, &g));
    CHECK(coag_density_exact_profile(COAG_KERNEL_CONSTANT, &profile));

    double m[3];
    CHECK(coag_density_moments(g, 2, m));
    if (fabs(m[0] - 1.0) > 1e-9 || fabs(m[1] - 1.0) > 1e-9) return 2;

    CoagCurve *u0 = NULL, *u1 = NULL, *p = NULL;
    CHECK(coag_transform(g, COAG_TRANSFORM_LAPLACE, etas, 64, &u0));
    CHECK(coag_transform(profile, COAG_TRANSFORM_LAPLACE, etas, 64, &p));
    CHECK(coag_curve_evolve(u0, COAG_KERNEL_CONSTANT, 2.0, &u1));
    double d0 = 0.0, d1 = 0.0;
    CHECK(coag_curve_distance(u0, p, 1.5, &d0));
    CHECK(coag_curve_distance(u1, p, 1.5, &d1));
    if (!(d1 < d0 * exp(-1.0) * 1.01)) return 3;

    double vals[64];
    if (coag_curve_samples(u1, NULL, vals, 10) != COAG_STATUS_BUFFER_TOO_SMALL) return 4;
    CHECK(coag_curve_samples(u1, NULL, vals, 64));

    CoagDensity *bad = NULL;
    if (coag_density_from_catalog("lognormal", NULL, 0, &bad) != COAG_STATUS_UNKNOWN_NAME) return 5;
    if (strlen(coag_last_error_message()) == 0 || bad != NULL) return 6;

    CoagReport *r = NULL;
    bool passed = false;
    CHECK(coag_run_preset("thm1", &r));
    CHECK(coag_report_passed(r, &passed));
    if (!passed) return 7;

    coag_report_free(r);
    coag_curve_free(u0);
    coag_curve_free(u1);
    coag_curve_free(p);
    coag_density_free(raw);
    coag_density_free(g);
    coag_density_free(profile);
    printf("ok %s\n", coag_version());
    return 0;
}
