#include <stdio.h>
#include <stdlib.h>

#include "panel_deconv.h"

int main(void) {
    PdPanel *panel = NULL;
    if (pd_panel_simulate("gamma(4,2)", "bgamma(2,2,3,3)", 200, 7, 0, &panel) != PD_STATUS_OK) {
        fprintf(stderr, "simulate: %s\n", pd_last_error());
        return 1;
    }
    PdCurve *curve = NULL;
    if (pd_estimate(panel, PD_ESTIMATOR_KOTLARSKI, 20.0, 0.01, &curve) != PD_STATUS_OK) {
        fprintf(stderr, "estimate: %s\n", pd_last_error());
        return 1;
    }
    size_t len = pd_curve_len(curve);
    double *u = malloc(len * sizeof(double));
    double *re = malloc(len * sizeof(double));
    double *im = malloc(len * sizeof(double));
    if (pd_curve_copy(curve, u, re, im, len) != PD_STATUS_OK || re[len / 2] != 1.0) {
        fprintf(stderr, "copy: %s\n", pd_last_error());
        return 1;
    }
    if (pd_curve_copy(curve, u, re, im, len - 1) != PD_STATUS_INVALID_ARGUMENT) {
        return 1;
    }
    printf("ok %zu\n", len);
    free(u);
    free(re);
    free(im);
    pd_curve_free(curve);
    pd_panel_free(panel);
    return 0;
}
