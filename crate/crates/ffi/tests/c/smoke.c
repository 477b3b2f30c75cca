#include <math.h>
#include <stdio.h>
#include <stdlib.h>

#include "windpost.h"

#define CHECK(cond)                                                    \
    do {                                                               \
        if (!(cond)) {                                                 \
            fprintf(stderr, "%s:%d: %s\n", __FILE__, __LINE__, #cond); \
            return 1;                                                  \
        }                                                              \
    } while (0)

int main(void) {
    WpDist *d = NULL;
    double v = 0.0;
    CHECK(wp_dist_tn_new(0.0, 1.0, &d) == WP_STATUS_OK);
    CHECK(wp_crps(d, 1.0, &v) == WP_STATUS_OK);
    printf("%.17g\n", v);
    wp_dist_free(d);

    CHECK(wp_dist_gev_new(0.0, -1.0, 0.1, &d) == WP_STATUS_INVALID_ARGUMENT);
    CHECK(wp_last_error_message() != NULL);

    double members[] = {0.0, 2.0};
    CHECK(wp_dist_ensemble_new(members, 2, &d) == WP_STATUS_OK);
    CHECK(wp_crps(d, 1.0, &v) == WP_STATUS_OK);
    CHECK(fabs(v - 0.5) < 1e-15);
    wp_dist_free(d);
    return 0;
}
