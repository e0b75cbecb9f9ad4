#include <math.h>
#include <stdio.h>
#include <string.h>

#include "qmc_tsfp.h"

#define CHECK(cond)                                              \
    do {                                                         \
        if (!(cond)) {                                           \
            fprintf(stderr, "line %d: %s\n", __LINE__, #cond);   \
            return 1;                                            \
        }                                                        \
    } while (0)

int main(void) {
    double gamma[3] = {1.0, 0.25, 1.0 / 9.0};
    QtLatticeRule *rule = NULL;
    CHECK(qt_cbc_construct(3, 64, gamma, QT_KERNEL_SIGN_STANDARD, &rule) == QT_STATUS_OK);
    size_t m = 0;
    uint64_t n = 0;
    CHECK(qt_lattice_rule_shape(rule, &m, &n) == QT_STATUS_OK);
    CHECK(m == 3 && n == 64);
    uint64_t z[3];
    CHECK(qt_lattice_rule_vector(rule, z, 3) == QT_STATUS_OK);
    CHECK(z[0] == 1);
    double e = 0.0;
    CHECK(qt_worst_case_error(z, gamma, 3, 64, QT_KERNEL_SIGN_STANDARD, &e) == QT_STATUS_OK);
    CHECK(e > 0.0);
    qt_lattice_rule_free(rule);

    double b = 0.0;
    CHECK(qt_bernoulli_kernel(2.0, &b) == QT_STATUS_INVALID_ARGUMENT);
    CHECK(qt_last_error_message() != NULL);

    enum { NODES = 32 };
    QtPotential *potential = NULL;
    CHECK(qt_potential_cosine_new(1.0, 1.0, 2.0, 2, M_PI, NODES, &potential) == QT_STATUS_OK);
    double xi[2] = {0.3, -0.7};
    double v[NODES];
    CHECK(qt_potential_evaluate(potential, xi, 2, 2.0, v, NODES) == QT_STATUS_OK);
    qt_potential_free(potential);

    QtSolver *solver = NULL;
    CHECK(qt_solver_new(M_PI, NODES, 0.01, 0.5, 1.0, &solver) == QT_STATUS_OK);
    double re[NODES], im[NODES], mass0 = 0.0, mass1 = 0.0;
    for (int k = 0; k < NODES; ++k) {
        double x = -M_PI + 2.0 * M_PI * k / NODES;
        re[k] = exp(-2.0 * x * x);
        im[k] = 0.0;
        mass0 += re[k] * re[k];
    }
    CHECK(qt_solver_run(solver, re, im, v, NODES) == QT_STATUS_OK);
    for (int k = 0; k < NODES; ++k) mass1 += re[k] * re[k] + im[k] * im[k];
    CHECK(fabs(mass1 - mass0) < 1e-12 * mass0);
    qt_solver_free(solver);

    CHECK(strlen(qt_version()) > 0);
    printf("ok\n");
    return 0;
}
