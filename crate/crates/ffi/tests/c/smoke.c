/* Exercises the public header from C. Exits non-zero on the first failure. */
#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "swarmctl.h"

#define CHECK(cond)                                                  \
    do {                                                             \
        if (!(cond)) {                                               \
            fprintf(stderr, "%s:%d: check failed: %s\n", __FILE__,   \
                    __LINE__, #cond);                                \
            return 1;                                                \
        }                                                            \
    } while (0)

int main(void) {
    SwarmConfig *cfg = NULL;
    CHECK(swarm_config_parse("n = 3\nhorizon = 0.5\ndt = 0.05\norder = 2\n", &cfg) == SWARM_STATUS_OK);

    SwarmTrajectory *traj = NULL;
    CHECK(swarm_simulate(cfg, &traj) == SWARM_STATUS_OK);
    size_t nodes = 0, n = 0, d = 0;
    bool second = false;
    CHECK(swarm_trajectory_shape(traj, &nodes, &n, &d, &second) == SWARM_STATUS_OK);
    CHECK(nodes == 11 && n == 3 && d == 3 && second);

    size_t len = nodes * n * d;
    double *x = malloc(len * sizeof *x);
    CHECK(swarm_trajectory_positions(traj, x, len) == SWARM_STATUS_OK);
    for (size_t i = 0; i < nodes * n; i++) {
        double r = sqrt(x[3 * i] * x[3 * i] + x[3 * i + 1] * x[3 * i + 1] + x[3 * i + 2] * x[3 * i + 2]);
        CHECK(fabs(r - 1.0) < 1e-12);
    }
    CHECK(swarm_trajectory_positions(traj, x, len - 1) == SWARM_STATUS_BUFFER_TOO_SMALL);
    free(x);
    swarm_trajectory_free(traj);

    SwarmOptimization *res = NULL;
    CHECK(swarm_optimize(cfg, &res) == SWARM_STATUS_OK);
    SwarmSummary s;
    CHECK(swarm_optimization_summary(res, &s) == SWARM_STATUS_OK);
    CHECK(s.termination == SWARM_TERMINATION_TOL_REACHED);
    CHECK(s.best_cost < s.initial_cost);
    swarm_optimization_free(res);

    CHECK(swarm_config_set(cfg, "no_such_key", "1") == SWARM_STATUS_INVALID_PARAM);
    char msg[256];
    size_t need = swarm_last_error(NULL, 0);
    CHECK(need > 1 && swarm_last_error(msg, sizeof msg) == need);
    CHECK(strstr(msg, "no_such_key") != NULL);

    CHECK(swarm_simulate(NULL, &traj) == SWARM_STATUS_NULL_POINTER);
    swarm_config_free(cfg);
    swarm_config_free(NULL);
    printf("ok %s\n", swarm_version());
    return 0;
}
