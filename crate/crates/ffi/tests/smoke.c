#include <math.h>
#include <stdio.h>
#include <string.h>

#include "cylmodes.h"

#define CHECK(cond)                                                      \
    do {                                                                 \
        if (!(cond)) {                                                   \
            char msg[512] = {0};                                         \
            cyl_last_error(msg, sizeof msg, NULL);                       \
            fprintf(stderr, "%s:%d: %s (%s)\n", __FILE__, __LINE__, #cond, msg); \
            return 1;                                                    \
        }                                                                \
    } while (0)

static const char *CONFIG =
    "[grid]\nnr = 24\nnz = 24\nrmax = 3.0\nlz = 3.0\n"
    "[modes]\nN = 3\nK = 2\n"
    "[time]\nt_final = 0.02\n"
    "[init]\namplitude = 0.5\nr0 = 1.5\nsigma = 0.4\n";

int main(void) {
    CylConfig *cfg = NULL;
    CylState *state = NULL;
    CylRun *run = NULL;

    CHECK(strlen(cyl_version()) > 0);
    CHECK(cyl_config_from_toml("[grid]\nnr = 1\n", &cfg) == CYL_STATUS_CONFIG);
    char msg[256];
    size_t needed = 0;
    CHECK(cyl_last_error(msg, 4, &needed) == CYL_STATUS_BUFFER_TOO_SMALL && needed > 4);
    CHECK(cyl_last_error(msg, sizeof msg, NULL) == CYL_STATUS_OK && strstr(msg, "grid.nr") != NULL);

    CHECK(cyl_config_from_toml(CONFIG, &cfg) == CYL_STATUS_OK);
    CHECK(cyl_config_set(cfg, "diag.cadence=1") == CYL_STATUS_OK);
    CHECK(cyl_state_from_config(cfg, &state) == CYL_STATUS_OK);

    size_t nr, nz, k_max;
    uint32_t n_base;
    CHECK(cyl_state_dims(state, &nr, &nz, &n_base, &k_max) == CYL_STATUS_OK);
    CHECK(nr == 24 && nz == 24 && n_base == 3 && k_max == 2);
    double buf[24 * 24];
    CHECK(cyl_state_component(state, 1, CYL_FAMILY_COS, CYL_COMPONENT_Z, buf, 24 * 24) == CYL_STATUS_OK);
    double peak = 0.0;
    for (size_t i = 0; i < 24 * 24; i++) peak = fmax(peak, fabs(buf[i]));
    CHECK(peak > 0.1);
    CHECK(cyl_state_component(state, 3, CYL_FAMILY_COS, CYL_COMPONENT_Z, buf, 24 * 24) == CYL_STATUS_INVALID_ARGUMENT);

    double e0, gap;
    CHECK(cyl_state_l2_norm_squared(state, &e0) == CYL_STATUS_OK && e0 > 0.0);
    CHECK(cyl_state_plancherel_gap(state, &gap) == CYL_STATUS_OK && gap < 1e-12);

    CHECK(cyl_run_start(cfg, state, &run) == CYL_STATUS_OK);
    bool done = false;
    while (!done) CHECK(cyl_run_advance(run, 1, &done) == CYL_STATUS_OK);
    uint64_t steps, total;
    CHECK(cyl_run_progress(run, &steps, &total) == CYL_STATUS_OK && steps == total && total > 0);

    CHECK(cyl_run_summary_json(run, NULL, 0, &needed) == CYL_STATUS_BUFFER_TOO_SMALL);
    char json[1 << 14];
    CHECK(needed < sizeof json);
    CHECK(cyl_run_summary_json(run, json, sizeof json, NULL) == CYL_STATUS_OK);
    CHECK(strstr(json, "\"energy_budget\"") != NULL);

    CylState *final = NULL;
    double e1, t;
    CHECK(cyl_run_state(run, &final) == CYL_STATUS_OK);
    CHECK(cyl_state_l2_norm_squared(final, &e1) == CYL_STATUS_OK && e1 < e0);
    CHECK(cyl_state_time(final, &t) == CYL_STATUS_OK && fabs(t - 0.02) < 1e-12);

    double f, g;
    CHECK(cyl_kernel_fm(4, 2.0, &f) == CYL_STATUS_OK);
    CHECK(cyl_kernel_gm(4, 2.0, &g) == CYL_STATUS_OK);
    CHECK(fabs(4.0 * f - g) < 1e-9);
    CHECK(cyl_kernel_fm(4, -1.0, &f) == CYL_STATUS_NUMERICAL);
    CHECK(cyl_state_l2_norm_squared(NULL, &e1) == CYL_STATUS_NULL_POINTER);

    cyl_state_free(final);
    cyl_run_free(run);
    cyl_state_free(state);
    cyl_config_free(cfg);
    cyl_config_free(NULL);
    puts("c smoke ok");
    return 0;
}
