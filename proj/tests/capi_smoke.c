/* Exercises the shared library through its C header only. */
#include <emtransport/emtransport.h>

#include <math.h>
#include <stdio.h>
#include <string.h>

static int failures = 0;

#define EXPECT(cond)                                                   \
    do {                                                               \
        if (!(cond)) {                                                 \
            fprintf(stderr, "%s:%d: check failed: %s\n", __FILE__, __LINE__, #cond); \
            ++failures;                                                \
        }                                                              \
    } while (0)

int main(int argc, char** argv) {
    const char* out_dir = argc > 1 ? argv[1] : "capi_out";
    emt_scenario* sc = NULL;
    const char* text =
        "[medium]\nkind = \"isotropic\"\n"
        "[spectrum]\nkind = \"lorentz\"\nsigma = 0.3\n"
        "[source]\nk = [0.0, 0.0, 2.0]\nparticles = 2000\n"
        "[numerics]\nhorizon = 1.0\nbatches = 16\n"
        "[estimator]\nregion_lo = [-2.0, -2.0, -2.0]\nregion_hi = [2.0, 2.0, 2.0]\n";
    EXPECT(emt_scenario_parse(text, ".", &sc) == EMT_OK);
    if (!sc) return 1;

    uint64_t seed = 99;
    EXPECT(emt_scenario_seed(sc, &seed) == EMT_OK && seed == 0);

    double x[3] = {0.0, 0.0, 0.0}, k[3] = {0.0, 0.0, 2.0}, omegas[6];
    size_t count = 0;
    EXPECT(emt_modes(sc, x, k, omegas, 6, &count) == EMT_OK && count == 6);
    const double expected[6] = {-2, -2, 0, 0, 2, 2};
    for (int i = 0; i < 6; ++i) EXPECT(fabs(omegas[i] - expected[i]) <= 1e-12);

    double zero[3] = {0.0, 0.0, 0.0};
    EXPECT(emt_modes(sc, x, zero, omegas, 6, &count) == EMT_ERR_ZERO_WAVE_VECTOR);
    EXPECT(strlen(emt_last_error()) > 0);
    EXPECT(emt_modes(sc, x, k, omegas, 2, &count) == EMT_ERR_INVALID_ARGUMENT);

    char hash[65];
    EXPECT(emt_scenario_hash(sc, hash, sizeof hash) == EMT_OK && strlen(hash) == 64);
    EXPECT(emt_scenario_hash(sc, hash, 10) == EMT_ERR_INVALID_ARGUMENT);

    emt_run* run = NULL;
    EXPECT(emt_run_subcommand(sc, "rte", out_dir, &run) == EMT_OK);
    if (run) {
        EXPECT(emt_run_output_count(run) >= 3);
        const emt_histogram* h = emt_run_histogram(run);
        EXPECT(h != NULL);
        double total = 0.0, err = 0.0, escaped = 0.0;
        EXPECT(emt_histogram_totals(h, &total, &err, &escaped) == EMT_OK);
        EXPECT(fabs(total - 1.0) <= 1e-9);
        EXPECT(emt_histogram_bin_count(h) > 0);
        EXPECT(emt_write_manifest(sc, run, "rte", 1, 0.0, NULL, "") != EMT_OK);
        emt_run_free(run);
    }

    run = NULL;
    EXPECT(emt_run_subcommand(sc, "bogus", out_dir, &run) == EMT_ERR_INVALID_ARGUMENT);
    EXPECT(run == NULL);
    emt_scenario_free(sc);

    sc = NULL;
    EXPECT(emt_scenario_parse("[medium]\nkind = \"chiral\"\nkappa = 1.2\n", ".", &sc) == EMT_ERR_CONFIG_INVALID);
    EXPECT(strstr(emt_last_error(), "chirality out of range") != NULL);
    EXPECT(sc == NULL);
    EXPECT(strcmp(emt_error_name(EMT_ERR_CONFIG_INVALID), "") != 0);

    if (failures == 0) printf("capi smoke: all checks passed\n");
    return failures == 0 ? 0 : 1;
}
