/* C interface to the electromagnetic transport library. */
#ifndef EMTRANSPORT_H
#define EMTRANSPORT_H

#include <stddef.h>
#include <stdint.h>

#if defined(EMT_BUILDING_LIBRARY)
#define EMT_API __attribute__((visibility("default")))
#else
#define EMT_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes. */
enum {
    EMT_OK = 0,
    EMT_ERR_NON_POSITIVE_DEFINITE = 1,
    EMT_ERR_ZERO_WAVE_VECTOR = 2,
    EMT_ERR_CHIRALITY_OUT_OF_RANGE = 3,
    EMT_ERR_DEGENERATE_Q = 4,
    EMT_ERR_BRANCH_TRACKING_LOST = 5,
    EMT_ERR_LEFT_DOMAIN = 6,
    EMT_ERR_GAUGE_UNAVAILABLE = 7,
    EMT_ERR_UNKNOWN_CHANNEL = 8,
    EMT_ERR_GRID_TOO_COARSE = 9,
    EMT_ERR_EMPTY_INPUT = 10,
    EMT_ERR_MIXED_MEDIA = 11,
    EMT_ERR_VANISHING_GROUP_SPEED = 12,
    EMT_ERR_DEGENERATE_KERNEL = 13,
    EMT_ERR_CONFIG_INVALID = 14,
    EMT_ERR_EMPTY_HISTOGRAM = 15,
    EMT_ERR_UNDER_RESOLVED = 16,
    EMT_ERR_GRID_MISMATCH = 17,
    EMT_ERR_INVALID_ARGUMENT = 18,
    EMT_ERR_IO = 19,
    EMT_ERR_INTERNAL = 99
};

typedef struct emt_scenario emt_scenario;   /* parsed scenario file */
typedef struct emt_run emt_run;             /* outputs and summary of one subcommand */
typedef struct emt_histogram emt_histogram; /* Monte Carlo phase-space histogram */

EMT_API const char* emt_version(void);
EMT_API const char* emt_error_name(int code);
/* Message of the last failure on the calling thread. */
EMT_API const char* emt_last_error(void);

EMT_API int emt_scenario_load(const char* path, emt_scenario** out);
EMT_API int emt_scenario_parse(const char* toml_text, const char* base_dir, emt_scenario** out);
EMT_API void emt_scenario_free(emt_scenario* scenario);
EMT_API int emt_scenario_set_seed(emt_scenario* scenario, uint64_t seed);
EMT_API int emt_scenario_set_workers(emt_scenario* scenario, int workers);
EMT_API int emt_scenario_seed(const emt_scenario* scenario, uint64_t* seed);
EMT_API int emt_scenario_workers(const emt_scenario* scenario, int* workers);
/* 64 hex characters plus terminator; capacity must be at least 65. */
EMT_API int emt_scenario_hash(const emt_scenario* scenario, char* buffer, size_t capacity);
/* Output directory from the scenario ([outputs] dir). */
EMT_API const char* emt_scenario_output_dir(const emt_scenario* scenario);

/* Eigenvalues (with multiplicity, ascending) of the dispersion matrix at (x, k). */
EMT_API int emt_modes(const emt_scenario* scenario, const double x[3], const double k[3], double* omegas,
                      size_t capacity, size_t* count);

/* Subcommands: "modes", "trace", "xsection", "rte", "wigner". Writes artifacts into out_dir. */
EMT_API int emt_run_subcommand(const emt_scenario* scenario, const char* subcommand, const char* out_dir,
                               emt_run** out);
EMT_API void emt_run_free(emt_run* run);
EMT_API const char* emt_run_summary(const emt_run* run);
EMT_API size_t emt_run_output_count(const emt_run* run);
EMT_API const char* emt_run_output(const emt_run* run, size_t index);
/* Histogram of an "rte" run; NULL for other subcommands. Owned by the run. */
EMT_API const emt_histogram* emt_run_histogram(const emt_run* run);

EMT_API int emt_histogram_totals(const emt_histogram* hist, double* total_weight, double* batch_error,
                                 double* escaped_weight);
EMT_API size_t emt_histogram_bin_count(const emt_histogram* hist);

/* Writes the run manifest; timing is recorded only when deterministic == 0. */
EMT_API int emt_write_manifest(const emt_scenario* scenario, const emt_run* run, const char* subcommand,
                               int deterministic, double wall_seconds, const char* started_utc, const char* path);

#ifdef __cplusplus
}
#endif

#endif
