/* C interface to the dtse library. All functions return a dtse_status; on failure
   dtse_last_error() describes the problem for the calling thread. */
#ifndef DTSE_H
#define DTSE_H

#include <stddef.h>
#include <stdint.h>

#if defined(DTSE_BUILDING_LIBRARY)
#define DTSE_API __attribute__((visibility("default")))
#else
#define DTSE_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dtse_status {
    DTSE_OK = 0,
    DTSE_ERR_CONFIG = 1,      /* invalid configuration or argument */
    DTSE_ERR_TOPOLOGY = 2,    /* feeder description rejected */
    DTSE_ERR_DATA = 3,        /* malformed telemetry or schema */
    DTSE_ERR_NUMERIC = 4,     /* solver or training failure */
    DTSE_ERR_IO = 5,          /* file could not be read or written */
    DTSE_ERR_INTERNAL = 6
} dtse_status;

typedef struct dtse_experiment dtse_experiment;
typedef struct dtse_model dtse_model;
typedef struct dtse_report dtse_report;

DTSE_API const char* dtse_version(void);
DTSE_API const char* dtse_last_error(void);
/* Name of the underlying error kind of the last failure, e.g. "RankDeficient". */
DTSE_API const char* dtse_last_error_kind(void);
DTSE_API const char* dtse_status_name(dtse_status status);
/* Process exit code for a status: 0 ok, 2 config/data, 3 numeric, 4 io. */
DTSE_API int dtse_exit_code(dtse_status status);

/* -- experiments -- */

/* overrides: "key.path=value" strings, may be NULL when count is 0. */
DTSE_API dtse_status dtse_experiment_load(const char* config_path, const char* const* overrides, size_t count,
                                          dtse_experiment** out);
DTSE_API void dtse_experiment_free(dtse_experiment* experiment);
/* Simulates or imports the dataset. Called implicitly by the functions that need data. */
DTSE_API dtse_status dtse_experiment_prepare(dtse_experiment* experiment);
DTSE_API dtse_status dtse_experiment_set_output(dtse_experiment* experiment, const char* dir);
/* Resolved output directory; valid until the next call on this experiment. */
DTSE_API const char* dtse_experiment_output_dir(const dtse_experiment* experiment);
/* Checkpoint path from the config ("" when unset). */
DTSE_API const char* dtse_experiment_checkpoint(const dtse_experiment* experiment);
DTSE_API dtse_status dtse_experiment_set_jobs(dtse_experiment* experiment, int jobs);
DTSE_API dtse_status dtse_experiment_write_config(const dtse_experiment* experiment, const char* path);
DTSE_API dtse_status dtse_experiment_shape(dtse_experiment* experiment, size_t* steps, size_t* channels,
                                           size_t* state_dim, size_t* train_steps);
DTSE_API dtse_status dtse_dataset_export(dtse_experiment* experiment, const char* measurements_path,
                                         const char* states_path);

/* -- models -- */

/* architecture: "interactive" or "concat". */
DTSE_API dtse_status dtse_model_train(dtse_experiment* experiment, const char* architecture, dtse_model** out);
DTSE_API dtse_status dtse_model_load(const char* path, dtse_model** out);
DTSE_API void dtse_model_free(dtse_model* model);
DTSE_API dtse_status dtse_model_save(const dtse_model* model, const char* path);
DTSE_API dtse_status dtse_model_write_history(const dtse_model* model, const char* path);
DTSE_API dtse_status dtse_model_parameter_count(const dtse_model* model, size_t* count);

/* -- evaluation and reports -- */

/* Either model may be NULL. */
DTSE_API dtse_status dtse_evaluate(dtse_experiment* experiment, const dtse_model* dt, const dtse_model* ablation,
                                   dtse_report** out);
DTSE_API dtse_status dtse_wls_montecarlo(dtse_experiment* experiment, dtse_report** out);
/* Full protocol; the report is written to the experiment's output directory. out may be NULL. */
DTSE_API dtse_status dtse_run_sweep(const dtse_experiment* experiment, dtse_report** out);
DTSE_API dtse_status dtse_report_load(const char* metrics_csv, dtse_report** out);
DTSE_API dtse_status dtse_report_emit(const dtse_report* report, const char* out_dir);
DTSE_API dtse_status dtse_report_row_count(const dtse_report* report, size_t* rows);
/* Mean over seeds; DTSE_ERR_CONFIG when no row matches. */
DTSE_API dtse_status dtse_report_mean(const dtse_report* report, const char* method, double alpha, const char* metric,
                                      double* mean);
DTSE_API void dtse_report_free(dtse_report* report);

#ifdef __cplusplus
}
#endif

#endif
