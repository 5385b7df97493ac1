/*
 * C interface of the robmix library. Objects are opaque handles released with the matching
 * *_destroy function; every call returns an rm_status and rm_last_error() describes the most
 * recent failure on the calling thread.
 */
#ifndef ROBMIX_ROBMIX_H
#define ROBMIX_ROBMIX_H

#include <stddef.h>
#include <stdint.h>

#if defined(ROBMIX_BUILDING_LIBRARY)
#define ROBMIX_API __attribute__((visibility("default")))
#else
#define ROBMIX_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum rm_status
{
  RM_OK = 0,
  RM_ERROR_VALIDATION = 1,
  RM_ERROR_NUMERIC = 2,
  RM_ERROR_IO = 3,
  RM_ERROR_INTERNAL = 4
} rm_status;

typedef enum rm_robust_kind
{
  RM_ROBUST_MAX_MIXTURE = 1,
  RM_ROBUST_SUM_MIXTURE = 2
} rm_robust_kind;

typedef enum rm_criterion
{
  RM_CRITERION_BIC = 0,
  RM_CRITERION_AIC = 1
} rm_criterion;

typedef struct rm_mixture rm_mixture;
typedef struct rm_dataset rm_dataset;

typedef struct rm_fit_info
{
  int iterations;
  double final_log_likelihood;
  size_t reset_count;
} rm_fit_info;

typedef struct rm_dataset_counts
{
  size_t odometry;
  size_t ranges;
  size_t pseudoranges;
  size_t ground_truth;
} rm_dataset_counts;

/* Message of the last failed call on this thread; empty after a successful call. */
ROBMIX_API const char *rm_last_error(void);
ROBMIX_API const char *rm_version(void);

/* Equal weights, zero means, component j with square root information base * scale^(-j). */
ROBMIX_API rm_status rm_mixture_create_default(const double *base_sqrt_info, size_t dimension, size_t components,
                                               double scale, rm_mixture **out);
/* One component per line: weight, mean (d values), square root information (d*d values, row major). */
ROBMIX_API rm_status rm_mixture_parse(const char *text, rm_mixture **out);
ROBMIX_API void rm_mixture_destroy(rm_mixture *mixture);
ROBMIX_API size_t rm_mixture_components(const rm_mixture *mixture);
ROBMIX_API size_t rm_mixture_dimension(const rm_mixture *mixture);
/* `mean` needs dimension values, `sqrt_info` dimension^2 (row major); either may be NULL. */
ROBMIX_API rm_status rm_mixture_component(const rm_mixture *mixture, size_t index, double *weight, double *mean,
                                          double *sqrt_info);
/* Writes the text form into `buffer`; `required` receives the size including the terminator. */
ROBMIX_API rm_status rm_mixture_format(const rm_mixture *mixture, char *buffer, size_t capacity, size_t *required);

/* Fits starting from `init`; `errors` holds `count` row-major samples of the mixture dimension. */
ROBMIX_API rm_status rm_mixture_fit(const rm_mixture *init, const double *errors, size_t count, int max_iterations,
                                    double rel_tolerance, rm_mixture **out, rm_fit_info *info);
/* Residual of one error vector; `residual` needs room for dimension + 1 values, `jacobian` for
   (dimension + 1) * dimension (row major). `rows` receives the residual dimension. */
ROBMIX_API rm_status rm_mixture_residual(const rm_mixture *mixture, rm_robust_kind kind, const double *error,
                                         double *residual, double *jacobian, size_t *rows);
ROBMIX_API rm_status rm_mixture_information_criterion(const rm_mixture *mixture, const double *errors, size_t count,
                                                      rm_criterion criterion, double *value);

ROBMIX_API rm_status rm_dataset_load(const char *path, rm_dataset **out);
/* Scenario given as key=value config text (empty or NULL: uwb-like preset). */
ROBMIX_API rm_status rm_dataset_generate(const char *config_text, rm_dataset **out);
ROBMIX_API rm_status rm_dataset_write(const rm_dataset *dataset, const char *path);
ROBMIX_API void rm_dataset_destroy(rm_dataset *dataset);
ROBMIX_API rm_status rm_dataset_get_counts(const rm_dataset *dataset, rm_dataset_counts *counts);

/* Replays `dataset` with one algorithm (experiment config text supplies the settings) and reports its mean ATE. */
ROBMIX_API rm_status rm_estimate(const rm_dataset *dataset, const char *algorithm, const char *config_text,
                                 double *mean_ate);

/* Command entry points used by the robmix executable. Config arguments are file paths; a NULL
   seed pointer keeps the configured seed and a NULL out keeps the configured directory. */
ROBMIX_API rm_status rm_simulate(const char *config_path, const char *out_path, const uint64_t *seed);
ROBMIX_API rm_status rm_experiment_run(const char *config_path, const char *out_dir, const uint64_t *seed);
/* `values` overrides the configured sweep values when non-NULL (comma separated). */
ROBMIX_API rm_status rm_experiment_sweep(const char *config_path, const char *out_dir, const uint64_t *seed,
                                         const char *parameter, const char *values);
/* Result text is written to `out_path`, or to stdout when NULL. */
ROBMIX_API rm_status rm_fit_gmm_csv(const char *csv_path, const char *column, size_t components, double scale,
                                    const double *base_sigma, const char *out_path);
ROBMIX_API rm_status rm_evaluate(const char *estimate_path, const char *truth_path, const double *tolerance,
                                 const char *out_path);

#ifdef __cplusplus
}
#endif

#endif
