#ifndef PROSPECT_H
#define PROSPECT_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum ProspectModality {
  PROSPECT_MODALITY_OCULAR = 0,
  PROSPECT_MODALITY_CARDIAC = 1,
  PROSPECT_MODALITY_FUSED = 2,
} ProspectModality;

typedef enum ProspectStatus {
  PROSPECT_STATUS_OK = 0,
  PROSPECT_STATUS_NULL_ARGUMENT = 1,
  /**
   * Bad arguments, configuration or manifest content.
   */
  PROSPECT_STATUS_INVALID = 2,
  /**
   * Input that cannot support the computation.
   */
  PROSPECT_STATUS_DATA = 3,
  /**
   * A held-out participant was read while training.
   */
  PROSPECT_STATUS_LEAKAGE = 4,
  PROSPECT_STATUS_IO = 5,
  PROSPECT_STATUS_PARSE = 6,
  /**
   * A Rust panic was caught at the boundary.
   */
  PROSPECT_STATUS_PANIC = 7,
} ProspectStatus;

/**
 * Per-participant window tables.
 */
typedef struct ProspectDataset ProspectDataset;

/**
 * Result of a leave-one-subject-out evaluation.
 */
typedef struct ProspectReport ProspectReport;

typedef struct ProspectConfusion {
  uint64_t tn;
  uint64_t fp;
  uint64_t fn_;
  uint64_t tp;
} ProspectConfusion;

typedef struct ProspectMetrics {
  double bacc;
  double macro_pr;
  double macro_re;
  double macro_f1;
  double mcc;
} ProspectMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static NUL-terminated string.
 */
const char *prospect_version(void);

/**
 * Message of the last failure on this thread, or NULL. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *prospect_last_error(void);

/**
 * # Safety
 * `cm` and `out` must be valid pointers.
 */
enum ProspectStatus prospect_compute_metrics(const struct ProspectConfusion *cm,
                                             struct ProspectMetrics *out);

/**
 * RMSSD of `n` NN intervals, in the unit of the input.
 *
 * # Safety
 * `nn` must point to `n` readable doubles; `out` must be valid.
 */
enum ProspectStatus prospect_rmssd(const double *nn, size_t n, double *out);

/**
 * Generates a synthetic cohort from a JSON generator spec.
 *
 * # Safety
 * Both arguments must be NUL-terminated strings.
 */
enum ProspectStatus prospect_synthgen(const char *spec_path, const char *out_dir);

/**
 * Extracts every manifest in `manifests_dir`. `config_path` may be NULL
 * for defaults.
 *
 * # Safety
 * String arguments must be NUL-terminated; `out` must be valid.
 */
enum ProspectStatus prospect_extract(const char *manifests_dir,
                                     const char *config_path,
                                     struct ProspectDataset **out);

/**
 * Loads window tables written by `prospect_dataset_save` or the CLI.
 *
 * # Safety
 * `dir` must be NUL-terminated; `out` must be valid.
 */
enum ProspectStatus prospect_dataset_load(const char *dir, struct ProspectDataset **out);

/**
 * # Safety
 * `ds` must be a live handle and `dir` NUL-terminated.
 */
enum ProspectStatus prospect_dataset_save(const struct ProspectDataset *ds, const char *dir);

/**
 * Number of participants; 0 for NULL.
 *
 * # Safety
 * `ds` must be NULL or a live handle.
 */
size_t prospect_dataset_len(const struct ProspectDataset *ds);

/**
 * # Safety
 * `ds` must be NULL or a handle not yet freed.
 */
void prospect_dataset_free(struct ProspectDataset *ds);

/**
 * Leave-one-subject-out evaluation with z-scoring and feature selection as
 * configured. `config_path` may be NULL for defaults.
 *
 * # Safety
 * `ds` must be a live handle, `config_path` NULL or NUL-terminated, `out`
 * valid.
 */
enum ProspectStatus prospect_evaluate(const struct ProspectDataset *ds,
                                      const char *config_path,
                                      enum ProspectModality target,
                                      uint64_t seed,
                                      struct ProspectReport **out);

/**
 * Confusion matrix and metrics of one scored modality. `cm` may be NULL.
 *
 * # Safety
 * `report` must be a live handle; `cm` NULL or valid; `out` valid.
 */
enum ProspectStatus prospect_report_metrics(const struct ProspectReport *report,
                                            enum ProspectModality modality,
                                            struct ProspectConfusion *cm,
                                            struct ProspectMetrics *out);

/**
 * Report as JSON. Release the string with `prospect_string_free`.
 *
 * # Safety
 * `report` must be a live handle; `out` valid.
 */
enum ProspectStatus prospect_report_json(const struct ProspectReport *report, char **out);

/**
 * # Safety
 * `report` must be NULL or a handle not yet freed.
 */
void prospect_report_free(struct ProspectReport *report);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library and not yet freed.
 */
void prospect_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PROSPECT_H */
