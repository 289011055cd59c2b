#ifndef MMSA_H
#define MMSA_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum MmsaStatus {
  MMSA_STATUS_OK = 0,
  MMSA_STATUS_NULL_POINTER = 1,
  /**
   * Bad argument value, shape mismatch or empty input.
   */
  MMSA_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Malformed input file or record.
   */
  MMSA_STATUS_PARSE = 3,
  /**
   * Unknown model kind, task set or invalid settings.
   */
  MMSA_STATUS_CONFIG = 4,
  MMSA_STATUS_IO = 5,
  MMSA_STATUS_CHECKPOINT = 6,
  /**
   * Correlation of a constant series.
   */
  MMSA_STATUS_UNDEFINED = 7,
  MMSA_STATUS_OUT_OF_RANGE = 8,
  /**
   * A Rust panic was caught at the boundary.
   */
  MMSA_STATUS_INTERNAL = 9,
} MmsaStatus;

/**
 * Significance test variant.
 */
typedef enum MmsaTest {
  MMSA_TEST_RANK_SUM = 0,
  MMSA_TEST_SIGNED_RANK = 1,
} MmsaTest;

/**
 * Opaque handle to word-aligned segments.
 */
typedef struct MmsaDataset MmsaDataset;

/**
 * Opaque model handle.
 */
typedef struct MmsaModel MmsaModel;

typedef struct MmsaTestOutcome {
  double statistic;
  /**
   * Two-sided.
   */
  double p_value;
  /**
   * 1 when the p-value is exact, 0 for the normal approximation.
   */
  int32_t exact;
} MmsaTestOutcome;

/**
 * One prediction. Absent heads leave their `has_` flag at 0.
 */
typedef struct MmsaPrediction {
  double score;
  int32_t has_polarity;
  /**
   * Probability of positive polarity.
   */
  double polarity;
  int32_t has_intensity;
  /**
   * Neutral, weak, medium, strong.
   */
  double intensity[4];
} MmsaPrediction;

/**
 * Message of the last failure on this thread, or null if none. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *mmsa_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *mmsa_version(void);

/**
 * Polarity class of a score: 0 negative, 1 positive.
 *
 * # Safety
 * `out` must be null or point to writable memory.
 */
enum MmsaStatus mmsa_polarity_of(double score, int32_t *out);

/**
 * Intensity class of a score: 0 neutral, 1 weak, 2 medium, 3 strong.
 *
 * # Safety
 * `out` must be null or point to writable memory.
 */
enum MmsaStatus mmsa_intensity_of(double score, int32_t *out);

/**
 * Pearson correlation of two length-`n` series.
 *
 * # Safety
 * `preds` and `golds` must each point to `n` readable values.
 */
enum MmsaStatus mmsa_pearson_cc(const double *preds, const double *golds, size_t n, double *out);

/**
 * Mean absolute error of two length-`n` series.
 *
 * # Safety
 * `preds` and `golds` must each point to `n` readable values.
 */
enum MmsaStatus mmsa_mean_abs_error(const double *preds,
                                    const double *golds,
                                    size_t n,
                                    double *out);

/**
 * Two-sided Wilcoxon test between samples `a` (length `na`) and `b`
 * (length `nb`). The signed-rank variant requires `na == nb`.
 *
 * # Safety
 * `a` and `b` must point to `na` and `nb` readable values.
 */
enum MmsaStatus mmsa_wilcoxon(const double *a,
                              size_t na,
                              const double *b,
                              size_t nb,
                              enum MmsaTest test,
                              struct MmsaTestOutcome *out);

/**
 * Load a segments or aligned-segments file. Raw segments are aligned on load.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum MmsaStatus mmsa_dataset_load(const char *path, struct MmsaDataset **out);

/**
 * Number of segments, or 0 for a null handle.
 *
 * # Safety
 * `dataset` must be null or a live handle.
 */
size_t mmsa_dataset_len(const struct MmsaDataset *dataset);

/**
 * Gold score of segment `index`.
 *
 * # Safety
 * `dataset` must be null or a live handle; `out` must be writable.
 */
enum MmsaStatus mmsa_dataset_score(const struct MmsaDataset *dataset, size_t index, double *out);

/**
 * Release a dataset. Null is ignored.
 *
 * # Safety
 * `dataset` must be null or a handle not yet freed.
 */
void mmsa_dataset_free(struct MmsaDataset *dataset);

/**
 * Fresh model with default hyperparameters. `kind` is one of `vocal`,
 * `visual`, `verbal`, `EF`, `TFN`, `LF`, `HF`; `tasks` one of `S`, `S+P`,
 * `S+I`, `S+P+I`.
 *
 * # Safety
 * `kind` and `tasks` must be NUL-terminated strings; `out` must be writable.
 */
enum MmsaStatus mmsa_model_build(const char *kind,
                                 const char *tasks,
                                 uint64_t seed,
                                 struct MmsaModel **out);

/**
 * Load a checkpoint written by the CLI or [`mmsa_model_save`].
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum MmsaStatus mmsa_model_load(const char *path, struct MmsaModel **out);

/**
 * # Safety
 * `model` must be a live handle; `path` a NUL-terminated string.
 */
enum MmsaStatus mmsa_model_save(const struct MmsaModel *model, const char *path);

/**
 * Number of scalar parameters, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t mmsa_model_param_count(const struct MmsaModel *model);

/**
 * Train in place with default settings except `max_epochs` and `seed`,
 * keeping the parameters of the best validation epoch. Writes that epoch's
 * validation MAE to `best_mae` when non-null.
 *
 * # Safety
 * Handles must be live; `best_mae` must be null or writable.
 */
enum MmsaStatus mmsa_model_train(struct MmsaModel *model,
                                 const struct MmsaDataset *train_set,
                                 const struct MmsaDataset *validation,
                                 size_t max_epochs,
                                 uint64_t seed,
                                 double *best_mae);

/**
 * Evaluation-mode prediction for segment `index` of `dataset`.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum MmsaStatus mmsa_model_predict(const struct MmsaModel *model,
                                   const struct MmsaDataset *dataset,
                                   size_t index,
                                   struct MmsaPrediction *out);

/**
 * Release a model. Null is ignored.
 *
 * # Safety
 * `model` must be null or a handle not yet freed.
 */
void mmsa_model_free(struct MmsaModel *model);

#endif  /* MMSA_H */
