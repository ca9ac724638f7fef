#ifndef HRBENCH_H
#define HRBENCH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HrbStatus {
  HRB_STATUS_OK = 0,
  HRB_STATUS_NULL_POINTER = 1,
  HRB_STATUS_INVALID_UTF8 = 2,
  HRB_STATUS_INVALID_ARGUMENT = 3,
  HRB_STATUS_CONFIG = 4,
  HRB_STATUS_IO = 5,
  HRB_STATUS_INGESTION = 6,
  HRB_STATUS_INSUFFICIENT_DATA = 7,
  HRB_STATUS_NUMERIC = 8,
  HRB_STATUS_TRAINING = 9,
  HRB_STATUS_EVALUATION = 10,
  HRB_STATUS_BUFFER_TOO_SMALL = 11,
  HRB_STATUS_PANIC = 12,
} HrbStatus;

/**
 * Opaque result of a bench run.
 */
typedef struct HrbReport HrbReport;

/**
 * Opaque heart-rate series.
 */
typedef struct HrbSeries HrbSeries;

typedef struct HrbMetrics {
  double mae;
  double mape;
  double rmse;
} HrbMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *hrb_last_error_message(void);

/**
 * Generates a synthetic series. `profile` is `quasi_periodic`,
 * `trend_shift` or `ar1`.
 *
 * # Safety
 * `profile` must be a NUL-terminated string; `out` must be writable.
 */
enum HrbStatus hrb_series_synth(const char *profile,
                                uint64_t seed,
                                size_t length,
                                struct HrbSeries **out);

/**
 * Loads a series file: CSV with a `bpm` column when the name ends in
 * `.csv`, otherwise one reading per line.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum HrbStatus hrb_series_load(const char *path, double interval_seconds, struct HrbSeries **out);

/**
 * Number of readings; 0 for a null handle.
 *
 * # Safety
 * `series` must be null or a live handle.
 */
size_t hrb_series_len(const struct HrbSeries *series);

/**
 * Copies the readings into `buf`. Fails with `BUFFER_TOO_SMALL` when
 * `capacity` is below the series length; `written` then holds the length
 * required.
 *
 * # Safety
 * `series` must be a live handle; `buf` must hold `capacity` doubles;
 * `written` must be writable.
 */
enum HrbStatus hrb_series_values(const struct HrbSeries *series,
                                 double *buf,
                                 size_t capacity,
                                 size_t *written);

/**
 * # Safety
 * `series` must be null or a handle not yet freed.
 */
void hrb_series_free(struct HrbSeries *series);

/**
 * MAE, MAPE (as a fraction) and RMSE of `n` paired values.
 *
 * # Safety
 * `y` and `yhat` must hold `n` doubles; `out` must be writable.
 */
enum HrbStatus hrb_metrics(const double *y, const double *yhat, size_t n, struct HrbMetrics *out);

/**
 * Runs the benchmark configured by flat `key=value` lines, the same
 * format as the CLI config file, writing outputs under its `out` key.
 * Per-model failures still yield a report; see
 * [`hrb_report_failure_count`].
 *
 * # Safety
 * `config` must be a NUL-terminated string; `out` must be writable.
 */
enum HrbStatus hrb_bench_run(const char *config, struct HrbReport **out);

/**
 * Newly allocated copy of the report CSV; free with [`hrb_string_free`].
 * Null for a null handle.
 *
 * # Safety
 * `report` must be null or a live handle.
 */
char *hrb_report_csv(const struct HrbReport *report);

/**
 * Newly allocated copy of the text table; free with [`hrb_string_free`].
 *
 * # Safety
 * `report` must be null or a live handle.
 */
char *hrb_report_table(const struct HrbReport *report);

/**
 * Number of (model, series) pairs without a report row.
 *
 * # Safety
 * `report` must be null or a live handle.
 */
size_t hrb_report_failure_count(const struct HrbReport *report);

/**
 * # Safety
 * `s` must be null or a string returned by this library and not yet freed.
 */
void hrb_string_free(char *s);

/**
 * # Safety
 * `report` must be null or a handle not yet freed.
 */
void hrb_report_free(struct HrbReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HRBENCH_H */
