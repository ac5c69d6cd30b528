#ifndef QMEASURE_H
#define QMEASURE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum QmStatus {
  QM_STATUS_OK = 0,
  QM_STATUS_NULL_POINTER = 1,
  QM_STATUS_INVALID_ARGUMENT = 2,
  QM_STATUS_INVALID_STATE = 3,
  QM_STATUS_INVALID_MODEL = 4,
  QM_STATUS_CONFIG = 5,
  QM_STATUS_NUMERICAL = 6,
  QM_STATUS_BUFFER_TOO_SMALL = 7,
  QM_STATUS_PANIC = 8,
} QmStatus;

/**
 * Verdict of one relation record.
 */
typedef enum QmVerdict {
  QM_VERDICT_HOLDS = 0,
  QM_VERDICT_VIOLATED = 1,
  QM_VERDICT_INCONCLUSIVE = 2,
} QmVerdict;

/**
 * A measurement scenario.
 */
typedef struct QmModel QmModel;

/**
 * Quantities and relation records for one scenario.
 */
typedef struct QmReport QmReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *qm_version(void);

/**
 * Message of the last failed call on this thread.
 *
 * # Safety
 * `buf` must hold `len` bytes; `needed` may be null.
 */
enum QmStatus qm_last_error(char *buf, size_t len, size_t *needed);

/**
 * Controlled-shift scenario with `m` system amplitudes and an `n × n`
 * apparatus density matrix.
 *
 * # Safety
 * `amplitudes` must hold `2m` doubles, `apparatus` `2n²` doubles, and `out`
 * must be writable.
 */
enum QmStatus qm_model_new(size_t m,
                           size_t n,
                           const double *amplitudes,
                           const double *apparatus,
                           uint64_t seed,
                           struct QmModel **out);

/**
 * Scenario from a JSON scenario document.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` writable.
 */
enum QmStatus qm_model_from_json(const char *json, struct QmModel **out);

/**
 * # Safety
 * `model` must come from `qm_model_new` or `qm_model_from_json`, or be null.
 */
void qm_model_free(struct QmModel *model);

/**
 * Computes every quantity and relation record for `model`.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum QmStatus qm_analyze(const struct QmModel *model, struct QmReport **out);

/**
 * # Safety
 * `report` must come from `qm_analyze`, or be null.
 */
void qm_report_free(struct QmReport *report);

/**
 * Named scalar quantity, e.g. `"information_gain"` or `"disturbance"`.
 *
 * # Safety
 * `report` must be live, `name` NUL-terminated, `value` writable.
 */
enum QmStatus qm_report_quantity(const struct QmReport *report, const char *name, double *value);

/**
 * Slack and verdict of relation `letter` (`'a'` to `'m'`).
 *
 * # Safety
 * `report` must be live; `slack` and `verdict` writable.
 */
enum QmStatus qm_report_relation(const struct QmReport *report,
                                 char letter,
                                 double *slack,
                                 enum QmVerdict *verdict);

/**
 * Number of violated relations.
 *
 * # Safety
 * `report` must be live and `count` writable.
 */
enum QmStatus qm_report_violations(const struct QmReport *report, size_t *count);

/**
 * The whole report as JSON. Call with a null `buf` to learn the size.
 *
 * # Safety
 * `report` must be live; `buf` must hold `len` bytes or be null.
 */
enum QmStatus qm_report_json(const struct QmReport *report, char *buf, size_t len, size_t *needed);

/**
 * Relative entropy of entanglement of a pure state on `d_a × d_b`.
 *
 * # Safety
 * `amplitudes` must hold `2 d_a d_b` doubles and `value` be writable.
 */
enum QmStatus qm_er_pure(const double *amplitudes, size_t d_a, size_t d_b, double *value);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QMEASURE_H */
