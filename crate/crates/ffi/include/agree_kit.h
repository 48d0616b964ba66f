#ifndef AGREE_KIT_H
#define AGREE_KIT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum AkStatus {
  AK_STATUS_OK = 0,
  /**
   * Bad input data or configuration.
   */
  AK_STATUS_VALIDATION = 2,
  /**
   * Missing or extra ids.
   */
  AK_STATUS_COVERAGE = 3,
  AK_STATUS_IO = 4,
  AK_STATUS_NULL_POINTER = 10,
  AK_STATUS_INVALID_UTF8 = 11,
  AK_STATUS_PANIC = 12,
} AkStatus;

/**
 * Parsed annotation dataset.
 */
typedef struct AkDataset AkDataset;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Owned by the
 * library and valid until the next call on the same thread.
 */
const char *ak_last_error_message(void);

/**
 * Parses `len` bytes of JSONL (`csv == 0`) or CSV (`csv != 0`).
 *
 * # Safety
 * `data` must point to `len` readable bytes; `out` must be writable.
 */
enum AkStatus ak_dataset_parse(const uint8_t *data,
                               size_t len,
                               int32_t csv,
                               struct AkDataset **out);

/**
 * Number of items in the dataset; 0 for null.
 *
 * # Safety
 * `ds` must be null or a live handle from `ak_dataset_parse`.
 */
size_t ak_dataset_len(const struct AkDataset *ds);

/**
 * Releases a dataset. Null is ignored.
 *
 * # Safety
 * `ds` must be null or a handle not yet freed.
 */
void ak_dataset_free(struct AkDataset *ds);

/**
 * Aggregates every item and writes one JSON object per line into `*out`.
 * Items without a clear majority under `simple`/`weighted` are skipped.
 * `seed` is used only when `has_seed != 0`; `half_even != 0` selects
 * half-to-even rounding for mean strategies.
 *
 * # Safety
 * `ds` must be a live handle, `strategy` a NUL-terminated string and `out`
 * writable. The returned string must be freed with `ak_string_free`.
 */
enum AkStatus ak_aggregate_jsonl(const struct AkDataset *ds,
                                 uint32_t scheme,
                                 const char *strategy,
                                 int32_t has_seed,
                                 uint64_t seed,
                                 int32_t half_even,
                                 char **out);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must be null or a string from this library not yet freed.
 */
void ak_string_free(char *s);

/**
 * Maps a six-class label into the 6-, 4- or 2-class scheme.
 *
 * # Safety
 * `out` must be writable.
 */
enum AkStatus ak_reduce_label(uint8_t label, uint32_t scheme, uint8_t *out);

/**
 * `alpha * s_r + (1 - alpha) * s_c` for normalized scores.
 *
 * # Safety
 * `out` must be writable.
 */
enum AkStatus ak_ensemble_score(double s_r, double s_c, double alpha, double *out);

/**
 * 1 when `mean_strength > threshold`, else 0.
 */
uint8_t ak_binarize(double mean_strength, double threshold);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AGREE_KIT_H */
