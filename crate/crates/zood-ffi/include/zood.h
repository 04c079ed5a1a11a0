#ifndef ZOOD_H
#define ZOOD_H

/* Generated by cbindgen from the zood-ffi crate; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every entry point. Anything other than `Ok` leaves a
// description in `zood_last_error_message`.
typedef enum ZoodStatus {
  ZOOD_STATUS_OK = 0,
  // A required pointer argument was null.
  ZOOD_STATUS_NULL_ARGUMENT = 1,
  // A string argument was not valid UTF-8.
  ZOOD_STATUS_INVALID_STRING = 2,
  // The filesystem or the file encoding failed.
  ZOOD_STATUS_IO = 3,
  // Inputs were structurally invalid (shapes, labels, domains, priors).
  ZOOD_STATUS_INVALID_DATA = 4,
  // A numerical routine could not produce a finite result.
  ZOOD_STATUS_NUMERIC = 5,
  // The library aborted an internal invariant violation.
  ZOOD_STATUS_INTERNAL = 6,
} ZoodStatus;

// A model's features with labels and domain assignments. Opaque; create
// through `zood_bundle_create` or `zood_bundle_read` and release with
// `zood_bundle_free`.
typedef struct ZoodBundle ZoodBundle;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on the calling thread, empty if no
// call has failed yet. The pointer stays valid until the next failing call
// on the same thread.
const char *zood_last_error_message(void);

// Builds a bundle from row-major features and per-sample labels/domains.
//
// # Safety
// `features` must point to `sample_count * feature_count` doubles, and
// `labels` and `domains` to `sample_count` values each. `model_id` must be
// a NUL-terminated string. On success `*out` owns the bundle and must be
// released with `zood_bundle_free`.
enum ZoodStatus zood_bundle_create(const char *model_id,
                                   const double *features,
                                   size_t sample_count,
                                   size_t feature_count,
                                   const uint32_t *labels,
                                   const uint32_t *domains,
                                   struct ZoodBundle **out);

// Reads a bundle file (binary or CSV, auto-detected).
//
// # Safety
// `path` must be a NUL-terminated string. On success `*out` owns the
// bundle and must be released with `zood_bundle_free`.
enum ZoodStatus zood_bundle_read(const char *path, struct ZoodBundle **out);

// Writes a bundle (`.csv` extension selects the text encoding).
//
// # Safety
// `bundle` must come from this library and `path` must be a
// NUL-terminated string.
enum ZoodStatus zood_bundle_write(const struct ZoodBundle *bundle, const char *path);

// Number of samples, or 0 when `bundle` is null.
//
// # Safety
// `bundle` must be null or a pointer from this library.
size_t zood_bundle_sample_count(const struct ZoodBundle *bundle);

// Number of feature columns, or 0 when `bundle` is null.
//
// # Safety
// `bundle` must be null or a pointer from this library.
size_t zood_bundle_feature_count(const struct ZoodBundle *bundle);

// Releases a bundle. Null is ignored.
//
// # Safety
// `bundle` must be null or an owned pointer from this library, and must
// not be used afterwards.
void zood_bundle_free(struct ZoodBundle *bundle);

// Scores one bundle by leave-one-domain-out evidence; writes the total
// score and the covariate scale factor.
//
// # Safety
// `bundle` must come from this library; `out_score` and `out_lambda` must
// be valid writable pointers.
enum ZoodStatus zood_score_bundle(const struct ZoodBundle *bundle,
                                  double *out_score,
                                  double *out_lambda);

// Ranks a zoo of bundles sharing labels and domains. `out_order` receives
// indices into `bundles` from best to worst and `out_scores` the matching
// scores; both must hold `count` entries.
//
// # Safety
// `bundles` must point to `count` non-null bundle pointers from this
// library; the output arrays must hold `count` writable entries.
enum ZoodStatus zood_rank_bundles(const struct ZoodBundle *const *bundles,
                                  size_t count,
                                  size_t *out_order,
                                  double *out_scores);

// Selects feature columns of one bundle against its one-hot labels with
// the spike-and-slab selector at the given prior inclusion probability and
// threshold. `out_mask` must hold one byte per feature column; entries are
// set to 1 for kept columns. `out_selected` receives the kept count.
//
// # Safety
// `bundle` must come from this library, `out_mask` must hold
// `zood_bundle_feature_count(bundle)` writable bytes, and `out_selected`
// must be a valid writable pointer.
enum ZoodStatus zood_select_columns(const struct ZoodBundle *bundle,
                                    double prior_inclusion,
                                    double threshold,
                                    uint64_t seed,
                                    uint8_t *out_mask,
                                    size_t *out_selected);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ZOOD_H */
