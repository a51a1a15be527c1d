#ifndef DATALENS_H
#define DATALENS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum DlStatus {
  DL_STATUS_OK = 0,
  DL_STATUS_NULL_ARGUMENT = 1,
  DL_STATUS_INVALID_UTF8 = 2,
  // Malformed JSON argument or out-of-range number.
  DL_STATUS_INVALID_ARGUMENT = 3,
  // Corrupt zip, path traversal, oversize entry.
  DL_STATUS_ARCHIVE = 4,
  DL_STATUS_UNKNOWN_SERVICE = 5,
  // Unified document or rule table failed validation.
  DL_STATUS_VALIDATION = 6,
  // Every treemap node has zero weight for the chosen scale.
  DL_STATUS_DEGENERATE_LAYOUT = 7,
  DL_STATUS_UNKNOWN_ELEMENT = 8,
  DL_STATUS_IO = 9,
  DL_STATUS_PANIC = 10,
} DlStatus;

// A parsed dataset.
typedef struct DlDataset DlDataset;

// Sensitivity ratings held in memory.
typedef struct DlRatings DlRatings;

// Several datasets explored together.
typedef struct DlView DlView;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty after a success.
// The pointer stays valid until the next call on the same thread.
const char *dl_last_error(void);

// Library version as a static string.
const char *dl_version(void);

// Releases a string returned by this library.
//
// # Safety
// `s` must come from this library and not have been freed already.
void dl_string_free(char *s);

// Detects the service of a zip archive; writes its name to `out`.
//
// # Safety
// `bytes` must point to `len` readable bytes; `out` must be writable.
enum DlStatus dl_detect_service(const uint8_t *bytes, size_t len, char **out);

// Ingests a zip archive held in memory.
//
// `options_json` may be NULL or `{"service": .., "dataset_id": ..,
// "ingested_at": ..}` with every field optional. On success `out` receives
// a new dataset and, when `report_out` is not NULL, the parse report as
// JSON.
//
// # Safety
// `bytes` must point to `len` readable bytes; `name` and `options_json`
// must be NULL or NUL-terminated; `out` must be writable.
enum DlStatus dl_dataset_ingest(const uint8_t *bytes,
                                size_t len,
                                const char *name,
                                const char *options_json,
                                struct DlDataset **out,
                                char **report_out);

// Loads a unified document.
//
// # Safety
// `json` must be NUL-terminated; `out` must be writable.
enum DlStatus dl_dataset_from_unified(const char *json, struct DlDataset **out);

// Serializes a dataset as a unified document.
//
// # Safety
// `ds` must be a live dataset handle; `out` must be writable.
enum DlStatus dl_dataset_to_unified(const struct DlDataset *ds, char **out);

// Writes the dataset id to `out`.
//
// # Safety
// `ds` must be a live dataset handle; `out` must be writable.
enum DlStatus dl_dataset_id(const struct DlDataset *ds, char **out);

// # Safety
// `ds` must be NULL or a dataset handle not freed yet.
void dl_dataset_free(struct DlDataset *ds);

// Creates an empty view.
//
// # Safety
// `out` must be writable.
enum DlStatus dl_view_new(struct DlView **out);

// Adds a copy of `ds` to the view. Fails if a dataset with the same id is
// already present.
//
// # Safety
// Both handles must be live.
enum DlStatus dl_view_add_dataset(struct DlView *view, const struct DlDataset *ds);

// Removes the dataset with `dataset_id`; a missing id is not an error.
//
// # Safety
// `view` must be live; `dataset_id` NUL-terminated.
enum DlStatus dl_view_remove_dataset(struct DlView *view, const char *dataset_id);

// # Safety
// `view` must be NULL or a view handle not freed yet.
void dl_view_free(struct DlView *view);

// Selected elements in view order as a JSON array.
//
// # Safety
// `view` must be live; `selection_json` NULL (select all) or
// NUL-terminated; `out` writable.
enum DlStatus dl_view_select(const struct DlView *view, const char *selection_json, char **out);

// Stats over the selection, same document as `datalens stats --format json`.
//
// # Safety
// As for [`dl_view_select`].
enum DlStatus dl_view_stats(const struct DlView *view, const char *selection_json, char **out);

// Timeline points of the selection. With `split` one panel per dataset in
// insertion order, otherwise a single merged panel.
//
// # Safety
// As for [`dl_view_select`].
enum DlStatus dl_view_timeline(const struct DlView *view,
                               const char *selection_json,
                               int32_t tz_offset_seconds,
                               bool split,
                               char **out);

// Treemap geometry over the files of the view. Only `dataset_ids` of the
// selection is honored; `scale` is "size" or "count".
//
// # Safety
// As for [`dl_view_select`]; `scale` NUL-terminated.
enum DlStatus dl_view_treemap(const struct DlView *view,
                              const char *selection_json,
                              const char *scale,
                              double width,
                              double height,
                              char **out);

// Empty in-memory rating store.
//
// # Safety
// `out` must be writable.
enum DlStatus dl_ratings_new(struct DlRatings **out);

// Loads a ratings file; a missing file yields an empty store.
//
// # Safety
// `path` NUL-terminated; `out` writable.
enum DlStatus dl_ratings_load_file(const char *path, struct DlRatings **out);

// Writes the store atomically to `path`.
//
// # Safety
// `ratings` live; `path` NUL-terminated.
enum DlStatus dl_ratings_save_file(const struct DlRatings *ratings, const char *path);

// Parses a ratings document (for environments without file access).
//
// # Safety
// `json` NUL-terminated; `out` writable.
enum DlStatus dl_ratings_from_json(const char *json, struct DlRatings **out);

// Serializes the store as a ratings document.
//
// # Safety
// `ratings` live; `out` writable.
enum DlStatus dl_ratings_to_json(const struct DlRatings *ratings, char **out);

// Rates an element of the view; `rated_at` is seconds since the epoch.
// The rating is kept in memory; persist with [`dl_ratings_save_file`].
//
// # Safety
// Handles live; `element_id` NUL-terminated.
enum DlStatus dl_ratings_rate(struct DlRatings *ratings,
                              const struct DlView *view,
                              const char *element_id,
                              double value,
                              int64_t rated_at);

// Average rating over the rated elements of the selection. `has_value`
// is set to false, and `out` left untouched, when none is rated.
//
// # Safety
// Handles live; `selection_json` NULL or NUL-terminated; outputs writable.
enum DlStatus dl_ratings_average(const struct DlRatings *ratings,
                                 const struct DlView *view,
                                 const char *selection_json,
                                 double *out,
                                 bool *has_value);

// # Safety
// `ratings` must be NULL or a handle not freed yet.
void dl_ratings_free(struct DlRatings *ratings);

// Repairs UTF-8 text that was decoded as Latin-1.
//
// # Safety
// `text` NUL-terminated; `out` writable.
enum DlStatus dl_repair_mojibake(const char *text, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DATALENS_H */
