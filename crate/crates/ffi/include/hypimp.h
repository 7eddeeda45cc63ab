#ifndef HYPIMP_H
#define HYPIMP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>
#include <stdbool.h>

typedef enum {
  HP_STATUS_OK = 0,
  HP_STATUS_NULL_POINTER = 1,
  HP_STATUS_INVALID_UTF8 = 2,
  HP_STATUS_PARSE = 3,
  HP_STATUS_OUT_OF_DOMAIN = 4,
  HP_STATUS_INVALID_SPEC = 5,
  HP_STATUS_INVALID_ARGUMENT = 6,
  HP_STATUS_EMPTY_COLLECTION = 7,
  HP_STATUS_CONSTANT_MODEL = 8,
  HP_STATUS_UNSUPPORTED = 9,
  HP_STATUS_IO = 10,
  HP_STATUS_NOT_FOUND = 11,
  HP_STATUS_PANIC = 12,
} HpStatus;

/**
 * Forest-level variance decomposition of one dataset.
 */
typedef struct HpImportance HpImportance;

/**
 * Per-hyperparameter sampling prior.
 */
typedef struct HpPrior HpPrior;

/**
 * Runs grouped by dataset.
 */
typedef struct HpRuns HpRuns;

/**
 * A configuration space.
 */
typedef struct HpSpace HpSpace;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or NULL. Valid until the
 * next failing call on the same thread.
 */
const char *hp_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *hp_version(void);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must come from this library or be NULL.
 */
void hp_string_free(char *s);

/**
 * Parses a space from its JSON text.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` a valid pointer.
 */
HpStatus hp_space_from_json(const char *json, HpSpace **out);

/**
 * Loads a space file, or one of the shipped spaces by name.
 *
 * # Safety
 * `path_or_name` must be a NUL-terminated string; `out` a valid pointer.
 */
HpStatus hp_space_load(const char *path_or_name, HpSpace **out);

/**
 * Number of hyperparameters.
 *
 * # Safety
 * `space` must be a live handle; `out` a valid pointer.
 */
HpStatus hp_space_len(const HpSpace *space, size_t *out);

/**
 * # Safety
 * `space` must come from this library or be NULL; it is invalid afterwards.
 */
void hp_space_free(HpSpace *space);

/**
 * Loads a `.csv` or `.jsonl` runs file against `space`.
 *
 * # Safety
 * Pointers must be valid; `path` NUL-terminated.
 */
HpStatus hp_runs_load(const char *path, const HpSpace *space, HpRuns **out);

/**
 * New collection without datasets below `min_runs` runs and, if
 * `drop_constant`, without constant-performance datasets.
 *
 * # Safety
 * `runs` must be a live handle; `out` a valid pointer.
 */
HpStatus hp_runs_filter(const HpRuns *runs, size_t min_runs, bool drop_constant, HpRuns **out);

/**
 * Number of datasets.
 *
 * # Safety
 * `runs` must be a live handle; `out` a valid pointer.
 */
HpStatus hp_runs_dataset_count(const HpRuns *runs, size_t *out);

/**
 * # Safety
 * `runs` must come from this library or be NULL; it is invalid afterwards.
 */
void hp_runs_free(HpRuns *runs);

/**
 * Fits a forest of `n_trees` trees to one dataset and decomposes it up to
 * `max_order`.
 *
 * # Safety
 * Handles must be live; `dataset_id` NUL-terminated; `out` valid.
 */
HpStatus hp_importance_compute(const HpRuns *runs,
                               const HpSpace *space,
                               const char *dataset_id,
                               size_t n_trees,
                               size_t max_order,
                               uint64_t seed,
                               HpImportance **out);

/**
 * Importance fraction of the subset given by `n_dims` sorted, distinct
 * hyperparameter indices.
 *
 * # Safety
 * `imp` must be live, `dims` must point to `n_dims` values, `out` valid.
 */
HpStatus hp_importance_fraction(const HpImportance *imp,
                                const size_t *dims,
                                size_t n_dims,
                                double *out);

/**
 * Number of trees that contributed (trees with zero variance are skipped).
 *
 * # Safety
 * `imp` must be live; `out` valid.
 */
HpStatus hp_importance_used_trees(const HpImportance *imp, size_t *out);

/**
 * # Safety
 * `imp` must come from this library or be NULL; it is invalid afterwards.
 */
void hp_importance_free(HpImportance *imp);

/**
 * Builds a prior from the top `top_n` runs of every dataset except
 * `exclude` (NULL for none).
 *
 * # Safety
 * Handles must be live; `exclude` NULL or NUL-terminated; `out` valid.
 */
HpStatus hp_prior_build(const HpRuns *runs,
                        const HpSpace *space,
                        size_t top_n,
                        const char *exclude,
                        HpPrior **out);

/**
 * Parses a prior file's JSON text.
 *
 * # Safety
 * `json` NUL-terminated; `space` live; `out` valid.
 */
HpStatus hp_prior_from_json(const char *json, const HpSpace *space, HpPrior **out);

/**
 * Serializes a prior; release the string with `hp_string_free`.
 *
 * # Safety
 * Handles must be live; `out` valid.
 */
HpStatus hp_prior_to_json(const HpPrior *prior, const HpSpace *space, char **out);

/**
 * Draws `count` points in internal coordinates into `out`, row-major with
 * one row of `hp_space_len` values per draw.
 *
 * # Safety
 * `prior` live; `out` must hold `count * n_dims` doubles.
 */
HpStatus hp_prior_sample(const HpPrior *prior,
                         uint64_t seed,
                         size_t count,
                         double *out,
                         size_t out_len);

/**
 * Density of hyperparameter `dim` at internal value `u`.
 *
 * # Safety
 * Handles must be live; `out` valid.
 */
HpStatus hp_prior_pdf(const HpPrior *prior,
                      const HpSpace *space,
                      size_t dim,
                      double u,
                      double *out);

/**
 * # Safety
 * `prior` must come from this library or be NULL; it is invalid afterwards.
 */
void hp_prior_free(HpPrior *prior);

/**
 * Nemenyi critical distance for `k` methods over `n` datasets.
 *
 * # Safety
 * `out` must be valid.
 */
HpStatus hp_nemenyi_cd(size_t k, size_t n, double alpha, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HYPIMP_H */
