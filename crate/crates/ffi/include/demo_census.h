#ifndef DEMO_CENSUS_H
#define DEMO_CENSUS_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum DcStatus {
  DC_STATUS_OK = 0,
  DC_STATUS_NULL_POINTER = 1,
  DC_STATUS_INVALID_UTF8 = 2,
  DC_STATUS_INVALID_ARGUMENT = 3,
  DC_STATUS_UNMAPPED_CATEGORY = 4,
  DC_STATUS_CONFLICTING_CONSTRAINT = 5,
  DC_STATUS_UNKNOWN_GEOGRAPHY = 6,
  DC_STATUS_BACKEND_ERROR = 7,
  DC_STATUS_IO = 8,
  DC_STATUS_DOMAIN = 9,
  DC_STATUS_NEGATIVE_RESIDUAL = 10,
  DC_STATUS_ZERO_PLATFORM_SHARE = 11,
  DC_STATUS_BUFFER_TOO_SMALL = 12,
  DC_STATUS_PANIC = 13,
} DcStatus;

typedef enum DcSide {
  DC_SIDE_PLATFORM = 0,
  DC_SIDE_CENSUS = 1,
} DcSide;

typedef enum DcGender {
  DC_GENDER_ALL = 0,
  DC_GENDER_MALE = 1,
  DC_GENDER_FEMALE = 2,
} DcGender;

/**
 * Reach backend handle.
 */
typedef struct DcBackend DcBackend;

/**
 * Category registry handle.
 */
typedef struct DcRegistry DcRegistry;

/**
 * Targeting spec handle.
 */
typedef struct DcSpec DcSpec;

/**
 * One reach estimate.
 */
typedef struct DcReach {
  uint64_t count;
  /**
   * The true audience was under the privacy floor.
   */
  bool floor_applied;
  /**
   * A recorded count equal to the floor, possibly censored.
   */
  bool ambiguous_floor;
} DcReach;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * The thread's most recent error message, or NULL when the last call
 * succeeded. Valid until the next call on this thread.
 */
const char *dc_last_error(void);

/**
 * Library version as a static string.
 */
const char *dc_version(void);

/**
 * The bundled US registry.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum DcStatus dc_registry_builtin(struct DcRegistry **out);

/**
 * Loads a registry file (JSON lines).
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` valid for writes.
 */
enum DcStatus dc_registry_load(const char *path, struct DcRegistry **out);

/**
 * # Safety
 * `registry` must come from a `dc_registry_*` constructor and not be used
 * afterwards.
 */
void dc_registry_free(struct DcRegistry *registry);

/**
 * Maps a platform or baseline category to its canonical category. An
 * empty string means the category counts as unspecified.
 *
 * # Safety
 * Pointers must be valid; `buf` must hold `buf_len` bytes.
 */
enum DcStatus dc_map_to_canonical(const struct DcRegistry *registry,
                                  const char *dimension,
                                  enum DcSide side,
                                  const char *category,
                                  char *buf,
                                  size_t buf_len,
                                  size_t *out_len);

/**
 * A spec over `geo` (`country:US`, `state:WV`, `city:austin_tx@25`), all
 * ages 13+, all genders.
 *
 * # Safety
 * `geo` must be a NUL-terminated string; `out` valid for writes.
 */
enum DcStatus dc_spec_new(const char *geo, struct DcSpec **out);

/**
 * # Safety
 * `spec` must come from `dc_spec_new` and not be used afterwards.
 */
void dc_spec_free(struct DcSpec *spec);

/**
 * Age range 13..=65; 65 as maximum means 65 and over.
 *
 * # Safety
 * `spec` must be a live spec handle.
 */
enum DcStatus dc_spec_set_age(struct DcSpec *spec, uint8_t min_age, uint8_t max_age);

/**
 * # Safety
 * `spec` must be a live spec handle.
 */
enum DcStatus dc_spec_set_gender(struct DcSpec *spec, enum DcGender gender);

/**
 * Adds an include. `key` is a dimension name or `x.<attribute>`.
 * Includes on one key are a union; different keys intersect.
 *
 * # Safety
 * `spec` must be a live spec handle; strings NUL-terminated.
 */
enum DcStatus dc_spec_include(struct DcSpec *spec, const char *key, const char *category);

/**
 * Adds an exclude. Mixing includes and excludes on one key is rejected
 * with `DC_STATUS_CONFLICTING_CONSTRAINT`.
 *
 * # Safety
 * `spec` must be a live spec handle; strings NUL-terminated.
 */
enum DcStatus dc_spec_exclude(struct DcSpec *spec, const char *key, const char *category);

/**
 * The spec's canonical key.
 *
 * # Safety
 * `spec` must be a live spec handle; `buf` must hold `buf_len` bytes.
 */
enum DcStatus dc_spec_key(const struct DcSpec *spec, char *buf, size_t buf_len, size_t *out_len);

/**
 * Generates a synthetic population of `size` people from the bundled
 * config and wraps it as a backend with the privacy floor on.
 *
 * # Safety
 * `registry` must be a live handle; `out` valid for writes.
 */
enum DcStatus dc_backend_synthetic(const struct DcRegistry *registry,
                                   uint64_t size,
                                   uint64_t seed,
                                   struct DcBackend **out);

/**
 * Replays recorded reach estimates from a fixture file.
 *
 * # Safety
 * `registry` must be a live handle; `path` NUL-terminated; `out` valid.
 */
enum DcStatus dc_backend_fixtures(const struct DcRegistry *registry,
                                  const char *path,
                                  struct DcBackend **out);

/**
 * # Safety
 * `backend` must come from a `dc_backend_*` constructor and not be used
 * afterwards.
 */
void dc_backend_free(struct DcBackend *backend);

/**
 * # Safety
 * Handles must be live; `out` valid for writes.
 */
enum DcStatus dc_reach(const struct DcBackend *backend,
                       const struct DcSpec *spec,
                       struct DcReach *out);

/**
 * Pearson correlation of two series of length `n`.
 *
 * # Safety
 * `x` and `y` must point to `n` doubles; `out` valid for writes.
 */
enum DcStatus dc_pearson(const double *x, const double *y, size_t n, double *out);

/**
 * 95% interval of a correlation `r` over `n` points (Fisher transform).
 *
 * # Safety
 * `lo` and `hi` must be valid for writes.
 */
enum DcStatus dc_pearson_ci95(double r, size_t n, double *lo, double *hi);

/**
 * Correction factor `census_share / platform_share`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum DcStatus dc_correction_factor(double platform_share, double census_share, double *out);

/**
 * Audience outside the three named race groups.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum DcStatus dc_residual_race(uint64_t total,
                               uint64_t hispanic,
                               uint64_t african_american,
                               uint64_t asian_american,
                               uint64_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DEMO_CENSUS_H */
