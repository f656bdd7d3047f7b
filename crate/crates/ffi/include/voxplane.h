/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef VOXPLANE_H
#define VOXPLANE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes shared by every call.
typedef enum VpStatus {
  VP_STATUS_OK = 0,
  VP_STATUS_NULL_POINTER = 1,
  // Bad points, malformed files, index out of range.
  VP_STATUS_INVALID_INPUT = 2,
  VP_STATUS_CONFIG = 3,
  VP_STATUS_IO = 4,
  // A Rust panic was caught at the boundary.
  VP_STATUS_PANIC = 5,
} VpStatus;

// Point cloud, optionally with per-point labels.
typedef struct VpCloud VpCloud;

// Extracted plane groups.
typedef struct VpPlaneSet VpPlaneSet;

// Extraction parameters; see `vp_config_default` for the defaults.
typedef struct VpConfig {
  double root_size;
  double min_voxel_size;
  size_t min_points;
  double tau1;
  double tau2;
  double sigma_shift_multiple;
  // Degrees.
  double eps1;
  // Degrees.
  double eps2;
  bool merging_enabled;
} VpConfig;

// Summary of one plane group.
typedef struct VpPlaneInfo {
  double centroid[3];
  double normal[3];
  // Descending.
  double eigenvalues[3];
  size_t point_count;
  size_t member_patches;
  int64_t root_key[3];
  // Shallowest octree depth among the members.
  uint32_t depth;
} VpPlaneInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null. The pointer is
// valid until the next failing call on the same thread.
const char *vp_last_error(void);

// Copies `len` points from `xyz` (interleaved x, y, z).
//
// # Safety
// `xyz` must point to `3 * len` doubles (it may be null when `len` is 0)
// and `out` must be writable.
enum VpStatus vp_cloud_new(const double *xyz, size_t len, struct VpCloud **out);

// Reads a cloud file; the format is detected from its content.
//
// # Safety
// `path` must be a NUL-terminated string and `out` writable.
enum VpStatus vp_cloud_read(const char *path, struct VpCloud **out);

// Generates a named synthetic scene (`plane`, `corner`, `fp-slab`,
// `slab-object`, `rooms`) with ground-truth labels.
//
// # Safety
// `scene` must be a NUL-terminated string and `out` writable.
enum VpStatus vp_synth(const char *scene, double sigma, uint64_t seed, struct VpCloud **out);

// Number of points; 0 for a null handle.
//
// # Safety
// `cloud` must be null or a live handle.
size_t vp_cloud_len(const struct VpCloud *cloud);

// Borrows the interleaved coordinates (`3 * len` doubles).
//
// # Safety
// `cloud` must be a live handle; the pointer dies with it.
const double *vp_cloud_points(const struct VpCloud *cloud);

// Borrows the labels, or null when the cloud has none.
//
// # Safety
// `cloud` must be a live handle; the pointer dies with it.
const int32_t *vp_cloud_labels(const struct VpCloud *cloud);

// # Safety
// `cloud` must be null or a handle not yet freed.
void vp_cloud_free(struct VpCloud *cloud);

struct VpConfig vp_config_default(void);

// Loads the `[extraction]` table of a TOML settings file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` writable.
enum VpStatus vp_config_load(const char *path, struct VpConfig *out);

// Extracts plane groups. A null `config` means the defaults; `threads` of
// 0 or 1 runs single-threaded.
//
// # Safety
// `cloud` must be a live handle, `config` null or valid, `out` writable.
enum VpStatus vp_extract(const struct VpCloud *cloud,
                         const struct VpConfig *config,
                         size_t threads,
                         struct VpPlaneSet **out);

// # Safety
// `set` must be null or a live handle.
size_t vp_planes_len(const struct VpPlaneSet *set);

// # Safety
// `set` must be a live handle and `out` writable.
enum VpStatus vp_planes_get(const struct VpPlaneSet *set, size_t index, struct VpPlaneInfo *out);

// Borrows the cloud indices of group `index`.
//
// # Safety
// `set` must be a live handle, `indices` and `len` writable. The array
// dies with the set.
enum VpStatus vp_planes_indices(const struct VpPlaneSet *set,
                                size_t index,
                                const size_t **indices,
                                size_t *len);

// Writes the plane-set JSON document.
//
// # Safety
// `set` must be a live handle and `path` a NUL-terminated string.
enum VpStatus vp_planes_write(const struct VpPlaneSet *set, const char *path, bool with_indices);

// # Safety
// `set` must be null or a handle not yet freed.
void vp_planes_free(struct VpPlaneSet *set);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VOXPLANE_H */
