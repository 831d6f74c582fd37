#ifndef NLQW_H
#define NLQW_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result codes. `Ok` is zero.
 */
typedef enum NlqwStatus {
  NLQW_STATUS_OK = 0,
  NLQW_STATUS_NULL_POINTER = 1,
  NLQW_STATUS_INVALID_ARGUMENT = 2,
  NLQW_STATUS_GRID_MISMATCH = 3,
  NLQW_STATUS_NO_CONVERGENCE = 4,
  NLQW_STATUS_PRECONDITION = 5,
  NLQW_STATUS_WRAP_CONTAMINATION = 6,
  NLQW_STATUS_IO = 7,
  NLQW_STATUS_FORMAT = 8,
  NLQW_STATUS_NUMERICAL = 9,
  NLQW_STATUS_PANIC = 10,
} NlqwStatus;

/*
 The nonlinear bound-state family `z -> Phi[z]` on a window.
 */
typedef struct NlqwFamily NlqwFamily;

/*
 A two-component field on a lattice.
 */
typedef struct NlqwField NlqwField;

/*
 A walk `u -> U N(u)` on a fixed lattice.
 */
typedef struct NlqwWalk NlqwWalk;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread, or null. Valid until the
 next failing call on the same thread.
 */
const char *nlqw_last_error_message(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *nlqw_version(void);

/*
 Walk for a named preset (`kls-origin`, `kls-smooth`, `free`) on `[-L, L)`
 with nonlinearity `g(s) = c s^p` and `gamma = sigma_3`; `c = 0` is linear.

 # Safety
 `preset` must be a NUL-terminated string and `out` a valid pointer.
 */
enum NlqwStatus nlqw_walk_preset(const char *preset,
                                 size_t half_width,
                                 double c,
                                 uint32_t p,
                                 struct NlqwWalk **out);

/*
 # Safety
 `walk` must come from this library or be null.
 */
void nlqw_walk_free(struct NlqwWalk *walk);

/*
 # Safety
 `walk` and `out` must be valid pointers.
 */
enum NlqwStatus nlqw_walk_half_width(const struct NlqwWalk *walk, size_t *out);

/*
 One step `u <- U N(u)`, in place.

 # Safety
 `walk` and `field` must be valid handles.
 */
enum NlqwStatus nlqw_walk_step(const struct NlqwWalk *walk, struct NlqwField *field);

/*
 `steps` double steps in place.

 # Safety
 `walk` and `field` must be valid handles.
 */
enum NlqwStatus nlqw_walk_double_steps(const struct NlqwWalk *walk,
                                       struct NlqwField *field,
                                       size_t steps);

/*
 Zero field on `[-L, L)`.

 # Safety
 `out` must be a valid pointer.
 */
enum NlqwStatus nlqw_field_zeros(size_t half_width, struct NlqwField **out);

/*
 Field from `len = 8 L` doubles in the flat layout.

 # Safety
 `values` must point to `len` readable doubles and `out` be valid.
 */
enum NlqwStatus nlqw_field_from_values(size_t half_width,
                                       const double *values,
                                       size_t len,
                                       struct NlqwField **out);

/*
 Number of doubles in the flat layout of `field`.

 # Safety
 `field` and `out` must be valid pointers.
 */
enum NlqwStatus nlqw_field_len(const struct NlqwField *field, size_t *out);

/*
 Copies the flat layout into `values`, which must hold exactly `len` doubles.

 # Safety
 `values` must point to `len` writable doubles.
 */
enum NlqwStatus nlqw_field_values(const struct NlqwField *field, double *values, size_t len);

/*
 # Safety
 `field` and `out` must be valid pointers.
 */
enum NlqwStatus nlqw_field_copy(const struct NlqwField *field, struct NlqwField **out);

/*
 # Safety
 `field` must come from this library or be null.
 */
void nlqw_field_free(struct NlqwField *field);

/*
 l2 norm.

 # Safety
 `field` and `out` must be valid pointers.
 */
enum NlqwStatus nlqw_field_norm(const struct NlqwField *field, double *out);

/*
 Largest site norm.

 # Safety
 `field` and `out` must be valid pointers.
 */
enum NlqwStatus nlqw_field_sup_norm(const struct NlqwField *field, double *out);

/*
 # Safety
 `field` must be valid and `path` a NUL-terminated string.
 */
enum NlqwStatus nlqw_snapshot_save(const struct NlqwField *field, const char *path);

/*
 # Safety
 `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum NlqwStatus nlqw_snapshot_load(const char *path, struct NlqwField **out);

/*
 Bound-state family for a preset on the window `[-W, W)` with `g(s) = c s^p`.

 # Safety
 `preset` must be a NUL-terminated string and `out` a valid pointer.
 */
enum NlqwStatus nlqw_family_new(const char *preset,
                                size_t window,
                                double c,
                                uint32_t p,
                                struct NlqwFamily **out);

/*
 # Safety
 `family` must come from this library or be null.
 */
void nlqw_family_free(struct NlqwFamily *family);

/*
 Largest admissible `|z|`.

 # Safety
 `family` and `out` must be valid pointers.
 */
enum NlqwStatus nlqw_family_z_max(const struct NlqwFamily *family, double *out);

/*
 `Phi[z]` on the window as a new field, with its eigenangle `Lambda` and
 the residual `||U N(Phi) - e^{i Lambda} Phi||`. `lambda` and `residual`
 may be null.

 # Safety
 `family` and `out` must be valid pointers.
 */
enum NlqwStatus nlqw_family_eval(const struct NlqwFamily *family,
                                 double z_re,
                                 double z_im,
                                 struct NlqwField **out,
                                 double *lambda,
                                 double *residual);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NLQW_H */
