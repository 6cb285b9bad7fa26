#ifndef COAG_H
#define COAG_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define COAG_KERNEL_CONSTANT 0

#define COAG_KERNEL_ADDITIVE 1

#define COAG_KERNEL_MULTIPLICATIVE 2

#define COAG_TRANSFORM_LAPLACE 0

#define COAG_TRANSFORM_BERNSTEIN 1

// Bernstein transform of `x f(x)`.
#define COAG_TRANSFORM_MULT_BERNSTEIN 2

// Result of every fallible call.
typedef enum CoagStatus {
  COAG_STATUS_OK = 0,
  COAG_STATUS_NULL_POINTER = 1,
  COAG_STATUS_INVALID_ARGUMENT = 2,
  COAG_STATUS_BUFFER_TOO_SMALL = 3,
  COAG_STATUS_MOMENT_DIVERGENCE = 4,
  COAG_STATUS_DEGENERATE_DENSITY = 5,
  COAG_STATUS_INVALID_GRID = 6,
  COAG_STATUS_DOMAIN = 7,
  COAG_STATUS_UNKNOWN_NAME = 8,
  COAG_STATUS_NON_ADMISSIBLE = 9,
  COAG_STATUS_CHARACTERISTIC_CROSSING = 10,
  COAG_STATUS_DT_TOO_LARGE = 11,
  COAG_STATUS_POSITIVITY_LOSS = 12,
  COAG_STATUS_SUP_NOT_BRACKETED = 13,
  COAG_STATUS_MOMENT_MISMATCH = 14,
  COAG_STATUS_CONFIG = 15,
  COAG_STATUS_PARSE = 16,
  COAG_STATUS_IO = 17,
  COAG_STATUS_PANIC = 18,
} CoagStatus;

// A Laplace or Bernstein transform sampled on an eta grid.
typedef struct CoagCurve CoagCurve;

// A size density sampled on a grid.
typedef struct CoagDensity CoagDensity;

// The outcome of a contraction run.
typedef struct CoagReport CoagReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *coag_version(void);

// Message of the last failed call on this thread (empty after a success).
// The pointer stays valid until the next call on the same thread.
const char *coag_last_error_message(void);

// Builds a density from `len` grid points and values (copied).
//
// # Safety
// `grid` and `values` must point to `len` readable doubles; `out` must be writable.
enum CoagStatus coag_density_new(const double *grid,
                                 const double *values,
                                 size_t len,
                                 struct CoagDensity **out);

// The exact self-similar profile of `kernel` on the default size grid.
//
// # Safety
// `out` must be writable.
enum CoagStatus coag_density_exact_profile(uint32_t kernel_id, struct CoagDensity **out);

// A catalog density (`exp`, `gamma(shape,rate)`, `G_add`, ...) sampled on
// `grid`, or on the default size grid when `grid` is null.
//
// # Safety
// `name` must be a NUL-terminated string; `grid`, when not null, must point
// to `len` doubles; `out` must be writable.
enum CoagStatus coag_density_from_catalog(const char *name,
                                          const double *grid,
                                          size_t len,
                                          struct CoagDensity **out);

// Reads a density CSV file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum CoagStatus coag_density_read(const char *path, struct CoagDensity **out);

// Writes a density CSV file.
//
// # Safety
// `density` must be a live handle; `path` a NUL-terminated string.
enum CoagStatus coag_density_write(const struct CoagDensity *density, const char *path);

// Number of grid points.
//
// # Safety
// `density` must be a live handle; `out` must be writable.
enum CoagStatus coag_density_len(const struct CoagDensity *density, size_t *out);

// Copies grid and values into buffers of capacity `cap`; either may be null.
//
// # Safety
// `density` must be a live handle; non-null buffers must hold `cap` doubles.
enum CoagStatus coag_density_samples(const struct CoagDensity *density,
                                     double *grid_out,
                                     double *values_out,
                                     size_t cap);

// Moments `M_0 .. M_max_order` (`max_order <= 4`) into `out[0..=max_order]`.
// A moment that diverges at the small-size end is `+inf`.
//
// # Safety
// `density` must be a live handle; `out` must hold `max_order + 1` doubles.
enum CoagStatus coag_density_moments(const struct CoagDensity *density,
                                     size_t max_order,
                                     double *out);

// Rescales a density so the two moments fixed by `kernel` equal one.
//
// # Safety
// `density` must be a live handle; `out` must be writable.
enum CoagStatus coag_density_normalize(const struct CoagDensity *density,
                                       uint32_t kernel_id,
                                       struct CoagDensity **out);

// Releases a density; null is ignored.
//
// # Safety
// `density` must be null or a handle not freed before.
void coag_density_free(struct CoagDensity *density);

// Transforms a density on `len` eta points.
//
// # Safety
// `density` must be a live handle; `etas` must hold `len` doubles; `out` must be writable.
enum CoagStatus coag_transform(const struct CoagDensity *density,
                               uint32_t kind,
                               const double *etas,
                               size_t len,
                               struct CoagCurve **out);

// Evolves a normalized transform to self-similar time `tau` with the
// closed-form flow of `kernel`.
//
// # Safety
// `curve` must be a live handle; `out` must be writable.
enum CoagStatus coag_curve_evolve(const struct CoagCurve *curve,
                                  uint32_t kernel_id,
                                  double tau,
                                  struct CoagCurve **out);

// Number of eta points.
//
// # Safety
// `curve` must be a live handle; `out` must be writable.
enum CoagStatus coag_curve_len(const struct CoagCurve *curve, size_t *out);

// Copies etas and values into buffers of capacity `cap`; either may be null.
//
// # Safety
// `curve` must be a live handle; non-null buffers must hold `cap` doubles.
enum CoagStatus coag_curve_samples(const struct CoagCurve *curve,
                                   double *etas_out,
                                   double *values_out,
                                   size_t cap);

// Weighted sup distance `sup |a - b| / eta^kappa` between two curves on the same grid.
//
// # Safety
// `a` and `b` must be live handles; `out` must be writable.
enum CoagStatus coag_curve_distance(const struct CoagCurve *a,
                                    const struct CoagCurve *b,
                                    double kappa,
                                    double *out);

// Releases a curve; null is ignored.
//
// # Safety
// `curve` must be null or a handle not freed before.
void coag_curve_free(struct CoagCurve *curve);

// Runs a named preset (`thm1`, `thm2`, `thm3`).
//
// # Safety
// `name` must be a NUL-terminated string; `out` must be writable.
enum CoagStatus coag_run_preset(const char *name, struct CoagReport **out);

// Runs a contraction experiment from `key = value` configuration text.
//
// # Safety
// `config` must be a NUL-terminated string; `out` must be writable.
enum CoagStatus coag_run_config(const char *config, struct CoagReport **out);

// Whether every enabled check of the run passed.
//
// # Safety
// `report` must be a live handle; `out` must be writable.
enum CoagStatus coag_report_passed(const struct CoagReport *report, bool *out);

// Number of kappa entries.
//
// # Safety
// `report` must be a live handle; `out` must be writable.
enum CoagStatus coag_report_kappa_count(const struct CoagReport *report, size_t *out);

// One kappa entry. `fitted_rate` is NaN when no fit was possible. Any
// output pointer may be null.
//
// # Safety
// `report` must be a live handle; non-null outputs must be writable.
enum CoagStatus coag_report_entry(const struct CoagReport *report,
                                  size_t index,
                                  double *kappa,
                                  double *fitted_rate,
                                  double *theorem_rate,
                                  bool *contraction_holds);

// Writes the report as JSON to `path`.
//
// # Safety
// `report` must be a live handle; `path` a NUL-terminated string.
enum CoagStatus coag_report_write_json(const struct CoagReport *report, const char *path);

// Releases a report; null is ignored.
//
// # Safety
// `report` must be null or a handle not freed before.
void coag_report_free(struct CoagReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COAG_H */
