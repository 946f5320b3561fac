/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef FRACFIELD_H
#define FRACFIELD_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum FfStatus {
  FF_STATUS_OK = 0,
  // A required pointer was null.
  FF_STATUS_NULL_POINTER = 1,
  // Invalid argument or configuration.
  FF_STATUS_CONFIG = 2,
  // Shapes or lengths that do not fit together.
  FF_STATUS_STRUCTURAL = 3,
  FF_STATUS_DOMAIN = 4,
  FF_STATUS_RANGE = 5,
  FF_STATUS_NUMERICAL = 6,
  FF_STATUS_EVALUATION = 7,
  FF_STATUS_IO = 8,
  // A Rust panic was caught.
  FF_STATUS_PANIC = 9,
} FfStatus;

// Which fractional operator to apply.
typedef enum FfOperator {
  FF_OPERATOR_CAPUTO_LEFT = 0,
  FF_OPERATOR_CAPUTO_RIGHT = 1,
  FF_OPERATOR_RL_LEFT = 2,
  FF_OPERATOR_RL_RIGHT = 3,
} FfOperator;

// Adjoint pairing for residual computations.
typedef enum FfMode {
  FF_MODE_CONTINUUM_FAITHFUL = 0,
  FF_MODE_DISCRETE_EXACT = 1,
} FfMode;

// Complex field configuration on a 1D grid.
typedef struct FfConfig FfConfig;

// Catalog Lagrangian density.
typedef struct FfDensity FfDensity;

// Uniform 1D grid.
typedef struct FfGrid FfGrid;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *ff_version(void);

// Length in bytes of the last error message on this thread (without NUL).
size_t ff_last_error_length(void);

// Copies the last error message on this thread into `buf` (NUL-terminated,
// truncated to `len - 1` bytes). Returns the number of bytes written
// excluding the NUL, or 0 when `buf` is null or `len` is 0.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t ff_last_error_message(char *buf, size_t len);

// Creates the grid `[a, b]` with `n` intervals.
//
// # Safety
// `out` must be a valid pointer.
enum FfStatus ff_grid_new(double a, double b, size_t n, struct FfGrid **out);

// Number of nodes, `n + 1`; 0 for a null handle.
//
// # Safety
// `grid` must be null or a live handle.
size_t ff_grid_len(const struct FfGrid *grid);

// Releases a grid. Null is ignored.
//
// # Safety
// `grid` must be null or a handle not yet freed.
void ff_grid_free(struct FfGrid *grid);

// Applies a fractional operator of order `alpha` to the real samples `f`
// (length `ff_grid_len`), writing into `out` of the same length.
//
// # Safety
// Pointers must be valid for `len` values; `grid` must be a live handle.
enum FfStatus ff_fracop_apply(enum FfOperator op,
                              double alpha,
                              const struct FfGrid *grid,
                              const double *f,
                              double *out,
                              size_t len);

// Parses a catalog density name such as `complex-scalar:0.5:1`.
//
// # Safety
// `spec` must be a NUL-terminated string and `out` a valid pointer.
enum FfStatus ff_density_parse(const char *spec, struct FfDensity **out);

// Number of fields the density expects; 0 for a null handle.
//
// # Safety
// `d` must be null or a live handle.
size_t ff_density_n_fields(const struct FfDensity *d);

// Releases a density. Null is ignored.
//
// # Safety
// `d` must be null or a handle not yet freed.
void ff_density_free(struct FfDensity *d);

// Creates a configuration of `n_fields` fields. `re` and `im` hold
// `n_fields * ff_grid_len(grid)` values, field-major; `im` may be null for
// real data.
//
// # Safety
// `re` (and `im` when not null) must hold `len` values; `out` must be valid.
enum FfStatus ff_config_new(const struct FfGrid *grid,
                            size_t n_fields,
                            const double *re,
                            const double *im,
                            size_t len,
                            struct FfConfig **out);

// Releases a configuration. Null is ignored.
//
// # Safety
// `c` must be null or a handle not yet freed.
void ff_config_free(struct FfConfig *c);

// Discrete action (trapezoid rule), complex in general.
//
// # Safety
// Handles must be live; `re` and `im` must be valid.
enum FfStatus ff_action(const struct FfDensity *d,
                        const struct FfConfig *c,
                        double *re,
                        double *im);

// Euler-Lagrange residual, written field-major into `re` / `im` of length
// `n_fields * nodes`.
//
// # Safety
// Handles must be live; outputs must hold `len` values.
enum FfStatus ff_el_residual(const struct FfDensity *d,
                             const struct FfConfig *c,
                             enum FfMode mode,
                             double *re,
                             double *im,
                             size_t len);

// `|Gateaux derivative - <EL residual, eta>|` with the exact discrete adjoint.
// `eta` is a configuration vanishing on the boundary.
//
// # Safety
// Handles must be live; `defect` must be valid.
enum FfStatus ff_variational_consistency(const struct FfDensity *d,
                                         const struct FfConfig *c,
                                         const struct FfConfig *eta,
                                         double *defect);

// Pointwise Noether residual for the phase symmetry with parameter `epsilon`,
// one value per node.
//
// # Safety
// Handles must be live; outputs must hold `len` values.
enum FfStatus ff_noether_residual_phase(const struct FfDensity *d,
                                        const struct FfConfig *c,
                                        double epsilon,
                                        enum FfMode mode,
                                        double *re,
                                        double *im,
                                        size_t len);

// Solves the discrete Dirac pair on `[0, t_end]` with `n` intervals and writes
// the conserved-quantity residual (`n + 1` values). `psi0` and `psibar_t`
// are spinors as `[re1, im1, re2, im2]`. `relative` receives the interior
// max residual over `max |m^alpha Psibar Psi|`.
//
// # Safety
// Spinor pointers must hold 4 values, outputs `len` values.
enum FfStatus ff_dirac_conserved_residual(double alpha,
                                          double m,
                                          double t_end,
                                          size_t n,
                                          const double *psi0,
                                          const double *psibar_t,
                                          enum FfMode mode,
                                          double *re,
                                          double *im,
                                          size_t len,
                                          double *relative);

// `E_{alpha, beta}(z)`.
//
// # Safety
// `re` and `im` must be valid.
enum FfStatus ff_mittag_leffler(double alpha,
                                double beta,
                                double z_re,
                                double z_im,
                                double *re,
                                double *im);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FRACFIELD_H */
