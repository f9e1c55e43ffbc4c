/* Copyright 2026 The tweezer-gates Authors
 * SPDX-License-Identifier: Apache-2.0 */

#ifndef TWEEZER_GATES_H
#define TWEEZER_GATES_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum TgStatus {
  TG_STATUS_OK = 0,
  TG_STATUS_NULL_POINTER = 1,
  TG_STATUS_INVALID_INPUT = 2,
  TG_STATUS_NO_CONVERGENCE = 3,
  TG_STATUS_UNSTABLE = 4,
  TG_STATUS_NOT_LOCALIZED = 5,
  TG_STATUS_INFEASIBLE = 6,
  TG_STATUS_IO = 7,
  TG_STATUS_BUFFER_TOO_SMALL = 8,
  TG_STATUS_PANIC = 9,
} TgStatus;

/**
 * Gate mode selector for [`tg_design_infinite`].
 */
typedef enum TgMode {
  TG_MODE_STRETCH = 0,
  TG_MODE_COM = 1,
} TgMode;

/**
 * Opaque periodic band structure.
 */
typedef struct TgBands TgBands;

/**
 * Opaque equilibrium chain.
 */
typedef struct TgChain TgChain;

/**
 * Opaque set of transverse normal modes.
 */
typedef struct TgModes TgModes;

/**
 * Constant-amplitude gate design on a periodic chain.
 */
typedef struct TgDesign {
  double mu;
  double tau;
  double amplitude;
  double delta_f;
  double delta_chi;
  double crosstalk;
} TgDesign;

/**
 * Tweezer budget for one species and wavelength.
 */
typedef struct TgFeasibility {
  double waist_nm;
  double power_mw;
  double delta_f_sc;
  double distance_um;
} TgFeasibility;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *tg_version(void);

/**
 * Copy the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `cap`). Returns the full message length without the NUL.
 *
 * # Safety
 * `buf` must be null or point to `cap` writable bytes.
 */
size_t tg_last_error(char *buf, size_t cap);

/**
 * Equilibrium of `n_ions` ions with `gamma_z` calibrated so that the
 * register (excluding `n_buffer` ions per end) has the given `epsilon`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum TgStatus tg_chain_new(size_t n_ions, size_t n_buffer, double epsilon, struct TgChain **out);

/**
 * # Safety
 * `h` must come from [`tg_chain_new`] and not be used afterwards.
 */
void tg_chain_free(struct TgChain *h);

/**
 * # Safety
 * `h` must be a live handle and `out` valid.
 */
enum TgStatus tg_chain_epsilon(const struct TgChain *h, double *out);

/**
 * Axial positions in units of `l0`.
 *
 * # Safety
 * `h` must be a live handle, `len` valid, `buf` null or `cap` writable doubles.
 */
enum TgStatus tg_chain_positions(const struct TgChain *h, double *buf, size_t cap, size_t *len);

/**
 * Transverse (x) modes with per-ion tweezer frequencies `nu0[0..n_ions]`.
 *
 * # Safety
 * `chain` must be live, `nu0` must hold `n_ions` values, `out` valid.
 */
enum TgStatus tg_modes_new(const struct TgChain *chain,
                           const double *nu0,
                           size_t n,
                           struct TgModes **out);

/**
 * # Safety
 * `h` must come from [`tg_modes_new`] and not be used afterwards.
 */
void tg_modes_free(struct TgModes *h);

/**
 * Mode frequencies `ν_n`, descending.
 *
 * # Safety
 * As for [`tg_chain_positions`].
 */
enum TgStatus tg_modes_frequencies(const struct TgModes *h, double *buf, size_t cap, size_t *len);

/**
 * Mode vector `n` over all ions.
 *
 * # Safety
 * As for [`tg_chain_positions`].
 */
enum TgStatus tg_modes_vector(const struct TgModes *h,
                              size_t n,
                              double *buf,
                              size_t cap,
                              size_t *len);

/**
 * Band structure of a periodic chain with cell size `p` and the first two
 * slots pinned at `nu0`.
 *
 * # Safety
 * `out` must be valid.
 */
enum TgStatus tg_bands_new(size_t p,
                           double epsilon,
                           double nu0,
                           size_t k_points,
                           struct TgBands **out);

/**
 * # Safety
 * `h` must come from [`tg_bands_new`] and not be used afterwards.
 */
void tg_bands_free(struct TgBands *h);

/**
 * Band centers, one per band.
 *
 * # Safety
 * As for [`tg_chain_positions`].
 */
enum TgStatus tg_bands_centers(const struct TgBands *h, double *buf, size_t cap, size_t *len);

/**
 * Bandwidths (max − min over k), one per band.
 *
 * # Safety
 * As for [`tg_chain_positions`].
 */
enum TgStatus tg_bands_widths(const struct TgBands *h, double *buf, size_t cap, size_t *len);

/**
 * Constant-amplitude design with default settings on the given bands.
 *
 * # Safety
 * `h` must be live and `out` valid.
 */
enum TgStatus tg_design_infinite(const struct TgBands *h, enum TgMode mode, struct TgDesign *out);

/**
 * Switching prefactor `√K` for moving the pinned pair from slots (0,1) to (1,2).
 *
 * # Safety
 * `out` must be valid.
 */
enum TgStatus tg_switching_sqrt_k(size_t p, double epsilon, double nu0, double *out);

/**
 * Power and scattering infidelity for a built-in species.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` valid.
 */
enum TgStatus tg_feasibility(const char *name,
                             double wavelength_nm,
                             double nu0,
                             double epsilon,
                             double freq_x_hz,
                             double na,
                             struct TgFeasibility *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TWEEZER_GATES_H */
