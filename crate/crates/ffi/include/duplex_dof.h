/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef DUPLEX_DOF_H
#define DUPLEX_DOF_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DdStatus {
  DD_STATUS_OK = 0,
  DD_STATUS_NULL_POINTER = 1,
  DD_STATUS_INVALID_ARGUMENT = 2,
  DD_STATUS_OUT_OF_RANGE = 3,
  DD_STATUS_PRECONDITION = 4,
  DD_STATUS_EMPTY_DOMAIN = 5,
  DD_STATUS_NUMERICAL_FAILURE = 6,
  DD_STATUS_PANIC = 7,
} DdStatus;

typedef enum DdMode {
  DD_MODE_HALF_DUPLEX = 0,
  DD_MODE_ANTENNA_CONSERVED = 1,
  DD_MODE_RF_CHAIN_CONSERVED = 2,
} DdMode;

// Opaque DoF region.
typedef struct DdRegion DdRegion;

// Residual self-interference parameters: `I = P^(1 - lambda) / (beta mu^lambda)`.
typedef struct DdSiParams {
  double lambda;
  double beta;
  double mu;
} DdSiParams;

// Relay DoF with its operating point. Fields that do not apply are NaN
// (`tau`, `gamma`) or 0 (`rx`, `tx`).
typedef struct DdRelayDof {
  double dof;
  double tau;
  double gamma;
  size_t rx;
  size_t tx;
} DdRelayDof;

typedef struct DdRate {
  double mean_rate;
  double std_err;
  uint64_t n_samples;
} DdRate;

typedef struct DdPoint {
  double d_ab;
  double d_ba;
} DdPoint;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *dd_version(void);

// Message of the last failed call on this thread, or null. Valid until the
// next failing call on the same thread.
const char *dd_last_error_message(void);

// # Safety
// `si` must be readable and `out` writable.
enum DdStatus dd_residual_si_power(double p_tx, const struct DdSiParams *si, double *out);

// HD decode-and-forward relaying DoF.
//
// # Safety
// `out` must be writable.
enum DdStatus dd_twohop_hd_dof(size_t n_a, size_t n_r, size_t n_b, struct DdRelayDof *out);

// FD decode-and-forward relaying DoF for an FD `mode`.
//
// # Safety
// `si` must be readable and `out` writable.
enum DdStatus dd_twohop_fd_dof(size_t n_a,
                               size_t n_r,
                               size_t n_b,
                               enum DdMode mode,
                               const struct DdSiParams *si,
                               struct DdRelayDof *out);

// Monte-Carlo ergodic rate of an `n_rx x n_tx` Rayleigh link at per-antenna
// SINR `gamma_sinr`.
//
// # Safety
// `out` must be writable.
enum DdStatus dd_ergodic_rate(size_t n_rx,
                              size_t n_tx,
                              double gamma_sinr,
                              uint64_t n_samples,
                              uint64_t seed,
                              struct DdRate *out);

// Two-way DoF region for any mode (`si` is ignored for half duplex and may
// be null then).
//
// # Safety
// `si` must be null or readable; `out` writable.
enum DdStatus dd_twoway_region(size_t n_a,
                               size_t n_b,
                               enum DdMode mode,
                               const struct DdSiParams *si,
                               struct DdRegion **out);

// Two-way relaying region with an FD relay (time sharing of both
// directions).
//
// # Safety
// `si` must be readable; `out` writable.
enum DdStatus dd_twr_fd_region(size_t n_a,
                               size_t n_r,
                               size_t n_b,
                               enum DdMode mode,
                               const struct DdSiParams *si,
                               struct DdRegion **out);

// HD two-way relaying MAC-BC region for symmetric end nodes.
//
// # Safety
// `out` must be writable.
enum DdStatus dd_twr_hd_region(size_t n, size_t n_r, struct DdRegion **out);

// Number of vertices, 0 for a null handle.
//
// # Safety
// `region` must be null or a live handle.
size_t dd_region_vertex_count(const struct DdRegion *region);

// Vertex `index` in counter-clockwise order starting at the origin.
//
// # Safety
// `region` must be a live handle; `out` writable.
enum DdStatus dd_region_vertex(const struct DdRegion *region, size_t index, struct DdPoint *out);

// # Safety
// `region` must be a live handle; `out` writable.
enum DdStatus dd_region_contains(const struct DdRegion *region,
                                 struct DdPoint p,
                                 double tol,
                                 bool *out);

// Largest `d_ab + d_ba` in the region.
//
// # Safety
// `region` must be a live handle; `out` writable.
enum DdStatus dd_region_max_sum(const struct DdRegion *region, double *out);

// Largest `d` with `(d, d)` in the region.
//
// # Safety
// `region` must be a live handle; `out` writable.
enum DdStatus dd_region_max_symmetric(const struct DdRegion *region, double *out);

// Release a region; null is accepted.
//
// # Safety
// `region` must be null or a handle not yet freed.
void dd_region_free(struct DdRegion *region);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DUPLEX_DOF_H */
