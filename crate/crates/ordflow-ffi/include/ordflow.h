#ifndef ORDFLOW_H
#define ORDFLOW_H

/* Generated from the Rust sources by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code for every C-ABI call.
 */
typedef enum {
  /**
   * The call succeeded and all out-pointers are populated.
   */
  OrdflowStatus_Ok = 0,
  /**
   * A required pointer argument was null.
   */
  OrdflowStatus_NullPointer = 1,
  /**
   * An argument was structurally invalid (bad length, bad state index,
   * malformed distribution, degenerate table, ...).
   */
  OrdflowStatus_InvalidArgument = 2,
  /**
   * The operation needs an ergodic chain and the matrix is not one.
   */
  OrdflowStatus_NotErgodic = 3,
  /**
   * A numerical routine failed to reach its accuracy target.
   */
  OrdflowStatus_NumericalFailure = 4,
  /**
   * The underlying library panicked; the handle state is unchanged.
   */
  OrdflowStatus_Panic = 5,
} OrdflowStatus;

/**
 * Opaque transition-matrix handle.
 */
typedef struct OrdflowTpm OrdflowTpm;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Number of order-event states (always 10).
 */
uintptr_t ordflow_state_count(void);

/**
 * Wire name ("ADD-BID", ...) of the state at `index`, or null when the
 * index is out of range. The returned string is static; do not free it.
 */
const char *ordflow_order_kind_wire_name(uintptr_t index);

/**
 * Parses a case-sensitive wire name into a state index.
 *
 * # Safety
 * `name` must be a valid NUL-terminated string and `out_index` a valid
 * pointer.
 */
OrdflowStatus ordflow_order_kind_from_wire(const char *name, uintptr_t *out_index);

/**
 * Static description of a status code; never null, do not free.
 */
const char *ordflow_status_message(OrdflowStatus status);

/**
 * Estimates a transition matrix from a sequence of state indices
 * (`len >= 2`, each index `< 10`) and returns a new handle.
 *
 * # Safety
 * `symbols` must point to `len` readable bytes and `out_tpm` must be a
 * valid pointer.
 */
OrdflowStatus ordflow_tpm_from_sequence(const uint8_t *symbols,
                                        uintptr_t len,
                                        OrdflowTpm **out_tpm);

/**
 * Builds a handle from a row-major 10x10 probability matrix. Rows must sum
 * to one (or to zero for unsupported states).
 *
 * # Safety
 * `probs` must point to 100 readable doubles and `out_tpm` must be valid.
 */
OrdflowStatus ordflow_tpm_from_probs(const double *probs, OrdflowTpm **out_tpm);

/**
 * Copies the handle's probabilities into a row-major 100-double buffer.
 *
 * # Safety
 * `tpm` must be a live handle and `out_probs` must point to 100 writable
 * doubles.
 */
OrdflowStatus ordflow_tpm_probs(const OrdflowTpm *tpm, double *out_probs);

/**
 * Whether a row has any observed transitions (1) or is unsupported (0).
 *
 * # Safety
 * `tpm` must be a live handle and `out_supported` a valid pointer.
 */
OrdflowStatus ordflow_tpm_row_supported(const OrdflowTpm *tpm,
                                        uintptr_t row,
                                        uint8_t *out_supported);

/**
 * Averages `count >= 1` handles row-wise into a new handle.
 *
 * # Safety
 * `tpms` must point to `count` live handles and `out_tpm` must be valid.
 */
OrdflowStatus ordflow_tpm_average(const OrdflowTpm *const *tpms,
                                  uintptr_t count,
                                  OrdflowTpm **out_tpm);

/**
 * Classifies the chain: 0 ergodic, 1 reducible, 2 periodic.
 *
 * # Safety
 * `tpm` must be a live handle and `out_class` a valid pointer.
 */
OrdflowStatus ordflow_tpm_classify(const OrdflowTpm *tpm, int32_t *out_class);

/**
 * Solves the stationary distribution of an ergodic handle into a
 * 10-double buffer.
 *
 * # Safety
 * `tpm` must be a live handle and `out_pi` must point to 10 writable
 * doubles.
 */
OrdflowStatus ordflow_tpm_stationary(const OrdflowTpm *tpm, double *out_pi);

/**
 * Copies the self-transition probabilities (degree of inertia) into a
 * 10-double buffer.
 *
 * # Safety
 * `tpm` must be a live handle and `out_inertia` must point to 10 writable
 * doubles.
 */
OrdflowStatus ordflow_tpm_inertia(const OrdflowTpm *tpm, double *out_inertia);

/**
 * Releases a handle; a null pointer is a no-op.
 *
 * # Safety
 * `tpm` must be null or a handle produced by this library, and must not be
 * used after this call.
 */
void ordflow_tpm_free(OrdflowTpm *tpm);

/**
 * G-test of serial dependence at `lag` over a sequence of state indices.
 * Writes the statistic, degrees of freedom, p-value and pair count.
 *
 * # Safety
 * `symbols` must point to `len` readable bytes; every out-pointer must be
 * valid.
 */
OrdflowStatus ordflow_g_test(const uint8_t *symbols,
                             uintptr_t len,
                             uintptr_t lag,
                             double *out_g,
                             uint32_t *out_df,
                             double *out_p,
                             uint64_t *out_n);

/**
 * Upper-tail chi-squared probability of `x` at `df` degrees of freedom.
 *
 * # Safety
 * `out_p` must be a valid pointer.
 */
OrdflowStatus ordflow_chi_square_sf(double x, uint32_t df, double *out_p);

/**
 * Kullback-Leibler divergence (bits) between two `len`-bucket
 * distributions.
 *
 * # Safety
 * `p` and `q` must point to `len` readable doubles; `out` must be valid.
 */
OrdflowStatus ordflow_kl_divergence(const double *p, const double *q, uintptr_t len, double *out);

/**
 * Jensen-Shannon divergence (bits) between two `len`-bucket
 * distributions.
 *
 * # Safety
 * `p` and `q` must point to `len` readable doubles; `out` must be valid.
 */
OrdflowStatus ordflow_js_divergence(const double *p, const double *q, uintptr_t len, double *out);

/**
 * Jensen-Shannon distance (square root of the divergence).
 *
 * # Safety
 * `p` and `q` must point to `len` readable doubles; `out` must be valid.
 */
OrdflowStatus ordflow_js_distance(const double *p, const double *q, uintptr_t len, double *out);

/**
 * Simulates `len` state indices from an ergodic row-major matrix under a
 * deterministic seed. `start` is a fixed first state, or -1 to draw the
 * first state from the stationary distribution.
 *
 * # Safety
 * `probs` must point to 100 readable doubles and `out_symbols` to `len`
 * writable bytes.
 */
OrdflowStatus ordflow_simulate(const double *probs,
                               uintptr_t len,
                               uint64_t seed,
                               int32_t start,
                               uint8_t *out_symbols);

/**
 * DBSCAN over `count` 2-D points stored as interleaved x,y pairs. Writes
 * one label per point: the cluster id, or -1 for noise.
 *
 * # Safety
 * `points` must hold `2 * count` readable doubles and `out_labels` must
 * hold `count` writable values.
 */
OrdflowStatus ordflow_dbscan(const double *points,
                             uintptr_t count,
                             double eps,
                             uintptr_t min_pts,
                             int64_t *out_labels);

/**
 * Sorted (descending) distances to each point's k-th nearest neighbour,
 * for choosing a DBSCAN radius. Requires `1 <= k < count`.
 *
 * # Safety
 * `points` must hold `2 * count` readable doubles and `out_distances`
 * must hold `count` writable doubles.
 */
OrdflowStatus ordflow_k_distance(const double *points,
                                 uintptr_t count,
                                 uintptr_t k,
                                 double *out_distances);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ORDFLOW_H */
