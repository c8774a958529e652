//! C ABI over the ordflow library.
//!
//! Every function returns an [`OrdflowStatus`] and writes results through
//! out-pointers. Transition matrices cross the boundary as opaque
//! [`OrdflowTpm`] handles created by the `ordflow_tpm_*` constructors and
//! released with [`ordflow_tpm_free`]. States are the indices `0..10` in the
//! canonical order (`ordflow_order_kind_wire_name` maps them to wire names).
//! Panics never unwind across the boundary; they surface as
//! `ORDFLOW_STATUS_PANIC`.

use ordflow::cluster::{self, DbscanParams, Label};
use ordflow::divergence;
use ordflow::dtmc::{self, Classification, TransitionMatrix};
use ordflow::gtest;
use ordflow::synth;
use ordflow::{OrderKind, STATE_COUNT};
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

/// Result code for every C-ABI call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrdflowStatus {
    /// The call succeeded and all out-pointers are populated.
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// An argument was structurally invalid (bad length, bad state index,
    /// malformed distribution, degenerate table, ...).
    InvalidArgument = 2,
    /// The operation needs an ergodic chain and the matrix is not one.
    NotErgodic = 3,
    /// A numerical routine failed to reach its accuracy target.
    NumericalFailure = 4,
    /// The underlying library panicked; the handle state is unchanged.
    Panic = 5,
}

/// Opaque transition-matrix handle.
pub struct OrdflowTpm {
    inner: TransitionMatrix,
}

const MATRIX_CELLS: usize = STATE_COUNT * STATE_COUNT;

fn guard(f: impl FnOnce() -> OrdflowStatus) -> OrdflowStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => OrdflowStatus::Panic,
    }
}

fn dtmc_status(err: &dtmc::DtmcError) -> OrdflowStatus {
    match err {
        dtmc::DtmcError::NotErgodic(_) => OrdflowStatus::NotErgodic,
        dtmc::DtmcError::SolverDisagreement { .. } | dtmc::DtmcError::SolveFailed(_) => {
            OrdflowStatus::NumericalFailure
        }
        _ => OrdflowStatus::InvalidArgument,
    }
}

unsafe fn symbols_from_raw(ptr: *const u8, len: usize) -> Option<Vec<OrderKind>> {
    let raw = slice::from_raw_parts(ptr, len);
    raw.iter()
        .map(|&i| OrderKind::from_index(i as usize))
        .collect()
}

unsafe fn matrix_from_raw(probs: *const f64) -> Result<TransitionMatrix, dtmc::DtmcError> {
    let flat = slice::from_raw_parts(probs, MATRIX_CELLS);
    let rows: Vec<Vec<f64>> = flat.chunks(STATE_COUNT).map(<[f64]>::to_vec).collect();
    TransitionMatrix::from_probs(rows)
}

/// Number of order-event states (always 10).
#[no_mangle]
pub extern "C" fn ordflow_state_count() -> usize {
    STATE_COUNT
}

/// Wire name ("ADD-BID", ...) of the state at `index`, or null when the
/// index is out of range. The returned string is static; do not free it.
#[no_mangle]
pub extern "C" fn ordflow_order_kind_wire_name(index: usize) -> *const c_char {
    static NAMES: [&CStr; STATE_COUNT] = [
        c"ADD-BID",
        c"ADD-ASK",
        c"DELETE-BID",
        c"DELETE-ASK",
        c"FILL-BID",
        c"FILL-ASK",
        c"EXECUTE-BID",
        c"EXECUTE-ASK",
        c"CANCEL-BID",
        c"CANCEL-ASK",
    ];
    match NAMES.get(index) {
        Some(name) => name.as_ptr(),
        None => std::ptr::null(),
    }
}

/// Parses a case-sensitive wire name into a state index.
///
/// # Safety
/// `name` must be a valid NUL-terminated string and `out_index` a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn ordflow_order_kind_from_wire(
    name: *const c_char,
    out_index: *mut usize,
) -> OrdflowStatus {
    if name.is_null() || out_index.is_null() {
        return OrdflowStatus::NullPointer;
    }
    guard(|| {
        let Ok(text) = CStr::from_ptr(name).to_str() else {
            return OrdflowStatus::InvalidArgument;
        };
        match OrderKind::from_wire(text) {
            Ok(kind) => {
                *out_index = kind.index();
                OrdflowStatus::Ok
            }
            Err(_) => OrdflowStatus::InvalidArgument,
        }
    })
}

/// Static description of a status code; never null, do not free.
#[no_mangle]
pub extern "C" fn ordflow_status_message(status: OrdflowStatus) -> *const c_char {
    let msg: &CStr = match status {
        OrdflowStatus::Ok => c"ok",
        OrdflowStatus::NullPointer => c"a required pointer argument was null",
        OrdflowStatus::InvalidArgument => c"an argument was invalid",
        OrdflowStatus::NotErgodic => c"the transition matrix is not ergodic",
        OrdflowStatus::NumericalFailure => c"a numerical routine failed its accuracy target",
        OrdflowStatus::Panic => c"internal panic",
    };
    msg.as_ptr()
}

/// Estimates a transition matrix from a sequence of state indices
/// (`len >= 2`, each index `< 10`) and returns a new handle.
///
/// # Safety
/// `symbols` must point to `len` readable bytes and `out_tpm` must be a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ordflow_tpm_from_sequence(
    symbols: *const u8,
    len: usize,
    out_tpm: *mut *mut OrdflowTpm,
) -> OrdflowStatus {
    if symbols.is_null() || out_tpm.is_null() {
        return OrdflowStatus::NullPointer;
    }
    guard(|| {
        let Some(kinds) = symbols_from_raw(symbols, len) else {
            return OrdflowStatus::InvalidArgument;
        };
        let estimated = dtmc::accumulate(&kinds).and_then(|c| dtmc::estimate(&c));
        match estimated {
            Ok(inner) => {
                *out_tpm = Box::into_raw(Box::new(OrdflowTpm { inner }));
                OrdflowStatus::Ok
            }
            Err(e) => dtmc_status(&e),
        }
    })
}

/// Builds a handle from a row-major 10x10 probability matrix. Rows must sum
/// to one (or to zero for unsupported states).
///
/// # Safety
/// `probs` must point to 100 readable doubles and `out_tpm` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ordflow_tpm_from_probs(
    probs: *const f64,
    out_tpm: *mut *mut OrdflowTpm,
) -> OrdflowStatus {
    if probs.is_null() || out_tpm.is_null() {
        return OrdflowStatus::NullPointer;
    }
    guard(|| match matrix_from_raw(probs) {
        Ok(inner) => {
            *out_tpm = Box::into_raw(Box::new(OrdflowTpm { inner }));
            OrdflowStatus::Ok
        }
        Err(e) => dtmc_status(&e),
    })
}

/// Copies the handle's probabilities into a row-major 100-double buffer.
///
/// # Safety
/// `tpm` must be a live handle and `out_probs` must point to 100 writable
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn ordflow_tpm_probs(
    tpm: *const OrdflowTpm,
    out_probs: *mut f64,
) -> OrdflowStatus {
    if tpm.is_null() || out_probs.is_null() {
        return OrdflowStatus::NullPointer;
    }
    guard(|| {
        let out = slice::from_raw_parts_mut(out_probs, MATRIX_CELLS);
        for (i, row) in (*tpm).inner.to_rows().into_iter().enumerate() {
            out[i * STATE_COUNT..(i + 1) * STATE_COUNT].copy_from_slice(&row);
        }
        OrdflowStatus::Ok
    })
}

/// Whether a row has any observed transitions (1) or is unsupported (0).
///
/// # Safety
/// `tpm` must be a live handle and `out_supported` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ordflow_tpm_row_supported(
    tpm: *const OrdflowTpm,
    row: usize,
    out_supported: *mut u8,
) -> OrdflowStatus {
    if tpm.is_null() || out_supported.is_null() {
        return OrdflowStatus::NullPointer;
    }
    if row >= STATE_COUNT {
        return OrdflowStatus::InvalidArgument;
    }
    guard(|| {
        *out_supported = u8::from((*tpm).inner.is_supported(row));
        OrdflowStatus::Ok
    })
}

/// Averages `count >= 1` handles row-wise into a new handle.
///
/// # Safety
/// `tpms` must point to `count` live handles and `out_tpm` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ordflow_tpm_average(
    tpms: *const *const OrdflowTpm,
    count: usize,
    out_tpm: *mut *mut OrdflowTpm,
) -> OrdflowStatus {
    if tpms.is_null() || out_tpm.is_null() {
        return OrdflowStatus::NullPointer;
    }
    guard(|| {
        let handles = slice::from_raw_parts(tpms, count);
        if handles.iter().any(|h| h.is_null()) {
            return OrdflowStatus::NullPointer;
        }
        let matrices: Vec<TransitionMatrix> =
            handles.iter().map(|&h| (*h).inner.clone()).collect();
        match dtmc::average(&matrices) {
            Ok(inner) => {
                *out_tpm = Box::into_raw(Box::new(OrdflowTpm { inner }));
                OrdflowStatus::Ok
            }
            Err(e) => dtmc_status(&e),
        }
    })
}

/// Classifies the chain: 0 ergodic, 1 reducible, 2 periodic.
///
/// # Safety
/// `tpm` must be a live handle and `out_class` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ordflow_tpm_classify(
    tpm: *const OrdflowTpm,
    out_class: *mut i32,
) -> OrdflowStatus {
    if tpm.is_null() || out_class.is_null() {
        return OrdflowStatus::NullPointer;
    }
    guard(|| {
        *out_class = match dtmc::classify(&(*tpm).inner) {
            Classification::Ergodic => 0,
            Classification::Reducible => 1,
            Classification::Periodic => 2,
        };
        OrdflowStatus::Ok
    })
}

/// Solves the stationary distribution of an ergodic handle into a
/// 10-double buffer.
///
/// # Safety
/// `tpm` must be a live handle and `out_pi` must point to 10 writable
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn ordflow_tpm_stationary(
    tpm: *const OrdflowTpm,
    out_pi: *mut f64,
) -> OrdflowStatus {
    if tpm.is_null() || out_pi.is_null() {
        return OrdflowStatus::NullPointer;
    }
    guard(|| match dtmc::stationary(&(*tpm).inner) {
        Ok(pi) => {
            slice::from_raw_parts_mut(out_pi, STATE_COUNT).copy_from_slice(pi.as_slice());
            OrdflowStatus::Ok
        }
        Err(e) => dtmc_status(&e),
    })
}

/// Copies the self-transition probabilities (degree of inertia) into a
/// 10-double buffer.
///
/// # Safety
/// `tpm` must be a live handle and `out_inertia` must point to 10 writable
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn ordflow_tpm_inertia(
    tpm: *const OrdflowTpm,
    out_inertia: *mut f64,
) -> OrdflowStatus {
    if tpm.is_null() || out_inertia.is_null() {
        return OrdflowStatus::NullPointer;
    }
    guard(|| {
        let doi = dtmc::degree_of_inertia(&(*tpm).inner);
        slice::from_raw_parts_mut(out_inertia, STATE_COUNT).copy_from_slice(&doi);
        OrdflowStatus::Ok
    })
}

/// Releases a handle; a null pointer is a no-op.
///
/// # Safety
/// `tpm` must be null or a handle produced by this library, and must not be
/// used after this call.
#[no_mangle]
pub unsafe extern "C" fn ordflow_tpm_free(tpm: *mut OrdflowTpm) {
    if !tpm.is_null() {
        drop(Box::from_raw(tpm));
    }
}

/// G-test of serial dependence at `lag` over a sequence of state indices.
/// Writes the statistic, degrees of freedom, p-value and pair count.
///
/// # Safety
/// `symbols` must point to `len` readable bytes; every out-pointer must be
/// valid.
#[no_mangle]
pub unsafe extern "C" fn ordflow_g_test(
    symbols: *const u8,
    len: usize,
    lag: usize,
    out_g: *mut f64,
    out_df: *mut u32,
    out_p: *mut f64,
    out_n: *mut u64,
) -> OrdflowStatus {
    if symbols.is_null() || out_g.is_null() || out_df.is_null() || out_p.is_null() || out_n.is_null()
    {
        return OrdflowStatus::NullPointer;
    }
    guard(|| {
        let Some(kinds) = symbols_from_raw(symbols, len) else {
            return OrdflowStatus::InvalidArgument;
        };
        match gtest::build_table(&kinds, lag).and_then(|t| gtest::g_statistic(&t)) {
            Ok(result) => {
                *out_g = result.g;
                *out_df = result.df;
                *out_p = result.p_value;
                *out_n = result.n;
                OrdflowStatus::Ok
            }
            Err(_) => OrdflowStatus::InvalidArgument,
        }
    })
}

/// Upper-tail chi-squared probability of `x` at `df` degrees of freedom.
///
/// # Safety
/// `out_p` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ordflow_chi_square_sf(
    x: f64,
    df: u32,
    out_p: *mut f64,
) -> OrdflowStatus {
    if out_p.is_null() {
        return OrdflowStatus::NullPointer;
    }
    if df == 0 || !x.is_finite() || x < 0.0 {
        return OrdflowStatus::InvalidArgument;
    }
    guard(|| {
        *out_p = gtest::chi_square_sf(x, df);
        OrdflowStatus::Ok
    })
}

unsafe fn two_dists<'a>(
    p: *const f64,
    q: *const f64,
    len: usize,
) -> (&'a [f64], &'a [f64]) {
    (slice::from_raw_parts(p, len), slice::from_raw_parts(q, len))
}

/// Kullback-Leibler divergence (bits) between two `len`-bucket
/// distributions.
///
/// # Safety
/// `p` and `q` must point to `len` readable doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ordflow_kl_divergence(
    p: *const f64,
    q: *const f64,
    len: usize,
    out: *mut f64,
) -> OrdflowStatus {
    if p.is_null() || q.is_null() || out.is_null() {
        return OrdflowStatus::NullPointer;
    }
    guard(|| {
        let (p, q) = two_dists(p, q, len);
        match divergence::kl_divergence(p, q) {
            Ok(v) => {
                *out = v;
                OrdflowStatus::Ok
            }
            Err(_) => OrdflowStatus::InvalidArgument,
        }
    })
}

/// Jensen-Shannon divergence (bits) between two `len`-bucket
/// distributions.
///
/// # Safety
/// `p` and `q` must point to `len` readable doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ordflow_js_divergence(
    p: *const f64,
    q: *const f64,
    len: usize,
    out: *mut f64,
) -> OrdflowStatus {
    if p.is_null() || q.is_null() || out.is_null() {
        return OrdflowStatus::NullPointer;
    }
    guard(|| {
        let (p, q) = two_dists(p, q, len);
        match divergence::js_divergence(p, q) {
            Ok(v) => {
                *out = v;
                OrdflowStatus::Ok
            }
            Err(_) => OrdflowStatus::InvalidArgument,
        }
    })
}

/// Jensen-Shannon distance (square root of the divergence).
///
/// # Safety
/// `p` and `q` must point to `len` readable doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ordflow_js_distance(
    p: *const f64,
    q: *const f64,
    len: usize,
    out: *mut f64,
) -> OrdflowStatus {
    if p.is_null() || q.is_null() || out.is_null() {
        return OrdflowStatus::NullPointer;
    }
    guard(|| {
        let (p, q) = two_dists(p, q, len);
        match divergence::js_distance(p, q) {
            Ok(v) => {
                *out = v;
                OrdflowStatus::Ok
            }
            Err(_) => OrdflowStatus::InvalidArgument,
        }
    })
}

/// Simulates `len` state indices from an ergodic row-major matrix under a
/// deterministic seed. `start` is a fixed first state, or -1 to draw the
/// first state from the stationary distribution.
///
/// # Safety
/// `probs` must point to 100 readable doubles and `out_symbols` to `len`
/// writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ordflow_simulate(
    probs: *const f64,
    len: usize,
    seed: u64,
    start: i32,
    out_symbols: *mut u8,
) -> OrdflowStatus {
    if probs.is_null() || out_symbols.is_null() {
        return OrdflowStatus::NullPointer;
    }
    guard(|| {
        let matrix = match matrix_from_raw(probs) {
            Ok(m) => m,
            Err(e) => return dtmc_status(&e),
        };
        let start_kind = match start {
            -1 => None,
            i if (0..STATE_COUNT as i32).contains(&i) => OrderKind::from_index(i as usize),
            _ => return OrdflowStatus::InvalidArgument,
        };
        if start >= 0 && start_kind.is_none() {
            return OrdflowStatus::InvalidArgument;
        }
        match synth::simulate(&matrix, len, seed, start_kind) {
            Ok(symbols) => {
                let out = slice::from_raw_parts_mut(out_symbols, len);
                for (slot, kind) in out.iter_mut().zip(&symbols) {
                    *slot = kind.index() as u8;
                }
                OrdflowStatus::Ok
            }
            Err(synth::SynthError::NotErgodic(_)) => OrdflowStatus::NotErgodic,
            Err(_) => OrdflowStatus::InvalidArgument,
        }
    })
}

/// DBSCAN over `count` 2-D points stored as interleaved x,y pairs. Writes
/// one label per point: the cluster id, or -1 for noise.
///
/// # Safety
/// `points` must hold `2 * count` readable doubles and `out_labels` must
/// hold `count` writable values.
#[no_mangle]
pub unsafe extern "C" fn ordflow_dbscan(
    points: *const f64,
    count: usize,
    eps: f64,
    min_pts: usize,
    out_labels: *mut i64,
) -> OrdflowStatus {
    if points.is_null() || out_labels.is_null() {
        return OrdflowStatus::NullPointer;
    }
    guard(|| {
        let flat = slice::from_raw_parts(points, count * 2);
        let pts: Vec<[f64; 2]> = flat.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
        match cluster::dbscan(&pts, DbscanParams { eps, min_pts }) {
            Ok(result) => {
                let out = slice::from_raw_parts_mut(out_labels, count);
                for (slot, label) in out.iter_mut().zip(&result.labels) {
                    *slot = match label {
                        Label::Cluster(id) => *id as i64,
                        Label::Noise => -1,
                    };
                }
                OrdflowStatus::Ok
            }
            Err(_) => OrdflowStatus::InvalidArgument,
        }
    })
}

/// Sorted (descending) distances to each point's k-th nearest neighbour,
/// for choosing a DBSCAN radius. Requires `1 <= k < count`.
///
/// # Safety
/// `points` must hold `2 * count` readable doubles and `out_distances`
/// must hold `count` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ordflow_k_distance(
    points: *const f64,
    count: usize,
    k: usize,
    out_distances: *mut f64,
) -> OrdflowStatus {
    if points.is_null() || out_distances.is_null() {
        return OrdflowStatus::NullPointer;
    }
    guard(|| {
        let flat = slice::from_raw_parts(points, count * 2);
        let pts: Vec<[f64; 2]> = flat.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
        match cluster::k_distance(&pts, k) {
            Ok(profile) => {
                slice::from_raw_parts_mut(out_distances, count).copy_from_slice(&profile);
                OrdflowStatus::Ok
            }
            Err(_) => OrdflowStatus::InvalidArgument,
        }
    })
}
