//! Discrete-time Markov chain machinery over the ten-state order alphabet:
//! transition counting, maximum-likelihood estimation, averaging, chain
//! classification and the stationary distribution.

use crate::domain::OrderKind;
use crate::STATE_COUNT;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DtmcError {
    /// Fewer than two symbols: no transition to count.
    #[error("sequence of length {0} has no transitions")]
    SequenceTooShort(usize),
    /// Count matrix with zero total cannot be normalized.
    #[error("count matrix holds no transitions")]
    EmptyCounts,
    /// `average` needs at least one matrix.
    #[error("no matrices to average")]
    EmptyInput,
    /// Probabilities failed row-stochastic validation.
    #[error("invalid transition matrix: {0}")]
    InvalidMatrix(String),
    /// Operation requires an ergodic chain.
    #[error("chain is not ergodic: classified {0:?}")]
    NotErgodic(Classification),
    /// The two stationary solvers disagreed beyond tolerance; this is an
    /// internal error, not a property of the input.
    #[error("stationary solvers disagree by {max_diff:e} (> 1e-8)")]
    SolverDisagreement { max_diff: f64 },
    /// The linear-algebra backend failed to produce a solution.
    #[error("stationary solve failed: {0}")]
    SolveFailed(String),
}

/// Raw transition counts `n[i][j]` = times state `i` was followed by `j`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CountMatrix {
    counts: Vec<Vec<u64>>,
}

impl CountMatrix {
    pub fn zero() -> CountMatrix {
        CountMatrix {
            counts: vec![vec![0; STATE_COUNT]; STATE_COUNT],
        }
    }

    #[inline]
    pub fn get(&self, from: usize, to: usize) -> u64 {
        self.counts[from][to]
    }

    pub fn row_total(&self, from: usize) -> u64 {
        self.counts[from].iter().sum()
    }

    /// Total transitions counted; always `len - 1` for a single sequence.
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Adds another count matrix cell-wise (pooling several sequences).
    pub fn merge(&mut self, other: &CountMatrix) {
        for i in 0..STATE_COUNT {
            for j in 0..STATE_COUNT {
                self.counts[i][j] += other.counts[i][j];
            }
        }
    }

    pub fn record(&mut self, from: OrderKind, to: OrderKind) {
        self.counts[from.index()][to.index()] += 1;
    }
}

/// Counts adjacent transitions of a symbol sequence.
pub fn accumulate(symbols: &[OrderKind]) -> Result<CountMatrix, DtmcError> {
    if symbols.len() < 2 {
        return Err(DtmcError::SequenceTooShort(symbols.len()));
    }
    let mut m = CountMatrix::zero();
    for pair in symbols.windows(2) {
        m.record(pair[0], pair[1]);
    }
    Ok(m)
}

/// A row-stochastic transition probability matrix with explicit support.
///
/// Rows whose state never occurred as a transition source are *unsupported*:
/// they hold all zeros rather than a smoothed or uniform fill, and carry no
/// weight when matrices are averaged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    probs: Vec<Vec<f64>>,
    support: Vec<bool>,
}

impl TransitionMatrix {
    /// Validates and wraps explicit probabilities. Rows that are all zero
    /// become unsupported; every other row must sum to 1 within 1e-12.
    pub fn from_probs(probs: Vec<Vec<f64>>) -> Result<TransitionMatrix, DtmcError> {
        if probs.len() != STATE_COUNT || probs.iter().any(|r| r.len() != STATE_COUNT) {
            return Err(DtmcError::InvalidMatrix(format!(
                "expected {STATE_COUNT}x{STATE_COUNT} probabilities"
            )));
        }
        let mut support = vec![false; STATE_COUNT];
        for (i, row) in probs.iter().enumerate() {
            let mut sum = 0.0;
            for &p in row {
                if !p.is_finite() || !(0.0..=1.0 + 1e-12).contains(&p) {
                    return Err(DtmcError::InvalidMatrix(format!(
                        "row {i} holds a probability outside [0, 1]"
                    )));
                }
                sum += p;
            }
            if sum == 0.0 {
                continue;
            }
            if (sum - 1.0).abs() > 1e-12 {
                return Err(DtmcError::InvalidMatrix(format!(
                    "row {i} sums to {sum}, not 0 or 1"
                )));
            }
            support[i] = true;
        }
        Ok(TransitionMatrix { probs, support })
    }

    #[inline]
    pub fn prob(&self, from: usize, to: usize) -> f64 {
        self.probs[from][to]
    }

    pub fn row(&self, from: usize) -> &[f64] {
        &self.probs[from]
    }

    #[inline]
    pub fn is_supported(&self, row: usize) -> bool {
        self.support[row]
    }

    /// Indices of rows with at least one observed outgoing transition.
    pub fn support_rows(&self) -> Vec<usize> {
        (0..STATE_COUNT).filter(|&i| self.support[i]).collect()
    }

    /// Row-major copy of the probabilities.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.probs.clone()
    }
}

/// Maximum-likelihood estimate `p[i][j] = n[i][j] / row_total(i)`.
///
/// No smoothing: unobserved transitions stay at exactly zero, and
/// never-visited source states yield unsupported all-zero rows.
pub fn estimate(counts: &CountMatrix) -> Result<TransitionMatrix, DtmcError> {
    if counts.total() == 0 {
        return Err(DtmcError::EmptyCounts);
    }
    let mut probs = vec![vec![0.0; STATE_COUNT]; STATE_COUNT];
    for i in 0..STATE_COUNT {
        let total = counts.row_total(i);
        if total == 0 {
            continue;
        }
        for j in 0..STATE_COUNT {
            probs[i][j] = counts.get(i, j) as f64 / total as f64;
        }
    }
    TransitionMatrix::from_probs(probs)
}

/// Averages transition matrices row-wise.
///
/// Each row is the arithmetic mean over the inputs in which that row is
/// supported (an unsupported row contributes nothing rather than dragging
/// the mean toward zero), then re-normalized to sum to 1.
pub fn average(matrices: &[TransitionMatrix]) -> Result<TransitionMatrix, DtmcError> {
    if matrices.is_empty() {
        return Err(DtmcError::EmptyInput);
    }
    let mut probs = vec![vec![0.0; STATE_COUNT]; STATE_COUNT];
    for i in 0..STATE_COUNT {
        let supporting = matrices.iter().filter(|m| m.is_supported(i));
        let count = supporting.clone().count();
        if count == 0 {
            continue;
        }
        for m in supporting {
            for j in 0..STATE_COUNT {
                probs[i][j] += m.prob(i, j);
            }
        }
        let sum: f64 = probs[i].iter().sum();
        for p in probs[i].iter_mut() {
            *p /= sum;
        }
    }
    TransitionMatrix::from_probs(probs)
}

/// Structural class of the chain restricted to its supported states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    /// Irreducible and aperiodic on the supported states.
    Ergodic,
    /// The supported states do not form a single closed communicating class.
    Reducible,
    /// Irreducible with period greater than one.
    Periodic,
}

/// Classifies the chain on its supported states.
///
/// Any edge from a supported state into an unsupported one means probability
/// mass can reach a state with no outgoing row, so the supported set is not
/// closed and the chain is reducible.
pub fn classify(matrix: &TransitionMatrix) -> Classification {
    let support = matrix.support_rows();
    if support.is_empty() {
        return Classification::Reducible;
    }
    // Edges within the supported set; leakage to unsupported states
    // immediately means Reducible.
    let index_of = |s: usize| support.iter().position(|&x| x == s);
    let n = support.len();
    let mut adj = vec![Vec::new(); n];
    let mut radj = vec![Vec::new(); n];
    for (u, &s) in support.iter().enumerate() {
        for t in 0..STATE_COUNT {
            if matrix.prob(s, t) > 0.0 {
                match index_of(t) {
                    Some(v) => {
                        adj[u].push(v);
                        radj[v].push(u);
                    }
                    None => return Classification::Reducible,
                }
            }
        }
    }
    if !strongly_connected(&adj, &radj) {
        return Classification::Reducible;
    }
    if period(&adj) > 1 {
        Classification::Periodic
    } else {
        Classification::Ergodic
    }
}

/// Kosaraju-style check that every node is reachable from node 0 in both
/// the graph and its reverse.
fn strongly_connected(adj: &[Vec<usize>], radj: &[Vec<usize>]) -> bool {
    let reaches_all = |edges: &[Vec<usize>]| -> bool {
        let mut seen = vec![false; edges.len()];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &v in &edges[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count == edges.len()
    };
    reaches_all(adj) && reaches_all(radj)
}

/// Period of a strongly connected graph: the gcd of `level(u) + 1 - level(v)`
/// over all edges `u -> v`, with levels from a BFS tree.
fn period(adj: &[Vec<usize>]) -> u64 {
    let n = adj.len();
    let mut level = vec![usize::MAX; n];
    let mut queue = std::collections::VecDeque::from([0usize]);
    level[0] = 0;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if level[v] == usize::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            }
        }
    }
    let mut g: u64 = 0;
    for (u, edges) in adj.iter().enumerate() {
        for &v in edges {
            let diff = (level[u] as i64 + 1 - level[v] as i64).unsigned_abs();
            g = gcd(g, diff);
        }
    }
    // A strongly connected graph always yields at least one non-tree edge,
    // so g > 0; guard anyway.
    g.max(1)
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Stationary distribution over the ten states (zero on unsupported states).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryDistribution {
    pi: Vec<f64>,
}

impl StationaryDistribution {
    #[inline]
    pub fn get(&self, state: usize) -> f64 {
        self.pi[state]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.pi
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.pi.clone()
    }
}

/// Solves `pi P = pi`, `sum pi = 1` for an ergodic chain.
///
/// Two independent routes must agree: an SVD least-squares solve of the
/// augmented null-space system, and power iteration on the half-lazy chain
/// `(P + I) / 2`. Disagreement beyond 1e-8 in any coordinate aborts with an
/// internal error instead of silently returning either answer.
pub fn stationary(matrix: &TransitionMatrix) -> Result<StationaryDistribution, DtmcError> {
    let class = classify(matrix);
    if class != Classification::Ergodic {
        return Err(DtmcError::NotErgodic(class));
    }
    let support = matrix.support_rows();
    let direct = stationary_linear(matrix, &support)?;
    let powered = stationary_power(matrix, &support);
    let max_diff = direct
        .iter()
        .zip(&powered)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    if max_diff > 1e-8 {
        return Err(DtmcError::SolverDisagreement { max_diff });
    }
    // Keep whichever route satisfies the balance equations more tightly.
    let pick = if residual(matrix, &direct) <= residual(matrix, &powered) {
        direct
    } else {
        powered
    };
    if residual(matrix, &pick) > 1e-10 {
        return Err(DtmcError::SolveFailed(format!(
            "residual {:e} exceeds 1e-10",
            residual(matrix, &pick)
        )));
    }
    Ok(StationaryDistribution { pi: pick })
}

/// `max_j |(pi P)_j - pi_j|` over all ten states.
fn residual(matrix: &TransitionMatrix, pi: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..STATE_COUNT {
        let mut next = 0.0;
        for i in 0..STATE_COUNT {
            next += pi[i] * matrix.prob(i, j);
        }
        worst = worst.max((next - pi[j]).abs());
    }
    worst
}

/// Null-space route: least-squares solve of `[P^T - I; 1^T] x = [0; 1]`
/// restricted to the supported states.
fn stationary_linear(matrix: &TransitionMatrix, support: &[usize]) -> Result<Vec<f64>, DtmcError> {
    let s = support.len();
    let mut a = DMatrix::<f64>::zeros(s + 1, s);
    for (col, &i) in support.iter().enumerate() {
        for (row, &j) in support.iter().enumerate() {
            let delta = if i == j { 1.0 } else { 0.0 };
            a[(row, col)] = matrix.prob(i, j) - delta;
        }
    }
    for col in 0..s {
        a[(s, col)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(s + 1);
    b[s] = 1.0;
    let svd = a.svd(true, true);
    let x = svd
        .solve(&b, 1e-14)
        .map_err(|e| DtmcError::SolveFailed(e.to_string()))?;
    let mut pi = vec![0.0; STATE_COUNT];
    let mut sum = 0.0;
    for (col, &i) in support.iter().enumerate() {
        // Ergodic chains have strictly positive solutions; shave off any
        // sub-epsilon negative noise from the least-squares solve.
        let v = x[col].max(0.0);
        pi[i] = v;
        sum += v;
    }
    if !(sum.is_finite() && sum > 0.0) {
        return Err(DtmcError::SolveFailed("null-space solution sums to 0".into()));
    }
    for v in pi.iter_mut() {
        *v /= sum;
    }
    Ok(pi)
}

/// Power-iteration route on the half-lazy chain `(P + I) / 2`, which shares
/// the stationary vector but is aperiodic with a real positive spectral gap.
fn stationary_power(matrix: &TransitionMatrix, support: &[usize]) -> Vec<f64> {
    let mut pi = vec![0.0; STATE_COUNT];
    for &i in support {
        pi[i] = 1.0 / support.len() as f64;
    }
    let mut next = vec![0.0; STATE_COUNT];
    for _ in 0..2_000_000u32 {
        for v in next.iter_mut() {
            *v = 0.0;
        }
        for &i in support {
            let w = pi[i];
            if w == 0.0 {
                continue;
            }
            let row = matrix.row(i);
            for &j in support {
                next[j] += w * 0.5 * row[j];
            }
            next[i] += w * 0.5;
        }
        let sum: f64 = next.iter().sum();
        let mut delta = 0.0f64;
        for (v, p) in next.iter_mut().zip(pi.iter()) {
            *v /= sum;
            delta = delta.max((*v - p).abs());
        }
        std::mem::swap(&mut pi, &mut next);
        // Half-lazy residual is half the plain residual, so push well below
        // the 1e-10 target on the original chain.
        if delta < 5e-15 {
            break;
        }
    }
    pi
}

/// Diagonal of the transition matrix: each state's self-transition mass.
pub fn degree_of_inertia(matrix: &TransitionMatrix) -> Vec<f64> {
    (0..STATE_COUNT).map(|i| matrix.prob(i, i)).collect()
}
