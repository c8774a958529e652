//! Embedding of transition matrices into a low-dimensional space:
//! flattening to 100-vectors, column z-scoring and principal component
//! analysis.
//!
//! The observation count here is small (a few dozen matrices against 100
//! features), so when there are fewer observations than features the
//! eigendecomposition runs on the observation-space Gram matrix and the
//! feature-space loadings are recovered from it; both routes produce the
//! same spectrum.

use crate::dtmc::TransitionMatrix;
use crate::STATE_COUNT;
use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmbedError {
    /// Normalization and PCA need at least two observations (and no more
    /// components than `min(rows - 1, cols)`).
    #[error("too few observations: have {rows}, need {needed}")]
    TooFewObservations { rows: usize, needed: usize },
    #[error("observation matrix is ragged or empty")]
    ShapeMismatch,
    /// The iterative eigensolver failed to converge.
    #[error("eigendecomposition did not converge")]
    ConvergenceFailure,
}

/// A dense row-major observation matrix: one labeled row per observation.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationMatrix {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
    labels: Vec<String>,
}

impl ObservationMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>, labels: Vec<String>) -> Result<Self, EmbedError> {
        let n = rows.len();
        let cols = rows.first().map_or(0, Vec::len);
        if n == 0 || cols == 0 || rows.iter().any(|r| r.len() != cols) || labels.len() != n {
            return Err(EmbedError::ShapeMismatch);
        }
        Ok(ObservationMatrix {
            data: rows.into_iter().flatten().collect(),
            rows: n,
            cols,
            labels,
        })
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

/// Flattens a transition matrix row-major into a 100-element feature vector.
pub fn flatten(matrix: &TransitionMatrix) -> Vec<f64> {
    let mut out = Vec::with_capacity(STATE_COUNT * STATE_COUNT);
    for i in 0..STATE_COUNT {
        out.extend_from_slice(matrix.row(i));
    }
    out
}

/// Rebuilds a transition matrix from a flattened vector (inverse of
/// [`flatten`], re-running row validation).
pub fn unflatten(v: &[f64]) -> Result<TransitionMatrix, crate::dtmc::DtmcError> {
    assert_eq!(v.len(), STATE_COUNT * STATE_COUNT, "flattened length");
    let rows: Vec<Vec<f64>> = v.chunks(STATE_COUNT).map(<[f64]>::to_vec).collect();
    TransitionMatrix::from_probs(rows)
}

/// Column-wise z-score normalization with the n-1 (sample) denominator.
///
/// Columns with essentially zero variance (< 1e-12) carry no information
/// and are mapped to all-zero columns instead of dividing by noise.
pub fn normalize(obs: &ObservationMatrix) -> Result<ObservationMatrix, EmbedError> {
    let l = obs.rows();
    if l < 2 {
        return Err(EmbedError::TooFewObservations { rows: l, needed: 2 });
    }
    let m = obs.cols();
    let mut out = vec![0.0; l * m];
    for j in 0..m {
        let mean = (0..l).map(|i| obs.get(i, j)).sum::<f64>() / l as f64;
        let var = (0..l)
            .map(|i| {
                let d = obs.get(i, j) - mean;
                d * d
            })
            .sum::<f64>()
            / (l - 1) as f64;
        let sd = var.sqrt();
        if sd < 1e-12 {
            continue; // column stays exactly zero
        }
        for i in 0..l {
            out[i * m + j] = (obs.get(i, j) - mean) / sd;
        }
    }
    Ok(ObservationMatrix {
        data: out,
        rows: l,
        cols: m,
        labels: obs.labels.clone(),
    })
}

/// Output of [`pca`]: loadings, projected scores and the variance ledger.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaResult {
    /// `k` unit-norm principal axes, each of feature length `m`; the
    /// entry of largest magnitude in each axis is made positive so signs
    /// are reproducible.
    pub components: Vec<Vec<f64>>,
    /// Projection of each observation onto each axis (`l x k`).
    pub scores: Vec<Vec<f64>>,
    /// Full covariance spectrum, descending, clipped at zero.
    pub eigenvalues: Vec<f64>,
    /// Each eigenvalue's share of total variance.
    pub contribution: Vec<f64>,
    /// Running sum of `contribution`.
    pub cumulative: Vec<f64>,
}

/// Principal component analysis of a (already normalized) observation
/// matrix, keeping `k` components.
///
/// Uses the sample covariance `Y^T Y / (l - 1)`. With fewer observations
/// than features the spectrum is taken from the `l x l` Gram matrix
/// `Y Y^T / (l - 1)` and loadings are recovered as `Y^T u / sqrt((l-1) mu)`.
pub fn pca(obs: &ObservationMatrix, k: usize) -> Result<PcaResult, EmbedError> {
    let l = obs.rows();
    let m = obs.cols();
    if l < 2 || k > (l - 1).min(m) {
        return Err(EmbedError::TooFewObservations {
            rows: l,
            needed: k + 1,
        });
    }
    let y = DMatrix::<f64>::from_fn(l, m, |i, j| obs.get(i, j));
    let denom = (l - 1) as f64;

    // (eigenvalue, feature-space loading) pairs, descending.
    let mut pairs: Vec<(f64, Vec<f64>)> = if l < m {
        let gram = &y * y.transpose() / denom;
        let eig = symmetric_eigen(gram)?;
        eig.into_iter()
            .map(|(mu, u)| {
                let uvec = DMatrix::from_column_slice(l, 1, &u);
                let v = y.transpose() * uvec;
                let norm = (denom * mu).sqrt();
                let loading = if norm > 1e-9 {
                    v.column(0).iter().map(|x| x / norm).collect()
                } else {
                    vec![0.0; m]
                };
                (mu, loading)
            })
            .collect()
    } else {
        let cov = y.transpose() * &y / denom;
        let eig = symmetric_eigen(cov)?;
        eig.into_iter().collect()
    };

    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let eigenvalues: Vec<f64> = pairs.iter().map(|(mu, _)| mu.max(0.0)).collect();
    let total: f64 = eigenvalues.iter().sum();
    let contribution: Vec<f64> = if total > 0.0 {
        eigenvalues.iter().map(|e| e / total).collect()
    } else {
        vec![0.0; eigenvalues.len()]
    };
    let cumulative: Vec<f64> = contribution
        .iter()
        .scan(0.0, |acc, c| {
            *acc += c;
            Some(*acc)
        })
        .collect();

    let mut components = Vec::with_capacity(k);
    for (_, loading) in pairs.iter().take(k) {
        components.push(orient(loading.clone()));
    }
    let scores: Vec<Vec<f64>> = (0..l)
        .map(|i| {
            components
                .iter()
                .map(|axis| {
                    obs.row(i)
                        .iter()
                        .zip(axis)
                        .map(|(x, a)| x * a)
                        .sum::<f64>()
                })
                .collect()
        })
        .collect();

    Ok(PcaResult {
        components,
        scores,
        eigenvalues,
        contribution,
        cumulative,
    })
}

/// Flips an axis so its largest-magnitude entry is positive.
fn orient(mut axis: Vec<f64>) -> Vec<f64> {
    let mut best = 0usize;
    for (i, v) in axis.iter().enumerate() {
        if v.abs() > axis[best].abs() {
            best = i;
        }
    }
    if axis[best] < 0.0 {
        for v in axis.iter_mut() {
            *v = -*v;
        }
    }
    axis
}

fn symmetric_eigen(m: DMatrix<f64>) -> Result<Vec<(f64, Vec<f64>)>, EmbedError> {
    let n = m.nrows();
    let eig = nalgebra::linalg::SymmetricEigen::try_new(m, f64::EPSILON, 10_000)
        .ok_or(EmbedError::ConvergenceFailure)?;
    Ok((0..n)
        .map(|i| {
            (
                eig.eigenvalues[i],
                eig.eigenvectors.column(i).iter().copied().collect(),
            )
        })
        .collect())
}

/// Report of the cumulative explained-variance gate.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GateReport {
    /// Whether the kept components reach the threshold.
    pub passed: bool,
    pub threshold: f64,
    /// Cumulative contribution at the last kept component.
    pub explained: f64,
    /// Per-component contribution for the kept components.
    pub per_component: Vec<f64>,
}

/// Checks that the kept components explain at least `threshold` of total
/// variance (the default gate is 0.80).
pub fn cumulative_gate(result: &PcaResult, threshold: f64) -> GateReport {
    let k = result.components.len();
    let explained = if k == 0 {
        0.0
    } else {
        result.cumulative[k - 1]
    };
    GateReport {
        passed: explained >= threshold,
        threshold,
        explained,
        per_component: result.contribution[..k].to_vec(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn obs(rows: Vec<Vec<f64>>) -> ObservationMatrix {
        let labels = (0..rows.len()).map(|i| format!("r{i}")).collect();
        ObservationMatrix::from_rows(rows, labels).unwrap()
    }

    #[test]
    fn flatten_unflatten_round_trip() {
        let mut probs = vec![vec![0.0; STATE_COUNT]; STATE_COUNT];
        for (i, row) in probs.iter_mut().enumerate() {
            row[i] = 0.5;
            row[(i + 3) % STATE_COUNT] = 0.5;
        }
        let m = TransitionMatrix::from_probs(probs).unwrap();
        let flat = flatten(&m);
        assert_eq!(flat.len(), 100);
        let back = unflatten(&flat).unwrap();
        assert_eq!(back, m);
        // Row-major order: element (i, j) lands at i * 10 + j.
        assert_eq!(flat[0 * 10 + 3], 0.5);
        assert_eq!(flat[4 * 10 + 7], 0.5);
    }

    #[test]
    fn normalize_zero_means_unit_variance() {
        let o = obs(vec![
            vec![1.0, 10.0, 5.0],
            vec![2.0, 20.0, 5.0],
            vec![3.0, 30.0, 5.0],
            vec![4.0, 40.0, 5.0],
        ]);
        let z = normalize(&o).unwrap();
        for j in 0..2 {
            let mean: f64 = (0..4).map(|i| z.get(i, j)).sum::<f64>() / 4.0;
            let var: f64 = (0..4).map(|i| z.get(i, j).powi(2)).sum::<f64>() / 3.0;
            assert!(mean.abs() < 1e-12, "column {j} mean {mean}");
            assert!((var - 1.0).abs() < 1e-12, "column {j} var {var}");
        }
        // Constant column becomes exactly zero, not NaN.
        for i in 0..4 {
            assert_eq!(z.get(i, 2), 0.0);
        }
    }

    #[test]
    fn normalize_needs_two_rows() {
        let o = obs(vec![vec![1.0, 2.0]]);
        assert!(matches!(
            normalize(&o).unwrap_err(),
            EmbedError::TooFewObservations { rows: 1, needed: 2 }
        ));
    }

    #[test]
    fn pca_recovers_a_planted_direction() {
        // Points spread along (3, 4)/5 with tiny orthogonal jitter: the
        // first axis must align with the planted direction.
        let dir = [0.6, 0.8];
        let orth = [-0.8, 0.6];
        let mut rows = Vec::new();
        for i in 0..12 {
            let t = (i as f64 - 5.5) * 2.0;
            let e = ((i * 7 % 5) as f64 - 2.0) * 0.01;
            rows.push(vec![t * dir[0] + e * orth[0], t * dir[1] + e * orth[1]]);
        }
        let res = pca(&obs(rows), 2).unwrap();
        let axis = &res.components[0];
        assert!((axis[0] - 0.6).abs() < 1e-3 && (axis[1] - 0.8).abs() < 1e-3);
        assert!(res.eigenvalues[0] > 100.0 * res.eigenvalues[1]);
        assert!(res.contribution[0] > 0.999);
    }

    #[test]
    fn pca_gram_and_direct_routes_agree() {
        // 4 observations x 6 features exercises the Gram route; transposing
        // the geometry onto more rows than columns exercises the direct
        // route. Compare the 4x6 case against the covariance computed the
        // direct way by hand.
        let rows = vec![
            vec![1.0, 2.0, 0.5, -1.0, 0.0, 3.0],
            vec![0.0, 1.0, -0.5, 2.0, 1.0, -1.0],
            vec![-1.0, 0.0, 1.5, 0.0, -2.0, 1.0],
            vec![2.0, -3.0, 0.0, 1.0, 1.0, 0.0],
        ];
        let o = normalize(&obs(rows)).unwrap();
        let res = pca(&o, 2).unwrap();

        // Direct covariance spectrum via nalgebra on the 6x6 matrix.
        let l = o.rows();
        let y = DMatrix::<f64>::from_fn(l, o.cols(), |i, j| o.get(i, j));
        let cov = y.transpose() * &y / (l as f64 - 1.0);
        let mut direct: Vec<f64> = cov.symmetric_eigen().eigenvalues.iter().copied().collect();
        direct.sort_by(|a, b| b.total_cmp(a));

        for (i, &want) in direct.iter().take(3).enumerate() {
            assert!(
                (res.eigenvalues[i] - want.max(0.0)).abs() < 1e-9,
                "eigenvalue {i}: {} vs {want}",
                res.eigenvalues[i]
            );
        }
        // Loadings from the Gram route must be unit length and orthogonal.
        for a in 0..res.components.len() {
            let norm: f64 = res.components[a].iter().map(|x| x * x).sum();
            assert!((norm - 1.0).abs() < 1e-9);
            for b in (a + 1)..res.components.len() {
                let dot: f64 = res.components[a]
                    .iter()
                    .zip(&res.components[b])
                    .map(|(x, y)| x * y)
                    .sum();
                assert!(dot.abs() < 1e-9);
            }
        }
    }

    #[test]
    fn pca_scores_are_projections() {
        let rows = vec![
            vec![2.0, 0.0],
            vec![-2.0, 0.0],
            vec![1.0, 1.0],
            vec![-1.0, -1.0],
        ];
        let o = obs(rows.clone());
        let res = pca(&o, 1).unwrap();
        for (i, row) in rows.iter().enumerate() {
            let proj: f64 = row.iter().zip(&res.components[0]).map(|(x, a)| x * a).sum();
            assert!((res.scores[i][0] - proj).abs() < 1e-12);
        }
    }

    #[test]
    fn pca_rejects_excess_components() {
        let o = obs(vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]);
        assert!(pca(&o, 2).is_ok());
        assert!(matches!(
            pca(&o, 3).unwrap_err(),
            EmbedError::TooFewObservations { .. }
        ));
    }

    #[test]
    fn gate_reports_cumulative_share() {
        let res = PcaResult {
            components: vec![vec![1.0, 0.0]],
            scores: vec![],
            eigenvalues: vec![9.0, 1.0],
            contribution: vec![0.9, 0.1],
            cumulative: vec![0.9, 1.0],
        };
        let gate = cumulative_gate(&res, 0.8);
        assert!(gate.passed);
        assert!((gate.explained - 0.9).abs() < 1e-15);
        let strict = cumulative_gate(&res, 0.95);
        assert!(!strict.passed);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn spectrum_is_descending_nonnegative_and_complete(
            cells in proptest::collection::vec(-5.0f64..5.0, 5 * 7)
        ) {
            let rows: Vec<Vec<f64>> = cells.chunks(7).map(<[f64]>::to_vec).collect();
            let o = normalize(&obs(rows)).unwrap();
            let res = pca(&o, 2).unwrap();
            for w in res.eigenvalues.windows(2) {
                prop_assert!(w[0] >= w[1]);
            }
            prop_assert!(res.eigenvalues.iter().all(|&e| e >= 0.0));
            // Normalized 7 columns, none constant here with prob ~1: total
            // variance equals the sum of eigenvalues, and cumulative ends
            // at 1 when any variance exists.
            let total: f64 = res.eigenvalues.iter().sum();
            if total > 1e-9 {
                prop_assert!((res.cumulative.last().unwrap() - 1.0).abs() < 1e-9);
            }
            let sum_contrib: f64 = res.contribution.iter().sum();
            prop_assert!((sum_contrib - 1.0).abs() < 1e-9 || total <= 1e-9);
        }

        #[test]
        fn largest_component_entry_is_positive(
            cells in proptest::collection::vec(-3.0f64..3.0, 6 * 4)
        ) {
            let rows: Vec<Vec<f64>> = cells.chunks(4).map(<[f64]>::to_vec).collect();
            let o = normalize(&obs(rows)).unwrap();
            let res = pca(&o, 2).unwrap();
            for axis in &res.components {
                let mut best = 0usize;
                for (i, v) in axis.iter().enumerate() {
                    if v.abs() > axis[best].abs() { best = i; }
                }
                prop_assert!(axis[best] >= 0.0);
            }
        }
    }
}
