//! Information-theoretic distances between probability distributions,
//! base-2 throughout: Kullback-Leibler divergence, Jensen-Shannon
//! divergence and its square root, the Jensen-Shannon distance.
//!
//! Comparison tables between time-zones report the *distance* (the metric);
//! the raw divergence is its square.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DivergenceError {
    #[error("distributions have different lengths ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    /// `u[i] > 0` where `v[i] = 0`: KL(u, v) is undefined (infinite).
    #[error("absolute continuity violated at index {0}")]
    AbsoluteContinuityViolation(usize),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    /// A pairwise matrix needs at least two distributions.
    #[error("need at least two distributions, got {0}")]
    TooFewDistributions(usize),
}

fn validate(p: &[f64]) -> Result<(), DivergenceError> {
    let mut sum = 0.0;
    for &x in p {
        if !x.is_finite() || x < 0.0 {
            return Err(DivergenceError::InvalidDistribution(
                "entries must be finite and non-negative".into(),
            ));
        }
        sum += x;
    }
    if (sum - 1.0).abs() > 1e-9 {
        return Err(DivergenceError::InvalidDistribution(format!(
            "entries sum to {sum}, not 1"
        )));
    }
    Ok(())
}

fn check_pair(u: &[f64], v: &[f64]) -> Result<(), DivergenceError> {
    if u.len() != v.len() {
        return Err(DivergenceError::LengthMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    validate(u)?;
    validate(v)
}

/// Kullback-Leibler divergence `KL(u || v) = sum u_i log2(u_i / v_i)`,
/// in bits, over the indices where `u_i > 0`.
pub fn kl_divergence(u: &[f64], v: &[f64]) -> Result<f64, DivergenceError> {
    check_pair(u, v)?;
    let mut total = 0.0;
    for (i, (&ui, &vi)) in u.iter().zip(v).enumerate() {
        if ui > 0.0 {
            if vi == 0.0 {
                return Err(DivergenceError::AbsoluteContinuityViolation(i));
            }
            total += ui * (ui / vi).log2();
        }
    }
    Ok(total.max(0.0))
}

/// Jensen-Shannon divergence: `1/2 KL(p||m) + 1/2 KL(q||m)` with
/// `m = (p + q) / 2`. Symmetric, always finite, bounded to `[0, 1]` in
/// base 2. This is the *square* of the Jensen-Shannon distance.
pub fn js_divergence(p: &[f64], q: &[f64]) -> Result<f64, DivergenceError> {
    check_pair(p, q)?;
    let mut total = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        let mi = 0.5 * (pi + qi);
        // m_i > 0 wherever p_i or q_i is, so no continuity failure here.
        if pi > 0.0 {
            total += 0.5 * pi * (pi / mi).log2();
        }
        if qi > 0.0 {
            total += 0.5 * qi * (qi / mi).log2();
        }
    }
    Ok(total.clamp(0.0, 1.0))
}

/// Jensen-Shannon distance `sqrt(js_divergence)`; a true metric, and the
/// quantity the zone-comparison tables report.
pub fn js_distance(p: &[f64], q: &[f64]) -> Result<f64, DivergenceError> {
    js_divergence(p, q).map(f64::sqrt)
}

/// Full symmetric matrix of pairwise Jensen-Shannon *distances*, with a
/// zero diagonal. Needs at least two distributions of one common length.
pub fn jsd_matrix(dists: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, DivergenceError> {
    if dists.len() < 2 {
        return Err(DivergenceError::TooFewDistributions(dists.len()));
    }
    let n = dists.len();
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = js_distance(&dists[i], &dists[j])?;
            out[i][j] = d;
            out[j][i] = d;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn kl_of_identical_distributions_is_zero() {
        let p = [0.2, 0.3, 0.5];
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn kl_known_value() {
        // KL([1,0] || [1/2,1/2]) = log2(2) = 1 bit.
        assert!((kl_divergence(&[1.0, 0.0], &[0.5, 0.5]).unwrap() - 1.0).abs() < 1e-15);
        // Quarter/three-quarter pair against uniform.
        let want = 0.25 * (0.5f64).log2() + 0.75 * (1.5f64).log2();
        let got = kl_divergence(&[0.25, 0.75], &[0.5, 0.5]).unwrap();
        assert!((got - want).abs() < 1e-15);
    }

    #[test]
    fn kl_is_asymmetric() {
        let u = [0.9, 0.1];
        let v = [0.5, 0.5];
        let a = kl_divergence(&u, &v).unwrap();
        let b = kl_divergence(&v, &u).unwrap();
        assert!((a - b).abs() > 1e-3);
    }

    #[test]
    fn kl_rejects_support_escape() {
        let err = kl_divergence(&[0.5, 0.5], &[1.0, 0.0]).unwrap_err();
        assert_eq!(err, DivergenceError::AbsoluteContinuityViolation(1));
    }

    #[test]
    fn kl_rejects_bad_inputs() {
        assert!(matches!(
            kl_divergence(&[0.5, 0.5], &[0.5, 0.25, 0.25]).unwrap_err(),
            DivergenceError::LengthMismatch { left: 2, right: 3 }
        ));
        assert!(matches!(
            kl_divergence(&[0.7, 0.7], &[0.5, 0.5]).unwrap_err(),
            DivergenceError::InvalidDistribution(_)
        ));
        assert!(matches!(
            kl_divergence(&[-0.5, 1.5], &[0.5, 0.5]).unwrap_err(),
            DivergenceError::InvalidDistribution(_)
        ));
    }

    #[test]
    fn js_extremes() {
        // Identical distributions: zero. Disjoint supports: one full bit.
        assert_eq!(js_divergence(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert!((js_divergence(&[1.0, 0.0], &[0.0, 1.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((js_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn js_handles_zeros_without_error() {
        // KL would fail in both directions here; JS must not.
        let p = [0.5, 0.5, 0.0];
        let q = [0.0, 0.5, 0.5];
        let d = js_divergence(&p, &q).unwrap();
        assert!(d > 0.0 && d < 1.0);
    }

    #[test]
    fn js_distance_matches_zone_table_spot_check() {
        // First hour vs second hour, high-cap bucket, from the published
        // stationary vectors (rounded rows re-normalized).
        let t1 = normalize(&[
            0.2611, 0.2486, 0.2335, 0.2227, 0.0120, 0.0104, 0.0049, 0.0045, 0.0012, 0.0010,
        ]);
        let t2 = normalize(&[
            0.2517, 0.2454, 0.2386, 0.2348, 0.0108, 0.0087, 0.0043, 0.0037, 0.0012, 0.0009,
        ]);
        let d = js_distance(&t1, &t2).unwrap();
        assert!((d - 0.0182).abs() < 1e-3, "got {d}");
        // The raw divergence is the square, far below the tabulated value.
        let sq = js_divergence(&t1, &t2).unwrap();
        assert!((sq - d * d).abs() < 1e-15);
    }

    fn normalize(v: &[f64]) -> Vec<f64> {
        let sum: f64 = v.iter().sum();
        v.iter().map(|x| x / sum).collect()
    }

    #[test]
    fn jsd_matrix_shape_and_symmetry() {
        let dists = vec![
            vec![0.7, 0.2, 0.1],
            vec![0.1, 0.8, 0.1],
            vec![0.3, 0.3, 0.4],
        ];
        let m = jsd_matrix(&dists).unwrap();
        assert_eq!(m.len(), 3);
        for i in 0..3 {
            assert_eq!(m[i][i], 0.0);
            for j in 0..3 {
                assert_eq!(m[i][j], m[j][i]);
            }
        }
        assert_eq!(
            jsd_matrix(&dists[..1]).unwrap_err(),
            DivergenceError::TooFewDistributions(1)
        );
    }

    fn dist_strategy() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0.0f64..1.0, 10)
            .prop_filter("nonzero mass", |v| v.iter().sum::<f64>() > 1e-3)
            .prop_map(|v| normalize(&v))
    }

    proptest! {
        #[test]
        fn js_is_symmetric_and_bounded(p in dist_strategy(), q in dist_strategy()) {
            let a = js_divergence(&p, &q).unwrap();
            let b = js_divergence(&q, &p).unwrap();
            prop_assert!((a - b).abs() < 1e-15);
            prop_assert!((0.0..=1.0).contains(&a));
        }

        #[test]
        fn js_distance_satisfies_triangle_inequality(
            p in dist_strategy(),
            q in dist_strategy(),
            r in dist_strategy(),
        ) {
            let pq = js_distance(&p, &q).unwrap();
            let qr = js_distance(&q, &r).unwrap();
            let pr = js_distance(&p, &r).unwrap();
            prop_assert!(pr <= pq + qr + 1e-12);
        }

        #[test]
        fn kl_is_nonnegative(p in dist_strategy(), q in dist_strategy()) {
            // Make q strictly positive so KL is defined.
            let q: Vec<f64> = {
                let shifted: Vec<f64> = q.iter().map(|x| x + 0.01).collect();
                let s: f64 = shifted.iter().sum();
                shifted.iter().map(|x| x / s).collect()
            };
            let d = kl_divergence(&p, &q).unwrap();
            prop_assert!(d >= 0.0);
        }
    }
}
