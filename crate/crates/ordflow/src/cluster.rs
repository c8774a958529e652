//! Density-based clustering (DBSCAN) of 2-D embedding points, plus the
//! k-distance profile used to pick the radius parameter.
//!
//! Classic definitions: a point is *core* when its closed eps-ball
//! (including the point itself) holds at least `min_pts` points; points
//! reachable from a core point join its cluster; everything else is noise.
//! Expansion scans points in input order, so labels are deterministic and
//! a border point within reach of two clusters keeps the first one that
//! discovered it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClusterError {
    #[error("eps must be positive and finite")]
    InvalidEps,
    #[error("min_pts must be at least 1")]
    InvalidMinPts,
    /// k-distance needs `k` neighbors besides the point itself.
    #[error("k = {k} too large for {points} points")]
    KTooLarge { k: usize, points: usize },
}

/// DBSCAN parameters: closed-ball radius and density threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DbscanParams {
    pub eps: f64,
    pub min_pts: usize,
}

impl Default for DbscanParams {
    /// Defaults tuned on the embedded transition matrices via the
    /// 2-distance elbow.
    fn default() -> Self {
        DbscanParams {
            eps: 3.95,
            min_pts: 3,
        }
    }
}

/// Cluster assignment of one point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Label {
    /// Member of the cluster with this zero-based id.
    Cluster(usize),
    Noise,
}

/// Structural role of one point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    Core,
    Border,
    Noise,
}

/// Output of [`dbscan`]: parallel per-point labels and roles.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterLabels {
    pub labels: Vec<Label>,
    pub roles: Vec<Role>,
}

impl ClusterLabels {
    /// Number of clusters found.
    pub fn cluster_count(&self) -> usize {
        self.labels
            .iter()
            .filter_map(|l| match l {
                Label::Cluster(id) => Some(id + 1),
                Label::Noise => None,
            })
            .max()
            .unwrap_or(0)
    }

    /// Number of noise points.
    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|l| **l == Label::Noise).count()
    }
}

#[inline]
fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

/// Indices within the closed eps-ball around `p`, including `p` itself.
fn neighborhood(points: &[[f64; 2]], p: usize, eps2: f64) -> Vec<usize> {
    (0..points.len())
        .filter(|&q| dist2(points[p], points[q]) <= eps2)
        .collect()
}

/// Runs DBSCAN with Euclidean distance over 2-D points.
pub fn dbscan(points: &[[f64; 2]], params: DbscanParams) -> Result<ClusterLabels, ClusterError> {
    if !(params.eps.is_finite() && params.eps > 0.0) {
        return Err(ClusterError::InvalidEps);
    }
    if params.min_pts == 0 {
        return Err(ClusterError::InvalidMinPts);
    }
    let n = points.len();
    let eps2 = params.eps * params.eps;
    let mut labels = vec![Label::Noise; n];
    let mut roles = vec![Role::Noise; n];
    let mut visited = vec![false; n];
    let mut next_cluster = 0usize;

    for p in 0..n {
        if visited[p] {
            continue;
        }
        visited[p] = true;
        let neigh = neighborhood(points, p, eps2);
        if neigh.len() < params.min_pts {
            continue; // provisionally noise; may be adopted as border later
        }
        let cluster = next_cluster;
        next_cluster += 1;
        labels[p] = Label::Cluster(cluster);
        roles[p] = Role::Core;

        let mut queue = std::collections::VecDeque::from(neigh);
        while let Some(q) = queue.pop_front() {
            if !visited[q] {
                visited[q] = true;
                labels[q] = Label::Cluster(cluster);
                let qn = neighborhood(points, q, eps2);
                if qn.len() >= params.min_pts {
                    roles[q] = Role::Core;
                    queue.extend(qn);
                } else {
                    roles[q] = Role::Border;
                }
            } else if labels[q] == Label::Noise {
                // Previously dismissed as noise, but density-reachable from
                // this cluster's core: it becomes a border member.
                labels[q] = Label::Cluster(cluster);
                roles[q] = Role::Border;
            }
            // Already claimed by a cluster: first discovery wins.
        }
    }
    Ok(ClusterLabels { labels, roles })
}

/// Distance from each point to its k-th nearest *other* point, sorted
/// descending — the curve whose elbow suggests eps.
pub fn k_distance(points: &[[f64; 2]], k: usize) -> Result<Vec<f64>, ClusterError> {
    let n = points.len();
    if k == 0 || k >= n {
        return Err(ClusterError::KTooLarge { k, points: n });
    }
    let mut out = Vec::with_capacity(n);
    for p in 0..n {
        let mut d2: Vec<f64> = (0..n)
            .filter(|&q| q != p)
            .map(|q| dist2(points[p], points[q]))
            .collect();
        d2.sort_by(f64::total_cmp);
        out.push(d2[k - 1].sqrt());
    }
    out.sort_by(|a, b| b.total_cmp(a));
    Ok(out)
}
