//! Per-phase player layouts via classical (Torgerson) multidimensional
//! scaling of average inter-player distances.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{Frame, TagId};

#[derive(Debug, Error, PartialEq)]
pub enum EmbeddingError {
    #[error("cluster {0} has no frames")]
    EmptyCluster(usize),
    #[error("frame {index} in cluster has a different roster")]
    RosterMismatch { index: usize },
    #[error("invalid distance matrix: {0}")]
    InvalidMatrix(String),
    #[error("eigen-solve did not converge after {sweeps} sweeps")]
    EigenFailure { sweeps: usize },
}

/// Mean pairwise distances of one cluster's frames. Rows and columns follow
/// `labels`, which are in ascending tag order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AvgDistanceMatrix {
    pub cluster_id: usize,
    pub labels: Vec<TagId>,
    pub d: Vec<Vec<f64>>,
}

impl AvgDistanceMatrix {
    pub fn n(&self) -> usize {
        self.labels.len()
    }

    fn validate(&self) -> Result<(), EmbeddingError> {
        let n = self.n();
        if self.d.len() != n || self.d.iter().any(|r| r.len() != n) {
            return Err(EmbeddingError::InvalidMatrix(format!("expected {n}x{n}")));
        }
        let scale = self.d.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        for i in 0..n {
            if self.d[i][i] != 0.0 {
                return Err(EmbeddingError::InvalidMatrix(format!("non-zero diagonal at {i}")));
            }
            for j in 0..n {
                let v = self.d[i][j];
                if !v.is_finite() || v < 0.0 {
                    return Err(EmbeddingError::InvalidMatrix(format!("entry ({i},{j}) = {v}")));
                }
                if (v - self.d[j][i]).abs() > 1e-9 * scale {
                    return Err(EmbeddingError::InvalidMatrix(format!("asymmetric at ({i},{j})")));
                }
            }
        }
        Ok(())
    }
}

/// Averages Euclidean distances over the given frames.
pub fn avg_distance_matrix<'a>(
    cluster_id: usize,
    frames: impl IntoIterator<Item = &'a Frame>,
) -> Result<AvgDistanceMatrix, EmbeddingError> {
    let mut iter = frames.into_iter();
    let first = iter.next().ok_or(EmbeddingError::EmptyCluster(cluster_id))?;
    let labels: Vec<TagId> = first.positions.keys().cloned().collect();
    let n = labels.len();
    let mut sum = vec![vec![0.0; n]; n];
    let mut count = 0usize;
    for (index, frame) in std::iter::once(first).chain(iter).enumerate() {
        if !frame.positions.keys().eq(labels.iter()) {
            return Err(EmbeddingError::RosterMismatch { index });
        }
        let pts: Vec<_> = frame.positions.values().collect();
        for i in 0..n {
            for j in i + 1..n {
                let d = pts[i].distance(pts[j]);
                sum[i][j] += d;
                sum[j][i] += d;
            }
        }
        count += 1;
    }
    for row in &mut sum {
        row.iter_mut().for_each(|v| *v /= count as f64);
    }
    Ok(AvgDistanceMatrix {
        cluster_id,
        labels,
        d: sum,
    })
}

/// Rebuilds the full matrix from a k-means centroid in canonical pair order.
/// The centroid of a cluster of distance vectors is exactly its average
/// distance matrix.
pub fn matrix_from_pairs(cluster_id: usize, columns: &[(TagId, TagId)], values: &[f64]) -> AvgDistanceMatrix {
    let mut labels: Vec<TagId> = columns.iter().flat_map(|(a, b)| [a.clone(), b.clone()]).collect();
    labels.sort();
    labels.dedup();
    let n = labels.len();
    let index = |t: &TagId| labels.binary_search(t).unwrap_or(0);
    let mut d = vec![vec![0.0; n]; n];
    for ((a, b), &v) in columns.iter().zip(values) {
        let (i, j) = (index(a), index(b));
        d[i][j] = v;
        d[j][i] = v;
    }
    AvgDistanceMatrix { cluster_id, labels, d }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseLayout {
    pub cluster_id: usize,
    pub labels: Vec<TagId>,
    /// `(u, v)` per player, same order as `labels`.
    pub coords: Vec<(f64, f64)>,
    /// All eigenvalues of the doubly-centered matrix, non-increasing.
    pub eigvals: Vec<f64>,
    /// `||D_hat - D||_F / ||D||_F` over off-diagonal entries.
    pub stress: f64,
}

pub const JACOBI_TOL: f64 = 1e-12;
pub const JACOBI_MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix. Returns
/// eigenvalues in non-increasing order and the matching unit eigenvectors as
/// columns (`vecs[row][col]`).
pub fn symmetric_eigen(a: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<Vec<f64>>), EmbeddingError> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    let frob: f64 = m.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    let off = |m: &[Vec<f64>]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += m[i][j] * m[i][j];
                }
            }
        }
        s.sqrt()
    };

    let mut converged = off(&m) <= JACOBI_TOL * frob;
    let mut sweeps = 0;
    while !converged && sweeps < JACOBI_MAX_SWEEPS {
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p][q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for row in v.iter_mut() {
                    let (vkp, vkq) = (row[p], row[q]);
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
        converged = off(&m) <= JACOBI_TOL * frob;
    }
    if !converged {
        return Err(EmbeddingError::EigenFailure { sweeps });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j][j].total_cmp(&m[i][i]).then(i.cmp(&j)));
    let vals = order.iter().map(|&i| m[i][i]).collect();
    let vecs = (0..n).map(|r| order.iter().map(|&c| v[r][c]).collect()).collect();
    Ok((vals, vecs))
}

/// Torgerson scaling to two dimensions: double-center the squared distances,
/// take the top two eigenpairs, scale eigenvectors by the square roots of the
/// (zero-clamped) eigenvalues.
pub fn classical_mds(d: &AvgDistanceMatrix) -> Result<PhaseLayout, EmbeddingError> {
    d.validate()?;
    let n = d.n();
    if n == 0 {
        return Err(EmbeddingError::InvalidMatrix("empty".into()));
    }
    let sq: Vec<Vec<f64>> = d.d.iter().map(|r| r.iter().map(|x| x * x).collect()).collect();
    let row_mean: Vec<f64> = sq.iter().map(|r| r.iter().sum::<f64>() / n as f64).collect();
    let grand = row_mean.iter().sum::<f64>() / n as f64;
    let b: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| -0.5 * (sq[i][j] - row_mean[i] - row_mean[j] + grand)).collect())
        .collect();

    let (eigvals, vecs) = symmetric_eigen(&b)?;
    let scale = |k: usize| eigvals.get(k).map_or(0.0, |&l| l.max(0.0).sqrt());
    let (s0, s1) = (scale(0), scale(1));
    let coords: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let u = vecs[i].first().map_or(0.0, |e| e * s0);
            let v = vecs[i].get(1).map_or(0.0, |e| e * s1);
            (u, v)
        })
        .collect();
    let stress = stress(&d.d, &coords);
    Ok(PhaseLayout {
        cluster_id: d.cluster_id,
        labels: d.labels.clone(),
        coords,
        eigvals,
        stress,
    })
}

/// Pairwise distances between layout points.
pub fn layout_distances(coords: &[(f64, f64)]) -> Vec<Vec<f64>> {
    coords
        .iter()
        .map(|a| coords.iter().map(|b| (a.0 - b.0).hypot(a.1 - b.1)).collect())
        .collect()
}

fn stress(d: &[Vec<f64>], coords: &[(f64, f64)]) -> f64 {
    let dhat = layout_distances(coords);
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..d.len() {
        for j in 0..d.len() {
            if i != j {
                num += (dhat[i][j] - d[i][j]).powi(2);
                den += d[i][j] * d[i][j];
            }
        }
    }
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

/// Puts a layout in canonical orientation: centered, first principal axis
/// along `u`, then reflected so the lowest-tag player with a non-zero `u`
/// has `u > 0` and likewise for `v`.
pub fn canonicalize_layout(layout: &PhaseLayout) -> PhaseLayout {
    let n = layout.coords.len().max(1) as f64;
    let (mu, mv) = layout
        .coords
        .iter()
        .fold((0.0, 0.0), |(a, b), &(u, v)| (a + u / n, b + v / n));
    let centered: Vec<(f64, f64)> = layout.coords.iter().map(|&(u, v)| (u - mu, v - mv)).collect();

    let (mut suu, mut svv, mut suv) = (0.0, 0.0, 0.0);
    for &(u, v) in &centered {
        suu += u * u;
        svv += v * v;
        suv += u * v;
    }
    let theta = 0.5 * (2.0 * suv).atan2(suu - svv);
    let (sin, cos) = theta.sin_cos();
    let mut coords: Vec<(f64, f64)> = centered
        .iter()
        .map(|&(u, v)| (u * cos + v * sin, -u * sin + v * cos))
        .collect();

    let scale = coords.iter().fold(0.0f64, |m, &(u, v)| m.max(u.abs()).max(v.abs()));
    let tol = 1e-9 * scale.max(f64::MIN_POSITIVE);
    let anchor_sign = |pick: fn(&(f64, f64)) -> f64, coords: &[(f64, f64)]| {
        coords
            .iter()
            .map(pick)
            .find(|c| c.abs() > tol)
            .map_or(1.0, f64::signum)
    };
    let su = anchor_sign(|c| c.0, &coords);
    let sv = anchor_sign(|c| c.1, &coords);
    for c in &mut coords {
        // + 0.0 normalizes -0.0
        *c = (c.0 * su + 0.0, c.1 * sv + 0.0);
    }
    PhaseLayout {
        coords,
        ..layout.clone()
    }
}
