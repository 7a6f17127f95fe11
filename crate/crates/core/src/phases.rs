//! Game-phase discovery: k-means over per-frame pairwise-distance vectors,
//! BD/TD ratio curves for choosing k, and cluster vs. play-side crosstabs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{self, GeometryError};
use crate::ingest::{Frame, TagId};
use crate::segmentation::{PlayLabel, PlaySide};

#[derive(Debug, Error, PartialEq)]
pub enum PhaseError {
    #[error("k must be at least 1")]
    ZeroClusters,
    #[error("k = {k} exceeds the number of rows ({rows})")]
    TooManyClusters { k: usize, rows: usize },
    #[error("frame {index} has a different roster than frame 0")]
    RosterMismatch { index: usize },
    #[error("row {index} has {got} columns, expected {expected}")]
    RaggedRows { index: usize, got: usize, expected: usize },
    #[error("model assignments and labels misaligned at index {index}")]
    Misaligned { index: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// One row per frame of pairwise distances in canonical pair order.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct FeatureMatrix {
    pub columns: Vec<(TagId, TagId)>,
    pub rows: Vec<Vec<f64>>,
    pub t_ms: Vec<u64>,
}

impl FeatureMatrix {
    /// Unlabeled matrix; row `i` gets timestamp `i`.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let t_ms = (0..rows.len() as u64).collect();
        FeatureMatrix {
            columns: Vec::new(),
            rows,
            t_ms,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.rows.first().map_or(self.columns.len(), Vec::len)
    }
}

pub fn build_features(frames: &[Frame]) -> Result<FeatureMatrix, PhaseError> {
    let Some(first) = frames.first() else {
        return Ok(FeatureMatrix::default());
    };
    let roster: Vec<&TagId> = first.positions.keys().collect();
    let mut matrix = FeatureMatrix {
        columns: Vec::new(),
        rows: Vec::with_capacity(frames.len()),
        t_ms: Vec::with_capacity(frames.len()),
    };
    for (index, frame) in frames.iter().enumerate() {
        if !frame.positions.keys().eq(roster.iter().copied()) {
            return Err(PhaseError::RosterMismatch { index });
        }
        let dv = geometry::pairwise_distances(frame)?;
        if index == 0 {
            matrix.columns = dv.pairs.iter().map(|p| (p.a.clone(), p.b.clone())).collect();
        }
        matrix.rows.push(dv.values().collect());
        matrix.t_ms.push(frame.t_ms);
    }
    Ok(matrix)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct KMeansOptions {
    pub seed: u64,
    pub max_iter: usize,
    pub n_restarts: usize,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        KMeansOptions {
            seed: 42,
            max_iter: 300,
            n_restarts: 10,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub t_ms: u64,
    /// 1-based; C1 is the largest cluster.
    pub cluster: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseModel {
    pub k: usize,
    pub seed: u64,
    pub centroids: Vec<Vec<f64>>,
    pub sizes: Vec<usize>,
    pub assignments: Vec<Assignment>,
    pub total_deviance: f64,
    pub within_deviance: f64,
    pub between_deviance: f64,
    pub bd_td: f64,
    pub iterations: usize,
    /// Within-cluster deviance after each centroid update of the winning restart.
    pub objective_history: Vec<f64>,
}

impl PhaseModel {
    /// 1-based cluster id of each row.
    pub fn cluster_ids(&self) -> Vec<usize> {
        self.assignments.iter().map(|a| a.cluster).collect()
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(row: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = dist2(row, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn column_means(rows: &[Vec<f64>], members: impl Iterator<Item = usize>, dim: usize) -> Vec<f64> {
    let mut sum = vec![0.0; dim];
    let mut n = 0usize;
    for i in members {
        for (s, v) in sum.iter_mut().zip(&rows[i]) {
            *s += v;
        }
        n += 1;
    }
    if n > 0 {
        sum.iter_mut().for_each(|s| *s /= n as f64);
    }
    sum
}

fn kmeans_pp<R: Rng>(rows: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let n = rows.len();
    let mut centroids = Vec::with_capacity(k);
    centroids.push(rows[rng.random_range(0..n)].clone());
    let mut d2: Vec<f64> = rows.iter().map(|r| dist2(r, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (i, &d) in d2.iter().enumerate() {
                if d <= 0.0 {
                    continue;
                }
                acc += d;
                chosen = Some(i);
                if acc > target {
                    break;
                }
            }
            chosen.unwrap_or(0)
        } else {
            rng.random_range(0..n)
        };
        let c = rows[pick].clone();
        for (d, r) in d2.iter_mut().zip(rows) {
            *d = d.min(dist2(r, &c));
        }
        centroids.push(c);
    }
    centroids
}

struct LloydRun {
    centroids: Vec<Vec<f64>>,
    assign: Vec<usize>,
    within: f64,
    iterations: usize,
    history: Vec<f64>,
}

/// Moves the farthest points (from clusters with more than one member) into
/// empty clusters as singletons.
fn repair_empty(rows: &[Vec<f64>], centroids: &mut [Vec<f64>], assign: &mut [usize]) {
    let k = centroids.len();
    let mut counts = vec![0usize; k];
    for &a in assign.iter() {
        counts[a] += 1;
    }
    for j in 0..k {
        if counts[j] > 0 {
            continue;
        }
        let mut far: Option<(usize, f64)> = None;
        for (i, row) in rows.iter().enumerate() {
            let a = assign[i];
            if counts[a] < 2 {
                continue;
            }
            let d = dist2(row, &centroids[a]);
            if far.is_none_or(|(_, best)| d > best) {
                far = Some((i, d));
            }
        }
        if let Some((i, _)) = far {
            counts[assign[i]] -= 1;
            assign[i] = j;
            counts[j] = 1;
            centroids[j] = rows[i].clone();
        }
    }
}

fn lloyd(rows: &[Vec<f64>], mut centroids: Vec<Vec<f64>>, max_iter: usize) -> LloydRun {
    let dim = rows[0].len();
    let k = centroids.len();
    let mut assign: Vec<usize> = rows.iter().map(|r| nearest(r, &centroids).0).collect();
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut within = f64::INFINITY;
    while iterations < max_iter.max(1) {
        iterations += 1;
        repair_empty(rows, &mut centroids, &mut assign);
        centroids = (0..k)
            .map(|j| column_means(rows, assign.iter().enumerate().filter(|(_, &a)| a == j).map(|(i, _)| i), dim))
            .collect();
        within = rows.iter().zip(&assign).map(|(r, &a)| dist2(r, &centroids[a])).sum();
        history.push(within);
        let next: Vec<usize> = rows.iter().map(|r| nearest(r, &centroids).0).collect();
        if next == assign {
            break;
        }
        if iterations < max_iter {
            assign = next;
        }
    }
    LloydRun {
        centroids,
        assign,
        within,
        iterations,
        history,
    }
}

/// Lloyd's algorithm from k-means++ seeds, best of `n_restarts` by
/// within-cluster deviance. Deterministic for a given seed. Clusters are
/// renumbered 1..k by decreasing size (ties by first member row).
pub fn kmeans(features: &FeatureMatrix, k: usize, opts: &KMeansOptions) -> Result<PhaseModel, PhaseError> {
    let rows = &features.rows;
    let n = rows.len();
    if k == 0 {
        return Err(PhaseError::ZeroClusters);
    }
    if k > n {
        return Err(PhaseError::TooManyClusters { k, rows: n });
    }
    let dim = rows[0].len();
    if let Some(index) = rows.iter().position(|r| r.len() != dim) {
        return Err(PhaseError::RaggedRows {
            index,
            got: rows[index].len(),
            expected: dim,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best: Option<LloydRun> = None;
    for _ in 0..opts.n_restarts.max(1) {
        let init = kmeans_pp(rows, k, &mut rng);
        let run = lloyd(rows, init, opts.max_iter);
        if best.as_ref().is_none_or(|b| run.within < b.within) {
            best = Some(run);
        }
    }
    let run = best.expect("at least one restart");

    // renumber by decreasing size, then by first member
    let mut sizes = vec![0usize; k];
    let mut first_member = vec![usize::MAX; k];
    for (i, &a) in run.assign.iter().enumerate() {
        sizes[a] += 1;
        first_member[a] = first_member[a].min(i);
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| sizes[b].cmp(&sizes[a]).then(first_member[a].cmp(&first_member[b])));
    let mut rank = vec![0usize; k];
    for (new, &old) in order.iter().enumerate() {
        rank[old] = new;
    }

    let grand = column_means(rows, 0..n, dim);
    let total: f64 = rows.iter().map(|r| dist2(r, &grand)).sum();
    let between: f64 = (0..k).map(|j| sizes[j] as f64 * dist2(&run.centroids[j], &grand)).sum();
    let bd_td = if total > 0.0 { (between / total).clamp(0.0, 1.0) } else { 0.0 };

    Ok(PhaseModel {
        k,
        seed: opts.seed,
        centroids: order.iter().map(|&j| run.centroids[j].clone()).collect(),
        sizes: order.iter().map(|&j| sizes[j]).collect(),
        assignments: run
            .assign
            .iter()
            .zip(&features.t_ms)
            .map(|(&a, &t_ms)| Assignment {
                t_ms,
                cluster: rank[a] + 1,
            })
            .collect(),
        total_deviance: total,
        within_deviance: run.within,
        between_deviance: between,
        bd_td,
        iterations: run.iterations,
        objective_history: run.history,
    })
}

/// BD/TD ratio for each k, all runs sharing the same options. Values are
/// reported as computed, without enforcing monotonicity.
pub fn bd_td_curve(
    features: &FeatureMatrix,
    ks: impl IntoIterator<Item = usize>,
    opts: &KMeansOptions,
) -> Result<Vec<(usize, f64)>, PhaseError> {
    ks.into_iter()
        .map(|k| kmeans(features, k, opts).map(|m| (k, m.bd_td)))
        .collect()
}

pub const DEFAULT_MIN_GAIN: f64 = 0.05;

/// Smallest k whose step to k+1 gains less than `min_gain`; the last k if
/// every step gains at least that much. `None` for an empty curve.
pub fn select_k(curve: &[(usize, f64)], min_gain: f64) -> Option<usize> {
    curve
        .windows(2)
        .find(|w| w[1].1 - w[0].1 < min_gain)
        .map(|w| w[0].0)
        .or_else(|| curve.last().map(|&(k, _)| k))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CrosstabRow {
    pub cluster: usize,
    pub n_frames: usize,
    pub share_pct: f64,
    pub offense_pct: f64,
    pub defense_pct: f64,
}

#[derive(Clone, Debug, PartialEq, Default, Serialize)]
pub struct PhaseCrosstab {
    pub total_frames: usize,
    pub rows: Vec<CrosstabRow>,
}

impl PhaseCrosstab {
    pub fn share_of(&self, cluster: usize) -> Option<f64> {
        self.rows.iter().find(|r| r.cluster == cluster).map(|r| r.share_pct)
    }
}

/// Per-cluster frame counts, share of all frames and offense/defense mix.
pub fn crosstab(model: &PhaseModel, labels: &[PlayLabel]) -> Result<PhaseCrosstab, PhaseError> {
    if model.assignments.len() != labels.len() {
        return Err(PhaseError::Misaligned {
            index: model.assignments.len().min(labels.len()),
        });
    }
    let mut offense = vec![0usize; model.k];
    let mut counts = vec![0usize; model.k];
    for (index, (a, l)) in model.assignments.iter().zip(labels).enumerate() {
        if a.t_ms != l.t_ms {
            return Err(PhaseError::Misaligned { index });
        }
        counts[a.cluster - 1] += 1;
        if l.label == PlaySide::Offense {
            offense[a.cluster - 1] += 1;
        }
    }
    let total = labels.len();
    let rows = (0..model.k)
        .filter(|&j| counts[j] > 0)
        .map(|j| {
            let n = counts[j] as f64;
            let offense_pct = offense[j] as f64 / n * 100.0;
            CrosstabRow {
                cluster: j + 1,
                n_frames: counts[j],
                share_pct: n / total as f64 * 100.0,
                offense_pct,
                defense_pct: 100.0 - offense_pct,
            }
        })
        .collect();
    Ok(PhaseCrosstab {
        total_frames: total,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Point;

    fn blobs(centers: &[(f64, f64)], per: usize, spread: f64, seed: u64) -> FeatureMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        for &(cx, cy) in centers {
            for _ in 0..per {
                rows.push(vec![
                    cx + rng.random_range(-spread..spread),
                    cy + rng.random_range(-spread..spread),
                ]);
            }
        }
        FeatureMatrix::from_rows(rows)
    }

    #[test]
    fn features_follow_pair_order() {
        let frames: Vec<Frame> = (0..3u64)
            .map(|t| {
                Frame::new(
                    t,
                    (1..=5u32).map(|i| (TagId::from(i), Point::new(i as f64 * (t + 1) as f64, 0.0))),
                )
            })
            .collect();
        let fm = build_features(&frames).unwrap();
        assert_eq!(fm.n_cols(), 10);
        assert_eq!(fm.columns.len(), 10);
        for (row, frame) in fm.rows.iter().zip(&frames) {
            let dv = geometry::pairwise_distances(frame).unwrap();
            assert_eq!(row, &dv.values().collect::<Vec<_>>());
        }
        assert_eq!(build_features(&[]).unwrap().n_rows(), 0);
    }

    #[test]
    fn roster_mismatch_detected() {
        let a = Frame::new(0, [(TagId::from(1), Point::new(0.0, 0.0)), (TagId::from(2), Point::new(1.0, 0.0))]);
        let b = Frame::new(1, [(TagId::from(1), Point::new(0.0, 0.0)), (TagId::from(3), Point::new(1.0, 0.0))]);
        assert_eq!(build_features(&[a, b]).unwrap_err(), PhaseError::RosterMismatch { index: 1 });
    }

    #[test]
    fn single_cluster_is_column_means() {
        let fm = FeatureMatrix::from_rows(vec![vec![0.0, 1.0], vec![2.0, 3.0], vec![4.0, 8.0]]);
        let m = kmeans(&fm, 1, &KMeansOptions::default()).unwrap();
        assert_eq!(m.centroids, vec![vec![2.0, 4.0]]);
        assert_eq!(m.bd_td, 0.0);
    }

    #[test]
    fn one_cluster_per_row() {
        let fm = blobs(&[(0.0, 0.0)], 6, 3.0, 1);
        let m = kmeans(&fm, 6, &KMeansOptions::default()).unwrap();
        assert_eq!(m.within_deviance, 0.0);
        assert_eq!(m.bd_td, 1.0);
        assert!(m.sizes.iter().all(|&s| s == 1));
    }

    #[test]
    fn errors() {
        let fm = FeatureMatrix::from_rows(vec![vec![0.0], vec![1.0]]);
        assert_eq!(kmeans(&fm, 0, &KMeansOptions::default()).unwrap_err(), PhaseError::ZeroClusters);
        assert_eq!(
            kmeans(&fm, 3, &KMeansOptions::default()).unwrap_err(),
            PhaseError::TooManyClusters { k: 3, rows: 2 }
        );
        let ragged = FeatureMatrix::from_rows(vec![vec![0.0], vec![1.0, 2.0]]);
        assert!(matches!(
            kmeans(&ragged, 1, &KMeansOptions::default()),
            Err(PhaseError::RaggedRows { index: 1, .. })
        ));
    }

    #[test]
    fn separated_blobs_recovered() {
        let fm = blobs(&[(0.0, 0.0), (50.0, 50.0)], 10, 1.0, 3);
        let m = kmeans(&fm, 2, &KMeansOptions::default()).unwrap();
        let ids = m.cluster_ids();
        assert!(ids[..10].iter().all(|&c| c == ids[0]));
        assert!(ids[10..].iter().all(|&c| c == ids[10]));
        assert_ne!(ids[0], ids[10]);
    }

    #[test]
    fn deviance_decomposition_and_monotone_objective() {
        let fm = blobs(&[(0.0, 0.0), (5.0, 1.0), (2.0, 6.0)], 30, 3.0, 11);
        for k in 1..=6 {
            let m = kmeans(&fm, k, &KMeansOptions { seed: 9, ..Default::default() }).unwrap();
            let rel = (m.between_deviance + m.within_deviance - m.total_deviance).abs() / m.total_deviance;
            assert!(rel < 1e-9, "k={k} rel={rel}");
            for w in m.objective_history.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-12), "objective rose: {w:?}");
            }
            // every row sits at its nearest centroid
            for (row, a) in fm.rows.iter().zip(&m.assignments) {
                let (j, _) = nearest(row, &m.centroids);
                assert!(
                    dist2(row, &m.centroids[j]) >= dist2(row, &m.centroids[a.cluster - 1]) - 1e-12,
                    "row not at argmin"
                );
            }
            assert!(m.sizes.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let fm = blobs(&[(0.0, 0.0), (3.0, 3.0), (6.0, 0.0)], 40, 2.5, 5);
        let opts = KMeansOptions { seed: 1234, ..Default::default() };
        let a = kmeans(&fm, 4, &opts).unwrap();
        let b = kmeans(&fm, 4, &opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn curve_and_selection() {
        let fm = blobs(&[(0.0, 0.0), (30.0, 0.0), (15.0, 26.0)], 20, 1.0, 8);
        assert_eq!(bd_td_curve(&fm, [1], &KMeansOptions::default()).unwrap(), vec![(1, 0.0)]);
        let curve = bd_td_curve(&fm, 1..=6, &KMeansOptions::default()).unwrap();
        assert!(curve[2].1 - curve[1].1 > 0.3);
        assert_eq!(select_k(&curve, DEFAULT_MIN_GAIN), Some(3));
    }

    #[test]
    fn select_k_rule() {
        assert_eq!(select_k(&[(1, 0.0), (2, 0.9), (3, 0.92)], 0.05), Some(2));
        let linear: Vec<_> = (1..=5).map(|k| (k, (k - 1) as f64 * 0.1)).collect();
        assert_eq!(select_k(&linear, 0.05), Some(5));
        assert_eq!(select_k(&[], 0.05), None);
        assert_eq!(select_k(&[(4, 0.5)], 0.05), Some(4));
    }

    fn model_with(ids: &[usize], k: usize) -> PhaseModel {
        PhaseModel {
            k,
            seed: 0,
            centroids: vec![vec![]; k],
            sizes: vec![0; k],
            assignments: ids
                .iter()
                .enumerate()
                .map(|(i, &c)| Assignment { t_ms: i as u64, cluster: c })
                .collect(),
            total_deviance: 0.0,
            within_deviance: 0.0,
            between_deviance: 0.0,
            bd_td: 0.0,
            iterations: 0,
            objective_history: vec![],
        }
    }

    #[test]
    fn crosstab_percentages() {
        let model = model_with(&[1; 4], 1);
        let labels: Vec<_> = (0..4).map(|t| PlayLabel { t_ms: t, label: PlaySide::Offense }).collect();
        let ct = crosstab(&model, &labels).unwrap();
        assert_eq!(ct.rows[0].offense_pct, 100.0);
        assert_eq!(ct.rows[0].share_pct, 100.0);

        let ids: Vec<usize> = (0..200).map(|i| if i < 100 { 1 } else { 2 }).collect();
        let labels: Vec<_> = (0..200u64)
            .map(|t| {
                let offense = if t < 100 { t < 85 } else { t < 115 };
                PlayLabel { t_ms: t, label: if offense { PlaySide::Offense } else { PlaySide::Defense } }
            })
            .collect();
        let ct = crosstab(&model_with(&ids, 2), &labels).unwrap();
        assert_eq!(ct.rows[0].offense_pct, 85.0);
        assert_eq!(ct.rows[1].offense_pct, 15.0);
        assert_eq!(ct.rows[1].defense_pct, 85.0);
        let total: f64 = ct.rows.iter().map(|r| r.share_pct).sum();
        assert!((total - 100.0).abs() < 1e-9);
    }

    #[test]
    fn crosstab_misaligned() {
        let model = model_with(&[1, 1], 1);
        let labels = vec![PlayLabel { t_ms: 0, label: PlaySide::Offense }, PlayLabel { t_ms: 5, label: PlaySide::Offense }];
        assert_eq!(crosstab(&model, &labels).unwrap_err(), PhaseError::Misaligned { index: 1 });
        assert_eq!(crosstab(&model, &labels[..1]).unwrap_err(), PhaseError::Misaligned { index: 1 });
    }
}
