//! Per-frame spacing metrics: pairwise distances, convex hull, hull area and
//! team centroid.

use serde::Serialize;
use thiserror::Error;

use crate::ingest::{Frame, Point, TagId};

/// Relative tolerance on orientation cross products.
pub const ORIENTATION_EPS: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("need at least 2 players, got {0}")]
    TooFewPlayers(usize),
    #[error("distance vector is empty")]
    EmptyVector,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlayerPair {
    pub a: TagId,
    pub b: TagId,
    pub distance_m: f64,
}

/// Distances for every unordered player pair of one frame, `a < b`, pairs in
/// lexicographic order of `(a, b)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistanceVector {
    pub t_ms: u64,
    pub pairs: Vec<PlayerPair>,
}

impl DistanceVector {
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.pairs.iter().map(|p| p.distance_m)
    }
}

pub fn pairwise_distances(frame: &Frame) -> Result<DistanceVector, GeometryError> {
    let n = frame.positions.len();
    if n < 2 {
        return Err(GeometryError::TooFewPlayers(n));
    }
    // BTreeMap iteration is already in canonical tag order
    let players: Vec<(&TagId, &Point)> = frame.positions.iter().collect();
    let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
    for (i, (ta, pa)) in players.iter().enumerate() {
        for (tb, pb) in &players[i + 1..] {
            pairs.push(PlayerPair {
                a: (*ta).clone(),
                b: (*tb).clone(),
                distance_m: pa.distance(pb),
            });
        }
    }
    Ok(DistanceVector { t_ms: frame.t_ms, pairs })
}

pub fn mean_distance(dv: &DistanceVector) -> Result<f64, GeometryError> {
    if dv.pairs.is_empty() {
        return Err(GeometryError::EmptyVector);
    }
    Ok(dv.values().sum::<f64>() / dv.pairs.len() as f64)
}

/// Signed cross product of `(a - o) x (b - o)`, snapped to zero when it is
/// within [`ORIENTATION_EPS`] of the operand magnitudes.
pub fn orientation(o: Point, a: Point, b: Point) -> f64 {
    let (ax, ay) = (a.x - o.x, a.y - o.y);
    let (bx, by) = (b.x - o.x, b.y - o.y);
    let cross = ax * by - ay * bx;
    let scale = ax.hypot(ay) * bx.hypot(by);
    if cross.abs() <= ORIENTATION_EPS * scale {
        0.0
    } else {
        cross
    }
}

/// Andrew's monotone chain. Returns hull vertices counter-clockwise starting
/// from the lowest-x (then lowest-y) point. Collinear boundary points are
/// dropped; fewer than three non-collinear points yield the distinct
/// point or the two segment endpoints.
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }

    let mut hull: Vec<Point> = Vec::with_capacity(pts.len() * 2);
    for &p in &pts {
        while hull.len() >= 2 && orientation(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && orientation(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    if hull.len() == 2 && hull[0] == hull[1] {
        hull.pop();
    }
    hull
}

/// Shoelace area, absolute value. Fewer than three vertices give 0.
pub fn polygon_area(vertices: &[Point]) -> f64 {
    if vertices.len() < 3 {
        return 0.0;
    }
    let twice: f64 = vertices
        .iter()
        .zip(vertices.iter().cycle().skip(1))
        .map(|(p, q)| p.x * q.y - q.x * p.y)
        .sum();
    twice.abs() / 2.0
}

/// Inside-or-on test for a counter-clockwise convex polygon (or degenerate
/// point/segment hull), with a small absolute tolerance.
pub fn point_in_convex_hull(hull: &[Point], p: Point, tol: f64) -> bool {
    match hull.len() {
        0 => false,
        1 => hull[0].distance(&p) <= tol,
        2 => distance_to_segment(hull[0], hull[1], p) <= tol,
        n => (0..n).all(|i| {
            let (a, b) = (hull[i], hull[(i + 1) % n]);
            let cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
            cross >= -tol * a.distance(&b).max(1.0)
        }),
    }
}

fn distance_to_segment(a: Point, b: Point, p: Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return a.distance(&p);
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    p.distance(&Point::new(a.x + t * dx, a.y + t * dy))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HullMetrics {
    pub t_ms: u64,
    pub hull_vertices: Vec<Point>,
    pub area_m2: f64,
    /// Mean of player positions, not of hull vertices.
    pub centroid: Point,
}

pub fn hull_metrics(frame: &Frame) -> HullMetrics {
    let points = frame.points();
    let hull_vertices = convex_hull(&points);
    HullMetrics {
        t_ms: frame.t_ms,
        area_m2: polygon_area(&hull_vertices),
        hull_vertices,
        centroid: frame.centroid().unwrap_or_default(),
    }
}

pub fn hull_series(frames: &[Frame]) -> Vec<HullMetrics> {
    frames.iter().map(hull_metrics).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(points: &[(f64, f64)]) -> Frame {
        Frame::new(
            0,
            points
                .iter()
                .enumerate()
                .map(|(i, &(x, y))| (TagId::from(i as u32 + 1), Point::new(x, y))),
        )
    }

    fn pts(raw: &[(f64, f64)]) -> Vec<Point> {
        raw.iter().map(|&(x, y)| Point::new(x, y)).collect()
    }

    #[test]
    fn three_four_five() {
        let dv = pairwise_distances(&frame(&[(0.0, 0.0), (3.0, 4.0)])).unwrap();
        assert_eq!(dv.pairs.len(), 1);
        assert_eq!(dv.pairs[0].distance_m, 5.0);
        assert_eq!(mean_distance(&dv).unwrap(), 5.0);
    }

    #[test]
    fn five_players_give_ten_pairs_in_canonical_order() {
        let f = Frame::new(
            3,
            [10u32, 2, 7, 1, 30]
                .iter()
                .map(|&t| (TagId::from(t), Point::new(t as f64, 0.0))),
        );
        let dv = pairwise_distances(&f).unwrap();
        assert_eq!(dv.pairs.len(), 10);
        assert_eq!(dv.t_ms, 3);
        assert!(dv.pairs.windows(2).all(|w| (&w[0].a, &w[0].b) < (&w[1].a, &w[1].b)));
        assert!(dv.pairs.iter().all(|p| p.a < p.b));
    }

    #[test]
    fn square_with_center_matches_double_loop() {
        let raw = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0), (0.5, 0.5)];
        let dv = pairwise_distances(&frame(&raw)).unwrap();
        let mut got: Vec<f64> = dv.values().collect();
        let mut oracle = Vec::new();
        for i in 0..raw.len() {
            for j in 0..raw.len() {
                if i < j {
                    oracle.push(((raw[i].0 - raw[j].0).powi(2) + (raw[i].1 - raw[j].1).powi(2)).sqrt());
                }
            }
        }
        got.sort_by(f64::total_cmp);
        oracle.sort_by(f64::total_cmp);
        assert_eq!(got, oracle);
        let h = 0.5f64.sqrt();
        let expected = [h, h, h, h, 1.0, 1.0, 1.0, 1.0, 2f64.sqrt(), 2f64.sqrt()];
        for (g, e) in got.iter().zip(expected) {
            assert!((g - e).abs() < 1e-15);
        }
    }

    #[test]
    fn distance_errors() {
        assert_eq!(
            pairwise_distances(&frame(&[(0.0, 0.0)])).unwrap_err(),
            GeometryError::TooFewPlayers(1)
        );
        let empty = DistanceVector { t_ms: 0, pairs: vec![] };
        assert_eq!(mean_distance(&empty).unwrap_err(), GeometryError::EmptyVector);
    }

    #[test]
    fn mean_of_three_four_five() {
        let pair = |d| PlayerPair {
            a: TagId::new("1"),
            b: TagId::new("2"),
            distance_m: d,
        };
        let dv = DistanceVector {
            t_ms: 0,
            pairs: vec![pair(3.0), pair(4.0), pair(5.0)],
        };
        assert_eq!(mean_distance(&dv).unwrap(), 4.0);
    }

    #[test]
    fn hull_drops_interior_point() {
        let hull = convex_hull(&pts(&[(0.0, 0.0), (1.0, 0.0), (0.5, 0.5), (1.0, 1.0), (0.0, 1.0)]));
        assert_eq!(hull, pts(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]));
        assert_eq!(polygon_area(&hull), 1.0);
    }

    #[test]
    fn hull_of_collinear_points_is_segment() {
        let hull = convex_hull(&pts(&[(2.0, 2.0), (0.0, 0.0), (1.0, 1.0)]));
        assert_eq!(hull, pts(&[(0.0, 0.0), (2.0, 2.0)]));
        assert_eq!(polygon_area(&hull), 0.0);
    }

    #[test]
    fn hull_drops_collinear_boundary_points() {
        let hull = convex_hull(&pts(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (2.0, 2.0), (0.0, 2.0)]));
        assert_eq!(hull, pts(&[(0.0, 0.0), (2.0, 0.0), (2.0, 2.0), (0.0, 2.0)]));
    }

    #[test]
    fn hull_degenerate_inputs() {
        assert!(convex_hull(&[]).is_empty());
        assert_eq!(convex_hull(&pts(&[(1.0, 1.0)])), pts(&[(1.0, 1.0)]));
        assert_eq!(convex_hull(&pts(&[(1.0, 1.0), (1.0, 1.0), (1.0, 1.0)])), pts(&[(1.0, 1.0)]));
    }

    #[test]
    fn areas() {
        assert_eq!(polygon_area(&pts(&[(0.0, 0.0), (4.0, 0.0), (0.0, 3.0)])), 6.0);
        assert_eq!(polygon_area(&pts(&[(0.0, 0.0), (4.0, 0.0)])), 0.0);
        assert_eq!(polygon_area(&pts(&[(0.0, 0.0)])), 0.0);
        // clockwise input still positive
        assert_eq!(polygon_area(&pts(&[(0.0, 0.0), (0.0, 1.0), (1.0, 1.0), (1.0, 0.0)])), 1.0);
    }

    #[test]
    fn hull_series_cases() {
        assert!(hull_series(&[]).is_empty());
        let square = frame(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]);
        let repeated = vec![square.clone(); 10];
        let series = hull_series(&repeated);
        assert_eq!(series.len(), 10);
        assert!(series.iter().all(|m| *m == series[0]));
        assert_eq!(series[0].centroid, Point::new(0.5, 0.5));

        let big = frame(&[(0.0, 0.0), (2.0, 0.0), (2.0, 2.0), (0.0, 2.0)]);
        let areas: Vec<f64> = hull_series(&[square, big]).iter().map(|m| m.area_m2).collect();
        assert_eq!(areas, vec![1.0, 4.0]);
    }

    #[test]
    fn containment_test() {
        let hull = convex_hull(&pts(&[(0.0, 0.0), (2.0, 0.0), (2.0, 2.0), (0.0, 2.0)]));
        assert!(point_in_convex_hull(&hull, Point::new(1.0, 1.0), 1e-9));
        assert!(point_in_convex_hull(&hull, Point::new(2.0, 1.0), 1e-9));
        assert!(!point_in_convex_hull(&hull, Point::new(2.1, 1.0), 1e-9));
        let seg = pts(&[(0.0, 0.0), (2.0, 2.0)]);
        assert!(point_in_convex_hull(&seg, Point::new(1.0, 1.0), 1e-9));
        assert!(!point_in_convex_hull(&seg, Point::new(1.0, 0.0), 1e-9));
    }
}
