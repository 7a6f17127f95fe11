//! Order statistics used by the spacing summaries.

use serde::Serialize;

/// Min, quartiles, mean and max of a sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FiveNumberMean {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub mean: f64,
    pub q3: f64,
    pub max: f64,
}

/// Quantile of an ascending-sorted slice, linear interpolation between the
/// closest ranks (`h = (n - 1) p`).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = h - lo as f64;
    Some(sorted[lo] + frac * (sorted[hi] - sorted[lo]))
}

pub fn describe(values: &[f64]) -> Option<FiveNumberMean> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = |p| quantile_sorted(&sorted, p).unwrap_or(f64::NAN);
    let mean = (sorted.iter().sum::<f64>() / sorted.len() as f64).clamp(sorted[0], sorted[sorted.len() - 1]);
    Some(FiveNumberMean {
        min: sorted[0],
        q1: q(0.25),
        median: q(0.5),
        mean,
        q3: q(0.75),
        max: sorted[sorted.len() - 1],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_ranks() {
        let d = describe(&[5.0, 3.0, 1.0, 4.0, 2.0]).unwrap();
        assert_eq!((d.min, d.q1, d.median, d.mean, d.q3, d.max), (1.0, 2.0, 3.0, 3.0, 4.0, 5.0));
    }

    #[test]
    fn interpolated_ranks() {
        // R: quantile(c(1,2,3,4), c(.25,.5,.75)) == 1.75 2.5 3.25
        let d = describe(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!((d.q1, d.median, d.q3), (1.75, 2.5, 3.25));
    }

    #[test]
    fn single_value() {
        let d = describe(&[7.5]).unwrap();
        assert!([d.min, d.q1, d.median, d.mean, d.q3, d.max].iter().all(|&v| v == 7.5));
        assert!(describe(&[]).is_none());
    }
}
