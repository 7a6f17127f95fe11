use court_trace::ingest::{TagId, TrackPoint, Trajectory};
use court_trace::kinematics::{kalman_filter, KalmanParams};
use court_trace::synthetic::constant_velocity_track;
use proptest::prelude::*;

fn track() -> impl Strategy<Value = Trajectory> {
    prop::collection::vec((1u64..1000, -10.0f64..40.0, -10.0f64..25.0), 1..80).prop_map(|steps| {
        let mut t = 0;
        Trajectory {
            tag_id: TagId::new("1"),
            samples: steps
                .into_iter()
                .map(|(dt, x, y)| {
                    t += dt;
                    TrackPoint { t_ms: t, x, y }
                })
                .collect(),
        }
    })
}

fn total_variation(points: impl Iterator<Item = (f64, f64)>) -> f64 {
    let pts: Vec<_> = points.collect();
    pts.windows(2)
        .map(|w| (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1))
        .sum()
}

proptest! {
    #[test]
    fn covariance_symmetric_and_length_preserved(
        traj in track(),
        q in 0.01f64..20.0,
        r in 0.001f64..1.0,
    ) {
        let params = KalmanParams { process_noise_accel: q, measurement_noise: r, ..KalmanParams::default() };
        let est = kalman_filter(&traj, &params).unwrap();
        prop_assert_eq!(est.len(), traj.samples.len());
        for (e, s) in est.iter().zip(&traj.samples) {
            prop_assert_eq!(e.t_ms, s.t_ms);
            let asym = (e.covariance - e.covariance.transpose()).abs().max();
            prop_assert!(asym < 1e-9);
            prop_assert!((0..4).all(|i| e.covariance[(i, i)] >= 0.0));
        }
    }
}

#[test]
fn vanishing_measurement_noise_tracks_measurements() {
    let (_, measured) = constant_velocity_track(11, 120, 100, 1.0, 0.3);
    let mut last = f64::INFINITY;
    let mut first = None;
    for r in [1e-2, 1e-4, 1e-6] {
        let params = KalmanParams {
            measurement_noise: r,
            ..KalmanParams::default()
        };
        let est = kalman_filter(&measured, &params).unwrap();
        let sup = est
            .iter()
            .zip(&measured.samples)
            .map(|(e, m)| (e.position.0 - m.x).abs().max((e.position.1 - m.y).abs()))
            .fold(0.0, f64::max);
        assert!(sup < last, "sup-norm {sup} did not shrink below {last} at r = {r}");
        first.get_or_insert(sup);
        last = sup;
    }
    let first = first.unwrap();
    assert!(last < 0.1 * first, "sup-norm went from {first} to only {last}");
}

#[test]
fn smooth_track_stays_close_with_tiny_noise() {
    let (truth, _) = constant_velocity_track(1, 100, 100, 1.5, 0.0);
    let params = KalmanParams {
        measurement_noise: 1e-6,
        ..KalmanParams::default()
    };
    let est = kalman_filter(&truth, &params).unwrap();
    let max_disp = est
        .iter()
        .zip(&truth.samples)
        .map(|(e, s)| (e.position.0 - s.x).hypot(e.position.1 - s.y))
        .fold(0.0, f64::max);
    assert!(max_disp < 10.0 * 1e-6f64.sqrt(), "max displacement {max_disp}");
}

#[test]
fn filtered_path_is_shorter_than_raw() {
    for seed in 0..20 {
        let (_, measured) = constant_velocity_track(seed, 200, 100, 1.0, 0.3);
        let est = kalman_filter(&measured, &KalmanParams::default()).unwrap();
        let raw = total_variation(measured.samples.iter().map(|s| (s.x, s.y)));
        let filtered = total_variation(est.iter().map(|e| e.position));
        assert!(filtered <= raw, "seed {seed}: filtered {filtered} raw {raw}");
    }
}
