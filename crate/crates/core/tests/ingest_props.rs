use std::collections::BTreeMap;

use court_trace::ingest::{
    build_trajectories, grid_time, parse_sensor_log, resample_to_grid, stream_stats, write_sensor_log, ColumnNames,
    GridSpec, SensorLogFormat, SensorSample, TagId, TrackPoint, Trajectory,
};
use proptest::prelude::*;

fn sample() -> impl Strategy<Value = SensorSample> {
    (1u32..6, 0u64..5_000, -5.0f64..35.0, -5.0f64..20.0).prop_map(|(tag, t, x, y)| SensorSample {
        tag_id: TagId::from(tag),
        timestamp_ms: t,
        x,
        y,
    })
}

fn track() -> impl Strategy<Value = Vec<TrackPoint>> {
    prop::collection::vec((1u64..700, -10.0f64..40.0, -10.0f64..25.0), 1..40).prop_map(|steps| {
        let mut t = 0;
        steps
            .into_iter()
            .map(|(dt, x, y)| {
                t += dt;
                TrackPoint { t_ms: t, x, y }
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn write_then_parse_round_trips(samples in prop::collection::vec(sample(), 1..60)) {
        let cols = ColumnNames::default();
        let mut buf = Vec::new();
        write_sensor_log(&samples, &cols, &mut buf).unwrap();
        let back = parse_sensor_log(buf.as_slice(), SensorLogFormat::Csv, &cols).unwrap();
        prop_assert_eq!(back, samples);
    }

    #[test]
    fn total_counts_samples_after_dedup(samples in prop::collection::vec(sample(), 1..80)) {
        let trajs = build_trajectories(&samples);
        let mut keys: Vec<(TagId, u64)> = samples.iter().map(|s| (s.tag_id.clone(), s.timestamp_ms)).collect();
        keys.sort();
        keys.dedup();
        let stats = stream_stats(&trajs);
        prop_assert_eq!(stats.total_samples, keys.len());
        prop_assert_eq!(stats.per_player.values().map(|p| p.count).sum::<usize>(), keys.len());
    }

    #[test]
    fn duplicate_resolution_keeps_last(samples in prop::collection::vec(sample(), 1..80)) {
        let trajs = build_trajectories(&samples);
        for s in &samples {
            let last = samples
                .iter()
                .rev()
                .find(|o| o.tag_id == s.tag_id && o.timestamp_ms == s.timestamp_ms)
                .unwrap();
            let p = trajs[&s.tag_id].samples.iter().find(|p| p.t_ms == s.timestamp_ms).unwrap();
            prop_assert_eq!((p.x, p.y), (last.x, last.y));
        }
    }

    #[test]
    fn grid_is_exact_and_interpolation_bounded(
        a in track(),
        b in track(),
        hz in prop::sample::select(vec![1.0, 2.5, 3.0, 5.0, 7.0, 10.0, 25.0]),
        max_gap in 50u64..1500,
    ) {
        let mut trajs = BTreeMap::new();
        for (i, s) in [a, b].into_iter().enumerate() {
            let tag = TagId::from(i as u32 + 1);
            trajs.insert(tag.clone(), Trajectory { tag_id: tag, samples: s });
        }
        let roster: Vec<TagId> = trajs.keys().cloned().collect();
        let grid = GridSpec { grid_hz: hz, max_gap_ms: max_gap };
        let frames = resample_to_grid(&trajs, &grid, &roster).unwrap();
        let epoch = trajs.values().map(|t| t.samples[0].t_ms).min().unwrap();
        prop_assert!(frames.windows(2).all(|w| w[0].t_ms < w[1].t_ms));
        for f in &frames {
            // every frame time is some grid point
            let k = ((f.t_ms - epoch) as f64 * hz / 1000.0).round() as u64;
            prop_assert!((k.saturating_sub(1)..=k + 1).any(|kk| grid_time(epoch, kk, hz) == f.t_ms));
            for (tag, p) in &f.positions {
                let s = &trajs[tag].samples;
                let i = s.partition_point(|q| q.t_ms <= f.t_ms);
                let lo = s[i - 1];
                if lo.t_ms == f.t_ms {
                    prop_assert_eq!((p.x, p.y), (lo.x, lo.y));
                } else {
                    let hi = s[i];
                    prop_assert!(hi.t_ms - lo.t_ms <= max_gap);
                    prop_assert!(p.x >= lo.x.min(hi.x) && p.x <= lo.x.max(hi.x));
                    prop_assert!(p.y >= lo.y.min(hi.y) && p.y <= lo.y.max(hi.y));
                }
            }
        }
    }
}
