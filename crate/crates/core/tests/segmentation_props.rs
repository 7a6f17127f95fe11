use court_trace::ingest::{AttackDirection, CourtSpec, Frame, Point, TagId};
use court_trace::segmentation::{label_frames, segment_plays, PlayLabel, PlaySide};
use court_trace::stats::describe;
use proptest::prelude::*;

fn court() -> CourtSpec {
    CourtSpec {
        attack_direction: vec![AttackDirection::TowardPositiveX, AttackDirection::TowardNegativeX],
        ..CourtSpec::default()
    }
}

// quarter-meter grid keeps centroid sums exact under reordering
fn frames() -> impl Strategy<Value = Vec<Vec<(u32, u32)>>> {
    prop::collection::vec(prop::collection::vec((0u32..=112, 0u32..=60), 5), 1..40)
}

fn build(raw: &[Vec<(u32, u32)>], tags: &[u32]) -> Vec<Frame> {
    raw.iter()
        .enumerate()
        .map(|(i, ps)| {
            Frame::new(
                i as u64 * 200,
                ps.iter()
                    .zip(tags)
                    .map(|(&(x, y), &t)| (TagId::from(t), Point::new(x as f64 / 4.0, y as f64 / 4.0))),
            )
        })
        .collect()
}

fn labels() -> impl Strategy<Value = Vec<PlayLabel>> {
    prop::collection::vec((1u64..3000, any::<bool>()), 1..60).prop_map(|steps| {
        let mut t = 0;
        steps
            .into_iter()
            .map(|(dt, off)| {
                t += dt;
                PlayLabel {
                    t_ms: t,
                    label: if off { PlaySide::Offense } else { PlaySide::Defense },
                }
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn labels_ignore_player_identity(raw in frames(), split in 0u64..8000) {
        let period = |t: u64| Some(if t < split { 1 } else { 2 });
        let a = label_frames(&build(&raw, &[1, 2, 3, 4, 5]), &court(), period).unwrap();
        let b = label_frames(&build(&raw, &[9, 4, 17, 2, 30]), &court(), period).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn intervals_tile_the_span(ls in labels(), min_ms in 0u64..5000) {
        let iv = segment_plays(&ls, min_ms);
        prop_assert!(!iv.is_empty());
        prop_assert_eq!(iv[0].start_ms, ls[0].t_ms);
        prop_assert_eq!(iv.last().unwrap().end_ms, ls.last().unwrap().t_ms);
        for w in iv.windows(2) {
            prop_assert_eq!(w[0].end_ms, w[1].start_ms);
            prop_assert!(w[0].label != w[1].label);
        }
    }

    #[test]
    fn summaries_are_order_free_and_monotone(
        values in prop::collection::vec(0.0f64..50.0, 1..50),
        seed in any::<u64>(),
        bump in 0.001f64..10.0,
    ) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let base = describe(&values).unwrap();
        let mut shuffled = values.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(describe(&shuffled).unwrap(), base);
        let mut more = values.clone();
        more.push(base.max + bump);
        let grown = describe(&more).unwrap();
        prop_assert!(grown.max > base.max);
        prop_assert_eq!(grown.min, base.min);
        prop_assert!(base.min <= base.q1 && base.q1 <= base.median && base.median <= base.q3 && base.q3 <= base.max);
        prop_assert!(base.min <= base.mean && base.mean <= base.max);
    }
}
