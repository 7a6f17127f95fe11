//! Seeded synthetic fixtures: a scripted match with offense/defense plays at
//! chosen spacings, constant-velocity tracks, and separable point blobs.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::events::{EventKind, GameEvent};
use crate::geometry::{convex_hull, polygon_area};
use crate::ingest::{AttackDirection, CourtSpec, Point, SensorSample, TagId, TrackPoint, Trajectory};
use crate::segmentation::PlaySide;

#[derive(Clone, Debug, PartialEq)]
pub struct MatchConfig {
    pub seed: u64,
    pub duration_ms: u64,
    pub sample_interval_ms: u64,
    /// Per-tag sampling phase offset, multiplied by the tag index.
    pub tag_offset_ms: u64,
    pub n_on_court: usize,
    pub n_bench: usize,
    /// Target mean pairwise distance in offensive plays.
    pub offense_spacing_m: f64,
    /// Target mean pairwise distance in defensive plays.
    pub defense_spacing_m: f64,
    /// Target mean hull area in offensive plays.
    pub offense_hull_m2: f64,
    /// Target mean hull area in defensive plays.
    pub defense_hull_m2: f64,
    /// Relative per-play spread of the spacing target.
    pub spacing_jitter: f64,
    pub play_ms: (u64, u64),
    pub transition_ms: u64,
    pub noise_sigma_m: f64,
    pub n_periods: u32,
    pub n_events: usize,
    pub length_m: f64,
    pub width_m: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            seed: 2016,
            duration_ms: 600_000,
            sample_interval_ms: 162,
            tag_offset_ms: 27,
            n_on_court: 5,
            n_bench: 1,
            offense_spacing_m: 7.25,
            defense_spacing_m: 5.68,
            offense_hull_m2: 42.59,
            defense_hull_m2: 28.55,
            spacing_jitter: 0.12,
            play_ms: (8_000, 24_000),
            transition_ms: 2_500,
            noise_sigma_m: 0.1,
            n_periods: 4,
            n_events: 500,
            length_m: 28.0,
            width_m: 15.0,
        }
    }
}

impl MatchConfig {
    /// Full-length fixture: 6 tags every 162 ms, 22,277 samples each
    /// (133,662 in total).
    pub fn full_match() -> Self {
        MatchConfig {
            duration_ms: 22_276 * 162 + 5 * 27,
            ..MatchConfig::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScriptedPlay {
    pub start_ms: u64,
    pub end_ms: u64,
    pub side: PlaySide,
    pub period: u32,
}

#[derive(Clone, Debug)]
pub struct SyntheticMatch {
    pub samples: Vec<SensorSample>,
    pub plays: Vec<ScriptedPlay>,
    pub events: Vec<GameEvent>,
    pub court: CourtSpec,
    pub roster: Vec<TagId>,
}

struct Formation {
    center: Point,
    slots: Vec<Point>,
    wobble: Vec<(f64, f64, f64)>, // amplitude m, frequency Hz, phase
}

impl Formation {
    fn position(&self, i: usize, t_ms: u64) -> Point {
        let (amp, freq, phase) = self.wobble[i];
        let s = t_ms as f64 / 1000.0 * freq * TAU + phase;
        Point::new(
            self.center.x + self.slots[i].x + amp * s.sin(),
            self.center.y + self.slots[i].y + amp * (1.3 * s).cos(),
        )
    }
}

fn mean_pairwise(points: &[Point]) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            sum += points[i].distance(&points[j]);
            n += 1;
        }
    }
    sum / n.max(1) as f64
}

/// Random centered shape with mean pairwise distance `spacing` whose hull
/// area over squared spacing is close to `ratio` and which fits inside
/// `±half_extent`. Best of a bounded number of draws.
fn formation_shape<R: Rng>(rng: &mut R, n: usize, ratio: f64, spacing: f64, half_extent: Point) -> Vec<Point> {
    let mut best: Option<(f64, Vec<Point>)> = None;
    for _ in 0..500 {
        let rot = rng.random_range(-0.4..0.4);
        let stretch = rng.random_range(1.0..1.8);
        let mut slots: Vec<Point> = (0..n)
            .map(|i| {
                let a = rot + TAU * i as f64 / n as f64 + rng.random_range(-0.35..0.35);
                let r = rng.random_range(0.6..1.4);
                Point::new(r * a.cos(), stretch * r * a.sin())
            })
            .collect();
        let (mx, my) = slots
            .iter()
            .fold((0.0, 0.0), |(a, b), s| (a + s.x / n as f64, b + s.y / n as f64));
        let scale = spacing / mean_pairwise(&slots);
        slots
            .iter_mut()
            .for_each(|s| *s = Point::new((s.x - mx) * scale, (s.y - my) * scale));
        let overflow = slots
            .iter()
            .map(|s| (s.x.abs() - half_extent.x).max(s.y.abs() - half_extent.y).max(0.0))
            .fold(0.0, f64::max);
        let err = (polygon_area(&convex_hull(&slots)) / (spacing * spacing) - ratio).abs() + overflow;
        if best.as_ref().is_none_or(|(e, _)| err < *e) {
            best = Some((err, slots));
        }
        if err < 0.002 {
            break;
        }
    }
    best.map(|(_, s)| s).unwrap_or_default()
}

fn side_targets(cfg: &MatchConfig, side: PlaySide) -> (f64, f64) {
    match side {
        PlaySide::Offense => (cfg.offense_spacing_m, cfg.offense_hull_m2),
        PlaySide::Defense => (cfg.defense_spacing_m, cfg.defense_hull_m2),
    }
}

fn attack_direction(period: u32, n_periods: u32) -> AttackDirection {
    if period <= n_periods.div_ceil(2) {
        AttackDirection::TowardPositiveX
    } else {
        AttackDirection::TowardNegativeX
    }
}

/// Generates a seeded match. On-court tags are `1..=n_on_court`, bench tags
/// follow and stay off the court. Plays never cross a period boundary.
pub fn generate_match(cfg: &MatchConfig) -> SyntheticMatch {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_periods = cfg.n_periods.max(1);
    let period_len = cfg.duration_ms.div_ceil(u64::from(n_periods)).max(1);
    let period_of = |t: u64| ((t / period_len) as u32 + 1).min(n_periods);
    let court = CourtSpec {
        length_m: cfg.length_m,
        width_m: cfg.width_m,
        attack_direction: (1..=n_periods).map(|p| attack_direction(p, n_periods)).collect(),
    };

    // play script
    let mut plays = Vec::new();
    let mut side = if rng.random_bool(0.5) { PlaySide::Offense } else { PlaySide::Defense };
    let mut t = 0u64;
    while t < cfg.duration_ms {
        let period = period_of(t);
        let period_end = (u64::from(period) * period_len).min(cfg.duration_ms);
        let len = rng.random_range(cfg.play_ms.0..=cfg.play_ms.1);
        let mut end = (t + len).min(period_end);
        if period_end - end < cfg.play_ms.0 / 2 {
            end = period_end;
        }
        plays.push(ScriptedPlay {
            start_ms: t,
            end_ms: end,
            side,
            period,
        });
        side = match side {
            PlaySide::Offense => PlaySide::Defense,
            PlaySide::Defense => PlaySide::Offense,
        };
        t = end;
    }

    let n = cfg.n_on_court;
    // Per-play spacing factors, rescaled per side so the duration-weighted
    // mean spacing and mean hull area hit their targets.
    let mut factors: Vec<f64> = plays
        .iter()
        .map(|_| 1.0 + rng.random_range(-cfg.spacing_jitter..=cfg.spacing_jitter))
        .collect();
    let mut hull_ratio = [0.0; 2];
    for (si, side) in [PlaySide::Offense, PlaySide::Defense].into_iter().enumerate() {
        let (spacing, hull) = side_targets(cfg, side);
        let (mut w, mut f1, mut f2) = (0.0, 0.0, 0.0);
        for (p, f) in plays.iter().zip(&factors) {
            if p.side == side {
                let d = (p.end_ms - p.start_ms) as f64;
                w += d;
                f1 += d * f;
                f2 += d * f * f;
            }
        }
        if w > 0.0 {
            let c = w / f1;
            for (p, f) in plays.iter().zip(factors.iter_mut()) {
                if p.side == side {
                    *f *= c;
                }
            }
            hull_ratio[si] = hull / (spacing * spacing * f2 * c * c / w);
        }
    }
    let formations: Vec<Formation> = plays
        .iter()
        .zip(&factors)
        .map(|(p, f)| {
            let attacking_positive = attack_direction(p.period, n_periods) == AttackDirection::TowardPositiveX;
            let in_positive_half = (p.side == PlaySide::Offense) == attacking_positive;
            let base_x = if in_positive_half { cfg.length_m * 0.75 } else { cfg.length_m * 0.25 };
            let center = Point::new(
                base_x + rng.random_range(-1.0..1.0),
                cfg.width_m / 2.0 + rng.random_range(-1.0..1.0),
            );
            let (spacing, _) = side_targets(cfg, p.side);
            let ratio = hull_ratio[usize::from(p.side == PlaySide::Defense)];
            // room left by the center jitter, wobble and a margin
            let half_extent = Point::new(cfg.length_m / 4.0 - 1.5, cfg.width_m / 2.0 - 1.5);
            let slots = formation_shape(&mut rng, n, ratio, spacing * f, half_extent);
            let wobble = (0..n)
                .map(|_| (rng.random_range(0.1..0.25), rng.random_range(0.05..0.2), rng.random_range(0.0..TAU)))
                .collect();
            Formation { center, slots, wobble }
        })
        .collect();

    let noise = Normal::new(0.0, cfg.noise_sigma_m.max(0.0)).expect("finite sigma");
    let clamp = |p: Point| Point::new(p.x.clamp(0.2, cfg.length_m - 0.2), p.y.clamp(0.2, cfg.width_m - 0.2));
    let total_tags = n + cfg.n_bench;
    let roster: Vec<TagId> = (1..=n as u32).map(TagId::from).collect();
    let mut samples = Vec::new();
    for tag_idx in 0..total_tags {
        let tag = TagId::from(tag_idx as u32 + 1);
        let offset = tag_idx as u64 * cfg.tag_offset_ms;
        let mut play_idx = 0usize;
        let mut t = offset;
        while t <= cfg.duration_ms {
            while play_idx + 1 < plays.len() && plays[play_idx].end_ms <= t {
                play_idx += 1;
            }
            let truth = if tag_idx < n {
                let cur = formations[play_idx].position(tag_idx, t);
                let since = t - plays[play_idx].start_ms;
                if play_idx > 0 && since < cfg.transition_ms {
                    let prev = formations[play_idx - 1].position(tag_idx, t);
                    let s = since as f64 / cfg.transition_ms as f64;
                    let s = s * s * (3.0 - 2.0 * s);
                    Point::new(prev.x + s * (cur.x - prev.x), prev.y + s * (cur.y - prev.y))
                } else {
                    cur
                }
            } else {
                let k = (tag_idx - n) as f64;
                Point::new(cfg.length_m / 2.0 + 1.5 * k, -1.0)
            };
            let truth = if tag_idx < n { clamp(truth) } else { truth };
            samples.push(SensorSample {
                tag_id: tag.clone(),
                timestamp_ms: t,
                x: truth.x + noise.sample(&mut rng),
                y: truth.y + noise.sample(&mut rng),
            });
            t += cfg.sample_interval_ms;
        }
    }
    samples.sort_by(|a, b| a.timestamp_ms.cmp(&b.timestamp_ms).then(a.tag_id.cmp(&b.tag_id)));

    let mut events = Vec::new();
    for p in 1..=n_periods {
        let start = u64::from(p - 1) * period_len;
        let end = (u64::from(p) * period_len).min(cfg.duration_ms).saturating_sub(1).max(start);
        events.push(period_event(start, EventKind::PeriodStart, p));
        events.push(period_event(end, EventKind::PeriodEnd, p));
    }
    let kinds = [
        EventKind::Pass,
        EventKind::Pass,
        EventKind::MadeShot,
        EventKind::MissedShot,
        EventKind::Rebound,
        EventKind::Foul,
        EventKind::Timeout,
        EventKind::Other("steal".into()),
    ];
    let n_periodic = events.len();
    for _ in n_periodic..cfg.n_events.max(n_periodic) {
        let t = rng.random_range(1..cfg.duration_ms.max(2) - 1);
        let kind = kinds[rng.random_range(0..kinds.len())].clone();
        let player = TagId::from(rng.random_range(1..=n as u32));
        events.push(GameEvent {
            t_ms: t,
            kind,
            players: vec![player],
            payload: BTreeMap::new(),
        });
    }
    events.sort_by_key(|e| e.t_ms);

    SyntheticMatch {
        samples,
        plays,
        events,
        court,
        roster,
    }
}

fn period_event(t_ms: u64, kind: EventKind, period: u32) -> GameEvent {
    GameEvent {
        t_ms,
        kind,
        players: vec![],
        payload: BTreeMap::from([("period".to_string(), period.to_string())]),
    }
}

/// Events as CSV in the schema `parse_events` reads.
pub fn events_csv(events: &[GameEvent]) -> String {
    let mut out = String::from("t_ms,kind,players\n");
    for e in events {
        let players: Vec<&str> = e.players.iter().map(TagId::as_str).collect();
        out.push_str(&format!("{},{},{}\n", e.t_ms, e.kind, players.join(";")));
    }
    out
}

/// Straight-line track at `speed` m/s along x with Gaussian measurement noise.
/// Returns `(truth, measured)`.
pub fn constant_velocity_track(seed: u64, steps: usize, dt_ms: u64, speed: f64, sigma: f64) -> (Trajectory, Trajectory) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).expect("finite sigma");
    let tag = TagId::new("1");
    let mut truth = Vec::with_capacity(steps);
    let mut measured = Vec::with_capacity(steps);
    for k in 0..steps {
        let t_ms = k as u64 * dt_ms;
        let x = 2.0 + speed * t_ms as f64 / 1000.0;
        let y = 7.5;
        truth.push(TrackPoint { t_ms, x, y });
        measured.push(TrackPoint {
            t_ms,
            x: x + noise.sample(&mut rng),
            y: y + noise.sample(&mut rng),
        });
    }
    (
        Trajectory {
            tag_id: tag.clone(),
            samples: truth,
        },
        Trajectory {
            tag_id: tag,
            samples: measured,
        },
    )
}

/// `per` Gaussian points around each center, blob by blob.
pub fn blob_rows(centers: &[Vec<f64>], per: usize, spread: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, spread).expect("finite spread");
    centers
        .iter()
        .flat_map(|c| std::iter::repeat_n(c, per))
        .map(|c| c.iter().map(|v| v + noise.sample(&mut rng)).collect())
        .collect()
}

/// `n` points uniform on the court rectangle.
pub fn random_points<R: Rng>(rng: &mut R, n: usize, length_m: f64, width_m: f64) -> Vec<Point> {
    (0..n)
        .map(|_| Point::new(rng.random_range(0.0..length_m), rng.random_range(0.0..width_m)))
        .collect()
}
