//! Offense/defense labeling from the team centroid, play intervals, and
//! per-label spacing summaries.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{self, GeometryError};
use crate::ingest::{AttackDirection, CourtSpec, Frame};
use crate::stats::{self, FiveNumberMean};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PlaySide {
    Offense,
    Defense,
}

impl PlaySide {
    pub fn name(self) -> &'static str {
        match self {
            PlaySide::Offense => "offense",
            PlaySide::Defense => "defense",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct PlayLabel {
    pub t_ms: u64,
    pub label: PlaySide,
}

/// A maximal debounced run of one label. Intervals tile the labeled span:
/// each interval ends where the next one starts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct PlayInterval {
    pub start_ms: u64,
    pub end_ms: u64,
    pub label: PlaySide,
}

impl PlayInterval {
    pub fn duration_ms(&self) -> u64 {
        self.end_ms - self.start_ms
    }

    pub fn contains(&self, t_ms: u64) -> bool {
        self.start_ms <= t_ms && t_ms < self.end_ms
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpacingMetric {
    MeanDistance,
    HullArea,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpacingSummary {
    pub label: PlaySide,
    pub metric: SpacingMetric,
    pub n_frames: usize,
    #[serde(flatten)]
    pub stats: FiveNumberMean,
}

#[derive(Debug, Error, PartialEq)]
pub enum SegmentationError {
    #[error("no attack direction for t = {t_ms} ms (period {period:?})")]
    MissingPeriod { t_ms: u64, period: Option<u32> },
    #[error("frames and labels misaligned at index {index}")]
    Misaligned { index: usize },
    #[error("frame at t = {t_ms} ms has no players")]
    EmptyFrame { t_ms: u64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Labels a frame Offense when the team centroid lies strictly inside the half
/// the team attacks in that frame's period. A centroid on the half line is
/// Defense.
pub fn label_frames<F>(frames: &[Frame], court: &CourtSpec, period_of: F) -> Result<Vec<PlayLabel>, SegmentationError>
where
    F: Fn(u64) -> Option<u32>,
{
    let half = court.half_line_x();
    frames
        .iter()
        .map(|frame| {
            let period = period_of(frame.t_ms);
            let direction = period
                .and_then(|p| court.direction_for(p))
                .ok_or(SegmentationError::MissingPeriod { t_ms: frame.t_ms, period })?;
            let centroid = frame.centroid().ok_or(SegmentationError::EmptyFrame { t_ms: frame.t_ms })?;
            let attacking = match direction {
                AttackDirection::TowardPositiveX => centroid.x > half,
                AttackDirection::TowardNegativeX => centroid.x < half,
            };
            Ok(PlayLabel {
                t_ms: frame.t_ms,
                label: if attacking { PlaySide::Offense } else { PlaySide::Defense },
            })
        })
        .collect()
}

/// Collapses labels into play intervals. Runs shorter than `min_duration_ms`
/// are absorbed by the preceding interval (a short leading run is absorbed
/// by the following one), then equal neighbours are coalesced.
pub fn segment_plays(labels: &[PlayLabel], min_duration_ms: u64) -> Vec<PlayInterval> {
    let mut runs: Vec<PlayInterval> = Vec::new();
    for (i, l) in labels.iter().enumerate() {
        let end = labels.get(i + 1).map_or(l.t_ms, |next| next.t_ms);
        match runs.last_mut() {
            Some(run) if run.label == l.label => run.end_ms = end,
            _ => runs.push(PlayInterval {
                start_ms: l.t_ms,
                end_ms: end,
                label: l.label,
            }),
        }
    }

    let mut out: Vec<PlayInterval> = Vec::with_capacity(runs.len());
    for run in runs {
        let n_out = out.len();
        match out.last_mut() {
            None => out.push(run),
            Some(last) if last.label == run.label || run.duration_ms() < min_duration_ms => {
                last.end_ms = run.end_ms;
            }
            Some(last) if n_out == 1 && last.duration_ms() < min_duration_ms => {
                *last = PlayInterval {
                    start_ms: last.start_ms,
                    ..run
                };
            }
            Some(_) => out.push(run),
        }
    }
    out
}

/// Metric value for each frame, in frame order.
pub fn metric_values(frames: &[Frame], metric: SpacingMetric) -> Result<Vec<f64>, SegmentationError> {
    frames
        .iter()
        .map(|f| match metric {
            SpacingMetric::MeanDistance => Ok(geometry::mean_distance(&geometry::pairwise_distances(f)?)?),
            SpacingMetric::HullArea => Ok(geometry::hull_metrics(f).area_m2),
        })
        .collect()
}

/// Order statistics of `metric` for each label that occurs, Offense first.
pub fn spacing_summary(
    frames: &[Frame],
    labels: &[PlayLabel],
    metric: SpacingMetric,
) -> Result<Vec<SpacingSummary>, SegmentationError> {
    if frames.len() != labels.len() {
        return Err(SegmentationError::Misaligned {
            index: frames.len().min(labels.len()),
        });
    }
    if let Some(index) = frames.iter().zip(labels).position(|(f, l)| f.t_ms != l.t_ms) {
        return Err(SegmentationError::Misaligned { index });
    }
    let values = metric_values(frames, metric)?;
    let mut out = Vec::new();
    for side in [PlaySide::Offense, PlaySide::Defense] {
        let subset: Vec<f64> = values
            .iter()
            .zip(labels)
            .filter(|(_, l)| l.label == side)
            .map(|(v, _)| *v)
            .collect();
        if let Some(stats) = stats::describe(&subset) {
            out.push(SpacingSummary {
                label: side,
                metric,
                n_frames: subset.len(),
                stats,
            });
        }
    }
    Ok(out)
}
