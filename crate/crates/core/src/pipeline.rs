//! End-to-end wiring used by the command-line front end and the Python
//! bindings: ingest, filter, resample, segment, cluster, embed, export.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::embedding::{canonicalize_layout, classical_mds, matrix_from_pairs, EmbeddingError, PhaseLayout};
use crate::events::{join_events, parse_events, period_map, EventError, EventFormat, GameEvent, PeriodMap};
use crate::exporter::{
    fmt3, hull_svg, motion_frames_json, mds_svg, report_markdown, ExportError, Report,
};
use crate::geometry::{hull_metrics, hull_series};
use crate::ingest::{
    build_trajectories, default_roster, parse_sensor_log, resample_to_grid, stream_stats, Frame, IngestError,
    SensorLogFormat, SensorSample, StreamStats, TagId, Trajectory,
};
use crate::kinematics::{smooth_trajectories, KinematicsError};
use crate::phases::{build_features, crosstab, kmeans, select_k, FeatureMatrix, PhaseCrosstab, PhaseError, PhaseModel};
use crate::segmentation::{
    label_frames, segment_plays, spacing_summary, PlayInterval, PlayLabel, PlaySide, SegmentationError,
    SpacingMetric, SpacingSummary,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("[config] {0}")]
    Config(#[from] ConfigError),
    #[error("[ingest] {0}")]
    Ingest(#[from] IngestError),
    #[error("[kinematics] {0}")]
    Kinematics(#[from] KinematicsError),
    #[error("[events] {0}")]
    Events(#[from] EventError),
    #[error("[segmentation] {0}")]
    Segmentation(#[from] SegmentationError),
    #[error("[phases] {0}")]
    Phases(#[from] PhaseError),
    #[error("[embedding] {0}")]
    Embedding(#[from] EmbeddingError),
    #[error("[export] {0}")]
    Export(#[from] ExportError),
}

impl PipelineError {
    /// 2 for bad input or configuration, 3 for numeric failures, 1 when
    /// output cannot be written.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) | PipelineError::Ingest(_) | PipelineError::Events(_) => 2,
            PipelineError::Kinematics(KinematicsError::InvalidParams(_)) => 2,
            PipelineError::Kinematics(_) => 3,
            PipelineError::Segmentation(SegmentationError::MissingPeriod { .. }) => 2,
            PipelineError::Segmentation(_) => 3,
            PipelineError::Phases(PhaseError::ZeroClusters | PhaseError::TooManyClusters { .. }) => 2,
            PipelineError::Phases(_) | PipelineError::Embedding(_) => 3,
            PipelineError::Export(ExportError::Io { .. }) => 1,
            PipelineError::Export(_) => 2,
        }
    }
}

type Result<T> = std::result::Result<T, PipelineError>;

fn input_io(path: &Path, e: std::io::Error) -> PipelineError {
    PipelineError::Ingest(IngestError::Io(std::io::Error::new(
        e.kind(),
        format!("{}: {e}", path.display()),
    )))
}

fn output_io(path: &Path, source: std::io::Error) -> PipelineError {
    PipelineError::Export(ExportError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn sensor_log_path(cfg: &RunConfig) -> Result<&Path> {
    cfg.input
        .sensor_log
        .as_deref()
        .ok_or_else(|| ConfigError::Invalid("no sensor log given".into()).into())
}

pub fn load_samples(cfg: &RunConfig) -> Result<Vec<SensorSample>> {
    let path = sensor_log_path(cfg)?;
    let file = File::open(path).map_err(|e| input_io(path, e))?;
    Ok(parse_sensor_log(BufReader::new(file), SensorLogFormat::Csv, &cfg.input.columns)?)
}

/// Events from the configured file, if any. A `.json` extension selects the
/// JSON schema, anything else CSV.
pub fn load_events(cfg: &RunConfig) -> Result<Option<Vec<GameEvent>>> {
    let Some(path) = cfg.input.events.as_deref() else {
        return Ok(None);
    };
    let format = match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("json") => EventFormat::Json,
        _ => EventFormat::Csv,
    };
    let file = File::open(path).map_err(|e| input_io(path, e))?;
    Ok(Some(parse_events(BufReader::new(file), format)?))
}

/// Frames and metadata shared by every downstream command.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub stats: StreamStats,
    pub roster: Vec<TagId>,
    pub frames: Vec<Frame>,
    pub events: Option<Vec<GameEvent>>,
    pub periods: PeriodMap,
}

pub fn prepare(cfg: &RunConfig, samples: &[SensorSample], events: Option<Vec<GameEvent>>) -> Result<Prepared> {
    cfg.validate()?;
    let trajectories = build_trajectories(samples);
    let stats = stream_stats(&trajectories);
    let roster = match &cfg.roster.tags {
        Some(tags) => tags.clone(),
        None => default_roster(&trajectories, cfg.roster.size),
    };
    let mut selected: BTreeMap<TagId, Trajectory> = BTreeMap::new();
    for tag in &roster {
        let traj = trajectories
            .get(tag)
            .ok_or_else(|| IngestError::UnknownTag(tag.clone()))?;
        selected.insert(tag.clone(), traj.clone());
    }
    if !cfg.kalman.skip {
        selected = smooth_trajectories(&selected, &cfg.kalman.params)?;
    }
    let frames = resample_to_grid(&selected, &cfg.grid, &roster)?;
    if frames.is_empty() {
        return Err(IngestError::EmptyInput.into());
    }
    let periods = match &events {
        Some(ev) => period_map(ev)?,
        None => PeriodMap::single(),
    };
    Ok(Prepared {
        stats,
        roster,
        frames,
        events,
        periods,
    })
}

pub fn load_and_prepare(cfg: &RunConfig) -> Result<Prepared> {
    let samples = load_samples(cfg)?;
    let events = load_events(cfg)?;
    prepare(cfg, &samples, events)
}

/// Phase selection results: the curve over the k range and the chosen model.
#[derive(Clone, Debug, Serialize)]
pub struct PhaseRun {
    pub columns: Vec<(TagId, TagId)>,
    pub curve: Vec<(usize, f64)>,
    pub selected_k: usize,
    pub model: PhaseModel,
}

/// Runs k-means across the configured range (or the forced k) and keeps the
/// model for the selected k. The range's upper end is clamped to the row
/// count.
pub fn run_phases(cfg: &RunConfig, features: &FeatureMatrix) -> Result<PhaseRun> {
    let opts = cfg.phases.kmeans_options();
    let (curve, selected_k, model) = match cfg.phases.k {
        Some(k) => {
            let model = kmeans(features, k, &opts)?;
            (vec![(k, model.bd_td)], k, model)
        }
        None => {
            let rows = features.n_rows();
            if cfg.phases.k_min > rows {
                return Err(PhaseError::TooManyClusters {
                    k: cfg.phases.k_min,
                    rows,
                }
                .into());
            }
            let mut models = Vec::new();
            for k in cfg.phases.k_min..=cfg.phases.k_max.min(rows) {
                models.push(kmeans(features, k, &opts)?);
            }
            let curve: Vec<(usize, f64)> = models.iter().map(|m| (m.k, m.bd_td)).collect();
            let k = select_k(&curve, cfg.phases.min_gain).unwrap_or(cfg.phases.k_min);
            let model = models.into_iter().find(|m| m.k == k).expect("selected k is on the curve");
            (curve, k, model)
        }
    };
    Ok(PhaseRun {
        columns: features.columns.clone(),
        curve,
        selected_k,
        model,
    })
}

/// Canonical 2-D layouts of every cluster centroid.
pub fn phase_layouts(run: &PhaseRun) -> Result<Vec<PhaseLayout>> {
    run.model
        .centroids
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let d = matrix_from_pairs(i + 1, &run.columns, c);
            Ok(canonicalize_layout(&classical_mds(&d)?))
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct Analysis {
    pub labels: Vec<PlayLabel>,
    pub intervals: Vec<PlayInterval>,
    pub summaries: Vec<SpacingSummary>,
    pub phases: PhaseRun,
    pub crosstab: PhaseCrosstab,
    pub layouts: Vec<PhaseLayout>,
}

impl Analysis {
    pub fn report(&self) -> Report {
        Report {
            summaries: self.summaries.clone(),
            curve: self.phases.curve.clone(),
            selected_k: Some(self.phases.selected_k),
            crosstab: Some(self.crosstab.clone()),
        }
    }
}

pub fn label_prepared(cfg: &RunConfig, prepared: &Prepared) -> Result<Vec<PlayLabel>> {
    let periods = &prepared.periods;
    Ok(label_frames(&prepared.frames, &cfg.court, |t| Some(periods.period_of(t)))?)
}

/// Everything `analyze` computes, without touching the file system.
pub fn analyze_frames(cfg: &RunConfig, prepared: &Prepared) -> Result<Analysis> {
    let frames = &prepared.frames;
    let labels = label_prepared(cfg, prepared)?;
    let intervals = segment_plays(&labels, cfg.segmentation.min_play_ms);
    let mut summaries = spacing_summary(frames, &labels, SpacingMetric::MeanDistance)?;
    summaries.extend(spacing_summary(frames, &labels, SpacingMetric::HullArea)?);
    let features = build_features(frames)?;
    let phases = run_phases(cfg, &features)?;
    let crosstab = crosstab(&phases.model, &labels)?;
    let layouts = phase_layouts(&phases)?;
    Ok(Analysis {
        labels,
        intervals,
        summaries,
        phases,
        crosstab,
        layouts,
    })
}

/// Up to `n` evenly spaced frames of the first interval with the given label.
pub fn interval_snapshots<'a>(
    frames: &'a [Frame],
    intervals: &[PlayInterval],
    side: PlaySide,
    n: usize,
) -> Vec<&'a Frame> {
    let Some(iv) = intervals.iter().find(|iv| iv.label == side) else {
        return Vec::new();
    };
    // the final interval is closed on the right
    let closed = intervals.last() == Some(iv);
    let inside: Vec<&Frame> = frames
        .iter()
        .filter(|f| iv.contains(f.t_ms) || (closed && f.t_ms == iv.end_ms))
        .collect();
    if inside.len() <= n {
        return inside;
    }
    let mut picked: Vec<usize> = (0..n).map(|j| j * (inside.len() - 1) / (n - 1).max(1)).collect();
    picked.dedup();
    picked.into_iter().map(|i| inside[i]).collect()
}

pub const SNAPSHOTS_PER_PLAY: usize = 4;

/// Output path relative to the output directory, and file body.
pub type Artifact = (PathBuf, String);

fn hull_snapshot_artifacts(cfg: &RunConfig, frames: &[Frame], intervals: &[PlayInterval]) -> Result<Vec<Artifact>> {
    let spec = cfg.render_spec();
    let mut out = Vec::new();
    for side in [PlaySide::Offense, PlaySide::Defense] {
        for (i, frame) in interval_snapshots(frames, intervals, side, SNAPSHOTS_PER_PLAY)
            .into_iter()
            .enumerate()
        {
            let svg = hull_svg(frame, &hull_metrics(frame), &spec)?;
            out.push((PathBuf::from(format!("hulls/{}_{}.svg", side.name(), i + 1)), svg));
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct PhaseModelFile<'a> {
    columns: &'a [(TagId, TagId)],
    selected_k: usize,
    curve: &'a [(usize, f64)],
    model: &'a PhaseModel,
    layouts: &'a [PhaseLayout],
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn phase_model_json(run: &PhaseRun, layouts: &[PhaseLayout]) -> String {
    to_json(&PhaseModelFile {
        columns: &run.columns,
        selected_k: run.selected_k,
        curve: &run.curve,
        model: &run.model,
        layouts,
    })
}

/// Writes every artifact into a sibling temp directory first, so a failed
/// run leaves no partial output. A new output directory is renamed into place
/// whole; an existing one receives each file by rename and keeps unrelated
/// files.
pub fn write_atomic(out_dir: &Path, artifacts: &[Artifact]) -> Result<()> {
    let name = out_dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    let parent = out_dir.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(parent).map_err(|e| output_io(parent, e))?;
    let tmp = parent.join(format!(".{name}.tmp-{}", std::process::id()));
    if tmp.exists() {
        std::fs::remove_dir_all(&tmp).map_err(|e| output_io(&tmp, e))?;
    }
    let result = (|| {
        for (rel, body) in artifacts {
            let path = tmp.join(rel);
            if let Some(dir) = path.parent() {
                std::fs::create_dir_all(dir).map_err(|e| output_io(dir, e))?;
            }
            std::fs::write(&path, body).map_err(|e| output_io(&path, e))?;
        }
        if !out_dir.exists() {
            return std::fs::rename(&tmp, out_dir).map_err(|e| output_io(out_dir, e));
        }
        for (rel, _) in artifacts {
            let dest = out_dir.join(rel);
            if let Some(dir) = dest.parent() {
                std::fs::create_dir_all(dir).map_err(|e| output_io(dir, e))?;
            }
            std::fs::rename(tmp.join(rel), &dest).map_err(|e| output_io(&dest, e))?;
        }
        Ok(())
    })();
    if tmp.exists() {
        let _ = std::fs::remove_dir_all(&tmp);
    }
    result
}

/// Full artifact set for one run.
pub fn analyze_artifacts(cfg: &RunConfig, prepared: &Prepared, analysis: &Analysis) -> Result<Vec<Artifact>> {
    let spec = cfg.render_spec();
    let mut out = vec![
        (PathBuf::from("report.md"), report_markdown(&analysis.report())),
        (
            PathBuf::from("phase_model.json"),
            phase_model_json(&analysis.phases, &analysis.layouts),
        ),
        (PathBuf::from("mds.svg"), mds_svg(&analysis.layouts, &analysis.crosstab, &spec)?),
        (PathBuf::from("motion_frames.json"), motion_frames_json(&prepared.frames)),
        (PathBuf::from("config.toml"), cfg.to_toml_string()),
    ];
    out.extend(hull_snapshot_artifacts(cfg, &prepared.frames, &analysis.intervals)?);
    if let Some(events) = &prepared.events {
        let join = join_events(&prepared.frames, events, cfg.events.window_ms);
        out.push((PathBuf::from("unattached_events.json"), to_json(&join.unattached)));
    }
    Ok(out)
}

pub fn analyze(cfg: &RunConfig, out_dir: &Path) -> Result<Analysis> {
    let prepared = load_and_prepare(cfg)?;
    let analysis = analyze_frames(cfg, &prepared)?;
    write_atomic(out_dir, &analyze_artifacts(cfg, &prepared, &analysis)?)?;
    Ok(analysis)
}

pub fn summary_markdown(stats: &StreamStats) -> String {
    let opt = |v: Option<f64>| v.map(fmt3).unwrap_or_else(|| "n/a".into());
    let mut s = String::from("# Sensor stream summary\n\n");
    let _ = writeln!(s, "Total samples: {}", stats.total_samples);
    let _ = writeln!(s, "Players: {}", stats.per_player.len());
    let _ = writeln!(s, "Span: {} s", fmt3(stats.span_ms as f64 / 1000.0));
    let _ = writeln!(s, "Mean sampling interval: {} ms", opt(stats.mean_interval_ms));
    let _ = writeln!(s, "Overall rate: {} Hz\n", opt(stats.observed_rate_hz));
    s.push_str("| Tag | Samples | First (ms) | Last (ms) | Mean interval (ms) |\n");
    s.push_str("|---|---:|---:|---:|---:|\n");
    for (tag, p) in &stats.per_player {
        let _ = writeln!(
            s,
            "| {tag} | {} | {} | {} | {} |",
            p.count,
            p.first_ms,
            p.last_ms,
            opt(p.mean_interval_ms)
        );
    }
    s
}

pub fn summarize(cfg: &RunConfig) -> Result<StreamStats> {
    let samples = load_samples(cfg)?;
    Ok(stream_stats(&build_trajectories(&samples)))
}

pub fn curve_table(run: &PhaseRun) -> String {
    let mut s = String::from("k\tbd_td\n");
    for (k, v) in &run.curve {
        let _ = writeln!(s, "{k}\t{}", fmt3(*v));
    }
    let _ = writeln!(s, "selected k = {}", run.selected_k);
    s
}

/// Phase selection only; writes `phase_model.json`.
pub fn phases(cfg: &RunConfig, out_dir: &Path) -> Result<PhaseRun> {
    let prepared = load_and_prepare(cfg)?;
    let run = run_phases(cfg, &build_features(&prepared.frames)?)?;
    let layouts = phase_layouts(&run)?;
    write_atomic(
        out_dir,
        &[(PathBuf::from("phase_model.json"), phase_model_json(&run, &layouts))],
    )?;
    Ok(run)
}

pub fn hull_series_csv(frames: &[Frame]) -> String {
    let mut s = String::from("t_ms,n_vertices,area_m2,centroid_x,centroid_y\n");
    for h in hull_series(frames) {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            h.t_ms,
            h.hull_vertices.len(),
            fmt3(h.area_m2),
            fmt3(h.centroid.x),
            fmt3(h.centroid.y)
        );
    }
    s
}

/// Hull area series and snapshots of the first offense and defense plays.
pub fn hulls(cfg: &RunConfig, out_dir: &Path) -> Result<usize> {
    let prepared = load_and_prepare(cfg)?;
    let labels = label_prepared(cfg, &prepared)?;
    let intervals = segment_plays(&labels, cfg.segmentation.min_play_ms);
    let mut artifacts = vec![(PathBuf::from("hull_series.csv"), hull_series_csv(&prepared.frames))];
    artifacts.extend(hull_snapshot_artifacts(cfg, &prepared.frames, &intervals)?);
    write_atomic(out_dir, &artifacts)?;
    Ok(prepared.frames.len())
}

pub fn export_frames(cfg: &RunConfig, out_dir: &Path) -> Result<usize> {
    let prepared = load_and_prepare(cfg)?;
    write_atomic(
        out_dir,
        &[(PathBuf::from("motion_frames.json"), motion_frames_json(&prepared.frames))],
    )?;
    Ok(prepared.frames.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Point;

    fn frame(t: u64) -> Frame {
        Frame::new(t, [(TagId::from(1u32), Point::new(0.0, 0.0))])
    }

    #[test]
    fn snapshots_spread_over_interval() {
        let frames: Vec<Frame> = (0..10).map(|i| frame(i * 200)).collect();
        let intervals = vec![
            PlayInterval {
                start_ms: 0,
                end_ms: 1000,
                label: PlaySide::Defense,
            },
            PlayInterval {
                start_ms: 1000,
                end_ms: 1800,
                label: PlaySide::Offense,
            },
        ];
        let t: Vec<u64> = interval_snapshots(&frames, &intervals, PlaySide::Defense, 4)
            .iter()
            .map(|f| f.t_ms)
            .collect();
        assert_eq!(t, vec![0, 200, 400, 800]);
        let t: Vec<u64> = interval_snapshots(&frames, &intervals, PlaySide::Offense, 4)
            .iter()
            .map(|f| f.t_ms)
            .collect();
        assert_eq!(t, vec![1000, 1200, 1400, 1800]);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(PipelineError::from(IngestError::EmptyInput).exit_code(), 2);
        assert_eq!(PipelineError::from(EmbeddingError::EigenFailure { sweeps: 100 }).exit_code(), 3);
        assert_eq!(
            PipelineError::from(PhaseError::TooManyClusters { k: 9, rows: 3 }).exit_code(),
            2
        );
        assert_eq!(
            PipelineError::from(ExportError::Io {
                path: "x".into(),
                source: std::io::Error::other("disk full")
            })
            .exit_code(),
            1
        );
    }
}
