//! Python bindings. Built as the `court_trace` extension module.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use court_trace::config::RunConfig;
use court_trace::embedding::{canonicalize_layout, classical_mds as mds, AvgDistanceMatrix};
use court_trace::exporter::report_markdown;
use court_trace::geometry;
use court_trace::ingest::{self, ColumnNames, SensorLogFormat, SensorSample, TrackPoint, Trajectory};
use court_trace::kinematics::{self, KalmanParams};
use court_trace::phases::{self, FeatureMatrix, KMeansOptions, DEFAULT_MIN_GAIN};
use court_trace::pipeline;
use court_trace::synthetic::{self, MatchConfig};
use court_trace::{Point, TagId};

type Sample = (String, u64, f64, f64);

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_samples(rows: Vec<Sample>) -> Vec<SensorSample> {
    rows.into_iter()
        .map(|(tag, t, x, y)| SensorSample {
            tag_id: TagId::new(tag),
            timestamp_ms: t,
            x,
            y,
        })
        .collect()
}

fn from_samples(samples: &[SensorSample]) -> Vec<Sample> {
    samples
        .iter()
        .map(|s| (s.tag_id.to_string(), s.timestamp_ms, s.x, s.y))
        .collect()
}

fn points(pts: &[(f64, f64)]) -> Vec<Point> {
    pts.iter().map(|&(x, y)| Point::new(x, y)).collect()
}

/// Reads a sensor log CSV into `(tag, t_ms, x, y)` tuples.
#[pyfunction]
#[pyo3(signature = (path, tag="tagid", timestamp="timestamp_ms", x="klm_x", y="klm_y"))]
fn read_sensor_log(path: PathBuf, tag: &str, timestamp: &str, x: &str, y: &str) -> PyResult<Vec<Sample>> {
    let columns = ColumnNames {
        tag: tag.into(),
        timestamp: timestamp.into(),
        x: x.into(),
        y: y.into(),
    };
    let file = std::fs::File::open(&path).map_err(|e| value_err(format!("{}: {e}", path.display())))?;
    let samples = ingest::parse_sensor_log(std::io::BufReader::new(file), SensorLogFormat::Csv, &columns)
        .map_err(value_err)?;
    Ok(from_samples(&samples))
}

#[pyclass(frozen, get_all, module = "court_trace")]
struct StreamStats {
    total_samples: usize,
    span_ms: u64,
    mean_interval_ms: Option<f64>,
    observed_rate_hz: Option<f64>,
    /// tag -> (count, mean interval in ms)
    per_player: BTreeMap<String, (usize, Option<f64>)>,
}

#[pymethods]
impl StreamStats {
    fn __repr__(&self) -> String {
        format!(
            "StreamStats(total_samples={}, players={}, observed_rate_hz={:?})",
            self.total_samples,
            self.per_player.len(),
            self.observed_rate_hz
        )
    }
}

#[pyfunction]
fn stream_stats(samples: Vec<Sample>) -> StreamStats {
    let s = ingest::stream_stats(&ingest::build_trajectories(&to_samples(samples)));
    StreamStats {
        total_samples: s.total_samples,
        span_ms: s.span_ms,
        mean_interval_ms: s.mean_interval_ms,
        observed_rate_hz: s.observed_rate_hz,
        per_player: s
            .per_player
            .into_iter()
            .map(|(t, p)| (t.to_string(), (p.count, p.mean_interval_ms)))
            .collect(),
    }
}

/// Convex hull, counter-clockwise from the lowest-x vertex.
#[pyfunction]
fn convex_hull(points_xy: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    geometry::convex_hull(&points(&points_xy))
        .into_iter()
        .map(|p| (p.x, p.y))
        .collect()
}

#[pyfunction]
fn polygon_area(vertices: Vec<(f64, f64)>) -> f64 {
    geometry::polygon_area(&points(&vertices))
}

/// Constant-velocity Kalman filter over `(t_ms, x, y)` measurements. Returns
/// `(t_ms, x, y, vx, vy)` per input sample.
#[pyfunction]
#[pyo3(signature = (track, process_noise_accel=4.0, measurement_noise=0.09, initial_position_var=1.0, initial_velocity_var=4.0))]
fn kalman_filter(
    track: Vec<(u64, f64, f64)>,
    process_noise_accel: f64,
    measurement_noise: f64,
    initial_position_var: f64,
    initial_velocity_var: f64,
) -> PyResult<Vec<(u64, f64, f64, f64, f64)>> {
    let traj = Trajectory {
        tag_id: TagId::new("0"),
        samples: track.into_iter().map(|(t_ms, x, y)| TrackPoint { t_ms, x, y }).collect(),
    };
    let params = KalmanParams {
        process_noise_accel,
        measurement_noise,
        initial_position_var,
        initial_velocity_var,
    };
    let est = kinematics::kalman_filter(&traj, &params).map_err(value_err)?;
    Ok(est
        .into_iter()
        .map(|e| (e.t_ms, e.position.0, e.position.1, e.velocity.0, e.velocity.1))
        .collect())
}

#[pyclass(frozen, get_all, module = "court_trace")]
struct PhaseModel {
    k: usize,
    seed: u64,
    centroids: Vec<Vec<f64>>,
    sizes: Vec<usize>,
    /// 1-based cluster of each row; cluster 1 is the largest.
    labels: Vec<usize>,
    total_deviance: f64,
    within_deviance: f64,
    between_deviance: f64,
    bd_td: f64,
    iterations: usize,
    objective_history: Vec<f64>,
}

#[pymethods]
impl PhaseModel {
    fn __repr__(&self) -> String {
        format!("PhaseModel(k={}, sizes={:?}, bd_td={:.6})", self.k, self.sizes, self.bd_td)
    }
}

impl From<phases::PhaseModel> for PhaseModel {
    fn from(m: phases::PhaseModel) -> Self {
        PhaseModel {
            labels: m.cluster_ids(),
            k: m.k,
            seed: m.seed,
            centroids: m.centroids,
            sizes: m.sizes,
            total_deviance: m.total_deviance,
            within_deviance: m.within_deviance,
            between_deviance: m.between_deviance,
            bd_td: m.bd_td,
            iterations: m.iterations,
            objective_history: m.objective_history,
        }
    }
}

/// Seeded k-means (k-means++ seeding, Lloyd iterations, best of restarts).
#[pyfunction]
#[pyo3(signature = (rows, k, seed=42, n_restarts=10, max_iter=300))]
fn kmeans(rows: Vec<Vec<f64>>, k: usize, seed: u64, n_restarts: usize, max_iter: usize) -> PyResult<PhaseModel> {
    let opts = KMeansOptions {
        seed,
        max_iter,
        n_restarts,
    };
    phases::kmeans(&FeatureMatrix::from_rows(rows), k, &opts)
        .map(PhaseModel::from)
        .map_err(value_err)
}

#[pyfunction]
#[pyo3(signature = (curve, min_gain=DEFAULT_MIN_GAIN))]
fn select_k(curve: Vec<(usize, f64)>, min_gain: f64) -> Option<usize> {
    phases::select_k(&curve, min_gain)
}

/// Classical MDS of a distance matrix into the plane, in canonical
/// orientation. Returns `(coords, eigenvalues, stress)`.
#[pyfunction]
#[pyo3(signature = (matrix, labels=None))]
#[allow(clippy::type_complexity)]
fn classical_mds(matrix: Vec<Vec<f64>>, labels: Option<Vec<String>>) -> PyResult<(Vec<(f64, f64)>, Vec<f64>, f64)> {
    let n = matrix.len();
    let labels = labels.unwrap_or_else(|| (1..=n).map(|i| i.to_string()).collect());
    let d = AvgDistanceMatrix {
        cluster_id: 1,
        labels: labels.into_iter().map(TagId::new).collect(),
        d: matrix,
    };
    let layout = mds(&d).map_err(value_err)?;
    let layout = canonicalize_layout(&layout);
    Ok((layout.coords, layout.eigvals, layout.stress))
}

/// Seeded synthetic match as `(tag, t_ms, x, y)` samples.
#[pyfunction]
#[pyo3(signature = (seed=2016, duration_s=600))]
fn generate_match(seed: u64, duration_s: u64) -> Vec<Sample> {
    let m = synthetic::generate_match(&MatchConfig {
        seed,
        duration_ms: duration_s * 1000,
        ..MatchConfig::default()
    });
    from_samples(&m.samples)
}

#[pyclass(frozen, get_all, module = "court_trace")]
struct Analysis {
    n_frames: usize,
    n_intervals: usize,
    curve: Vec<(usize, f64)>,
    selected_k: usize,
    /// `(cluster, n_frames, share %, offense %, defense %)`
    crosstab: Vec<(usize, usize, f64, f64, f64)>,
    /// `(side, metric) -> (min, q1, median, mean, q3, max)`
    summaries: BTreeMap<(String, String), (f64, f64, f64, f64, f64, f64)>,
    report: String,
}

#[pymethods]
impl Analysis {
    fn __repr__(&self) -> String {
        format!(
            "Analysis(n_frames={}, selected_k={}, n_intervals={})",
            self.n_frames, self.selected_k, self.n_intervals
        )
    }
}

/// Runs the full analysis on in-memory samples and returns its summary.
/// Writes the artifact set when `out_dir` is given.
#[pyfunction]
#[pyo3(signature = (samples, config=None, k=None, seed=None, skip_kalman=false, out_dir=None))]
fn analyze(
    samples: Vec<Sample>,
    config: Option<PathBuf>,
    k: Option<usize>,
    seed: Option<u64>,
    skip_kalman: bool,
    out_dir: Option<PathBuf>,
) -> PyResult<Analysis> {
    let mut cfg = match config {
        Some(p) => RunConfig::load(&p).map_err(value_err)?,
        None => RunConfig::default(),
    };
    if k.is_some() {
        cfg.phases.k = k;
    }
    if let Some(s) = seed {
        cfg.phases.seed = s;
    }
    cfg.kalman.skip |= skip_kalman;
    let run = || -> Result<Analysis, pipeline::PipelineError> {
        let prepared = pipeline::prepare(&cfg, &to_samples(samples), None)?;
        let a = pipeline::analyze_frames(&cfg, &prepared)?;
        if let Some(dir) = &out_dir {
            pipeline::write_atomic(dir, &pipeline::analyze_artifacts(&cfg, &prepared, &a)?)?;
        }
        Ok(Analysis {
            n_frames: prepared.frames.len(),
            n_intervals: a.intervals.len(),
            curve: a.phases.curve.clone(),
            selected_k: a.phases.selected_k,
            crosstab: a
                .crosstab
                .rows
                .iter()
                .map(|r| (r.cluster, r.n_frames, r.share_pct, r.offense_pct, r.defense_pct))
                .collect(),
            summaries: a
                .summaries
                .iter()
                .map(|s| {
                    let st = &s.stats;
                    (
                        (s.label.name().to_string(), format!("{:?}", s.metric)),
                        (st.min, st.q1, st.median, st.mean, st.q3, st.max),
                    )
                })
                .collect(),
            report: report_markdown(&a.report()),
        })
    };
    run().map_err(|e| match e.exit_code() {
        2 => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    })
}

#[pymodule]
#[pyo3(name = "court_trace")]
fn court_trace_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<StreamStats>()?;
    m.add_class::<PhaseModel>()?;
    m.add_class::<Analysis>()?;
    m.add_function(wrap_pyfunction!(read_sensor_log, m)?)?;
    m.add_function(wrap_pyfunction!(stream_stats, m)?)?;
    m.add_function(wrap_pyfunction!(convex_hull, m)?)?;
    m.add_function(wrap_pyfunction!(polygon_area, m)?)?;
    m.add_function(wrap_pyfunction!(kalman_filter, m)?)?;
    m.add_function(wrap_pyfunction!(kmeans, m)?)?;
    m.add_function(wrap_pyfunction!(select_k, m)?)?;
    m.add_function(wrap_pyfunction!(classical_mds, m)?)?;
    m.add_function(wrap_pyfunction!(generate_match, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    Ok(())
}
