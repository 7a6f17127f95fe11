//! File exports: spacing report (markdown), motion-chart frames (JSON),
//! hull snapshots and phase maps (SVG 1.1).
//!
//! Every writer is a pure function of its inputs: stable key order, fixed
//! decimal precision, no generation timestamps.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::PhaseLayout;
use crate::geometry::HullMetrics;
use crate::ingest::{CourtSpec, Frame, Point, TagId};
use crate::phases::PhaseCrosstab;
use crate::segmentation::{PlaySide, SpacingMetric, SpacingSummary};

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("nothing to export: no frames")]
    EmptyFrames,
    #[error("invalid motion frame file: {0}")]
    Parse(String),
    #[error("pixels_per_meter must be positive, got {0}")]
    InvalidScale(f64),
}

fn write_file(path: &Path, body: &str) -> Result<(), ExportError> {
    std::fs::write(path, body).map_err(|source| ExportError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Fixed three-decimal rendering. `{:.3}` rounds the exact binary value, with
/// exact ties going to even.
pub fn fmt3(v: f64) -> String {
    let s = format!("{v:.3}");
    if s == "-0.000" {
        "0.000".to_string()
    } else {
        s
    }
}

fn fmt2(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".to_string()
    } else {
        s
    }
}

const DEFAULT_PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderSpec {
    pub court: CourtSpec,
    pub pixels_per_meter: f64,
    pub show_hull: bool,
    pub show_ids: bool,
    pub palette: BTreeMap<TagId, String>,
}

impl Default for RenderSpec {
    fn default() -> Self {
        RenderSpec {
            court: CourtSpec::default(),
            pixels_per_meter: 20.0,
            show_hull: true,
            show_ids: true,
            palette: BTreeMap::new(),
        }
    }
}

impl RenderSpec {
    fn validate(&self) -> Result<(), ExportError> {
        if self.pixels_per_meter.is_finite() && self.pixels_per_meter > 0.0 {
            Ok(())
        } else {
            Err(ExportError::InvalidScale(self.pixels_per_meter))
        }
    }

    /// Explicit palette entry, else a default color by roster position.
    fn color(&self, tag: &TagId, index: usize) -> &str {
        self.palette
            .get(tag)
            .map_or(DEFAULT_PALETTE[index % DEFAULT_PALETTE.len()], String::as_str)
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

// ---------------------------------------------------------------------------
// motion frames

/// `[{"t_ms":…,"positions":{"<tag>":[x,y],…}},…]`, one frame per line,
/// coordinates with three decimals.
pub fn motion_frames_json(frames: &[Frame]) -> String {
    let mut out = String::from("[\n");
    for (i, f) in frames.iter().enumerate() {
        let _ = write!(out, "  {{\"t_ms\":{},\"positions\":{{", f.t_ms);
        for (j, (tag, p)) in f.positions.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            let key = serde_json::to_string(tag.as_str()).unwrap_or_default();
            let _ = write!(out, "{key}:[{},{}]", fmt3(p.x), fmt3(p.y));
        }
        out.push_str("}}");
        if i + 1 < frames.len() {
            out.push(',');
        }
        out.push('\n');
    }
    out.push_str("]\n");
    out
}

pub fn export_motion_frames(frames: &[Frame], path: &Path) -> Result<(), ExportError> {
    if frames.is_empty() {
        return Err(ExportError::EmptyFrames);
    }
    write_file(path, &motion_frames_json(frames))
}

#[derive(Deserialize)]
struct MotionFrame {
    t_ms: u64,
    positions: BTreeMap<String, [f64; 2]>,
}

/// Reads a motion frame file back into frames.
pub fn parse_motion_frames(text: &str) -> Result<Vec<Frame>, ExportError> {
    let raw: Vec<MotionFrame> = serde_json::from_str(text).map_err(|e| ExportError::Parse(e.to_string()))?;
    Ok(raw
        .into_iter()
        .map(|f| {
            Frame::new(
                f.t_ms,
                f.positions
                    .into_iter()
                    .map(|(tag, [x, y])| (TagId::new(tag), Point::new(x, y))),
            )
        })
        .collect())
}

// ---------------------------------------------------------------------------
// hull snapshots

struct CourtCanvas {
    ppm: f64,
    width_px: f64,
    height_px: f64,
    court_width_m: f64,
}

impl CourtCanvas {
    fn new(court: &CourtSpec, ppm: f64) -> Self {
        CourtCanvas {
            ppm,
            width_px: court.length_m * ppm,
            height_px: court.width_m * ppm,
            court_width_m: court.width_m,
        }
    }

    /// Court meters to pixels; y grows upward on court, downward in SVG.
    fn px(&self, p: Point) -> (String, String) {
        (fmt2(p.x * self.ppm), fmt2((self.court_width_m - p.y) * self.ppm))
    }

    fn points_attr(&self, pts: &[Point]) -> String {
        pts.iter()
            .map(|&p| {
                let (x, y) = self.px(p);
                format!("{x},{y}")
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Court rectangle, half line, center circle, the hull (polygon for three or
/// more vertices, polyline for two) and one marker per player.
pub fn hull_svg(frame: &Frame, hull: &HullMetrics, spec: &RenderSpec) -> Result<String, ExportError> {
    spec.validate()?;
    let court = &spec.court;
    let canvas = CourtCanvas::new(court, spec.pixels_per_meter);
    let (w, h) = (fmt2(canvas.width_px), fmt2(canvas.height_px));
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(
        s,
        r##"  <rect class="court" x="0" y="0" width="{w}" height="{h}" fill="#f3e3c3" stroke="#333333" stroke-width="2"/>"##
    );
    let mid = fmt2(court.half_line_x() * canvas.ppm);
    let _ = writeln!(
        s,
        r##"  <line class="midline" x1="{mid}" y1="0" x2="{mid}" y2="{h}" stroke="#333333" stroke-width="1.5"/>"##
    );
    let (cx, cy) = canvas.px(Point::new(court.half_line_x(), court.width_m / 2.0));
    let _ = writeln!(
        s,
        r##"  <circle class="center-circle" cx="{cx}" cy="{cy}" r="{}" fill="none" stroke="#333333" stroke-width="1.5"/>"##,
        fmt2(1.8 * canvas.ppm)
    );

    if spec.show_hull {
        match hull.hull_vertices.len() {
            0 | 1 => {}
            2 => {
                let _ = writeln!(
                    s,
                    r##"  <polyline class="hull" points="{}" fill="none" stroke="#1f3b73" stroke-width="2"/>"##,
                    canvas.points_attr(&hull.hull_vertices)
                );
            }
            _ => {
                let _ = writeln!(
                    s,
                    r##"  <polygon class="hull" points="{}" fill="#1f3b73" fill-opacity="0.25" stroke="#1f3b73" stroke-width="2"/>"##,
                    canvas.points_attr(&hull.hull_vertices)
                );
            }
        }
    }

    let r = fmt2((0.35 * canvas.ppm).max(3.0));
    for (i, (tag, p)) in frame.positions.iter().enumerate() {
        let (x, y) = canvas.px(*p);
        let _ = writeln!(
            s,
            r##"  <circle class="player" cx="{x}" cy="{y}" r="{r}" fill="{}" stroke="#000000" stroke-width="1"/>"##,
            spec.color(tag, i)
        );
        if spec.show_ids {
            let (tx, ty) = canvas.px(Point::new(p.x + 0.45, p.y + 0.45));
            let _ = writeln!(
                s,
                r#"  <text class="tag" x="{tx}" y="{ty}" font-family="sans-serif" font-size="12">{}</text>"#,
                xml_escape(tag.as_str())
            );
        }
    }
    let _ = writeln!(
        s,
        r#"  <text class="caption" x="6" y="16" font-family="sans-serif" font-size="13">t = {} s, hull area = {} m²</text>"#,
        fmt3(frame.t_ms as f64 / 1000.0),
        fmt3(hull.area_m2)
    );
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn render_hull_svg(frame: &Frame, hull: &HullMetrics, spec: &RenderSpec, path: &Path) -> Result<(), ExportError> {
    write_file(path, &hull_svg(frame, hull, spec)?)
}

// ---------------------------------------------------------------------------
// phase maps

const MDS_COLUMNS: usize = 4;

/// One square panel per cluster, titled `C<i> (<share>%)`, all panels on a
/// common scale.
pub fn mds_svg(layouts: &[PhaseLayout], shares: &PhaseCrosstab, spec: &RenderSpec) -> Result<String, ExportError> {
    spec.validate()?;
    let ppm = spec.pixels_per_meter;
    let extent = layouts
        .iter()
        .flat_map(|l| l.coords.iter())
        .fold(0.0f64, |m, &(u, v)| m.max(u.abs()).max(v.abs()));
    let half_m = extent + 1.0;
    let plot = 2.0 * half_m * ppm;
    let title_h = 24.0;
    let panel_w = plot + 20.0;
    let panel_h = plot + title_h + 10.0;
    let cols = layouts.len().clamp(1, MDS_COLUMNS);
    let rows = layouts.len().div_ceil(MDS_COLUMNS).max(1);
    let (w, h) = (fmt2(panel_w * cols as f64), fmt2(panel_h * rows as f64));

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    for (idx, layout) in layouts.iter().enumerate() {
        let ox = (idx % MDS_COLUMNS) as f64 * panel_w + 10.0;
        let oy = (idx / MDS_COLUMNS) as f64 * panel_h;
        let share = shares
            .share_of(layout.cluster_id)
            .map_or_else(|| "n/a".to_string(), |v| format!("{}%", fmt2(v)));
        let _ = writeln!(s, r#"  <g class="panel" id="C{}">"#, layout.cluster_id);
        let _ = writeln!(
            s,
            r#"    <text class="title" x="{}" y="{}" font-family="sans-serif" font-size="14" text-anchor="middle">C{} ({share})</text>"#,
            fmt2(ox + plot / 2.0),
            fmt2(oy + 17.0),
            layout.cluster_id
        );
        let top = oy + title_h;
        let _ = writeln!(
            s,
            r##"    <rect class="frame" x="{}" y="{}" width="{}" height="{}" fill="#fafafa" stroke="#999999" stroke-width="1"/>"##,
            fmt2(ox),
            fmt2(top),
            fmt2(plot),
            fmt2(plot)
        );
        let (cx, cy) = (ox + plot / 2.0, top + plot / 2.0);
        let _ = writeln!(
            s,
            r##"    <line class="axis" x1="{}" y1="{}" x2="{}" y2="{}" stroke="#dddddd" stroke-width="1"/>"##,
            fmt2(ox),
            fmt2(cy),
            fmt2(ox + plot),
            fmt2(cy)
        );
        let _ = writeln!(
            s,
            r##"    <line class="axis" x1="{}" y1="{}" x2="{}" y2="{}" stroke="#dddddd" stroke-width="1"/>"##,
            fmt2(cx),
            fmt2(top),
            fmt2(cx),
            fmt2(top + plot)
        );
        for (i, (tag, &(u, v))) in layout.labels.iter().zip(&layout.coords).enumerate() {
            let (px, py) = (cx + u * ppm, cy - v * ppm);
            let _ = writeln!(
                s,
                r##"    <circle class="player" cx="{}" cy="{}" r="5" fill="{}" stroke="#000000" stroke-width="1"/>"##,
                fmt2(px),
                fmt2(py),
                spec.color(tag, i)
            );
            if spec.show_ids {
                let _ = writeln!(
                    s,
                    r#"    <text class="tag" x="{}" y="{}" font-family="sans-serif" font-size="11">{}</text>"#,
                    fmt2(px + 7.0),
                    fmt2(py - 7.0),
                    xml_escape(tag.as_str())
                );
            }
        }
        s.push_str("  </g>\n");
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn render_mds_svg(
    layouts: &[PhaseLayout],
    shares: &PhaseCrosstab,
    spec: &RenderSpec,
    path: &Path,
) -> Result<(), ExportError> {
    write_file(path, &mds_svg(layouts, shares, spec)?)
}

// ---------------------------------------------------------------------------
// report

/// Inputs of the markdown report.
#[derive(Clone, Debug, Default)]
pub struct Report {
    pub summaries: Vec<SpacingSummary>,
    pub curve: Vec<(usize, f64)>,
    pub selected_k: Option<usize>,
    pub crosstab: Option<PhaseCrosstab>,
}

pub const SUMMARY_ROWS: [&str; 6] = ["Min", "1st Qu.", "Median", "Mean", "3rd Qu.", "Max"];

pub fn report_markdown(report: &Report) -> String {
    let mut s = String::from("# Spacing report\n\n");
    s.push_str("## Average distances (m) and convex hull areas (m²)\n\n");
    let columns = [
        (SpacingMetric::MeanDistance, PlaySide::Offense),
        (SpacingMetric::MeanDistance, PlaySide::Defense),
        (SpacingMetric::HullArea, PlaySide::Offense),
        (SpacingMetric::HullArea, PlaySide::Defense),
    ];
    let find = |metric, side| {
        report
            .summaries
            .iter()
            .find(|x| x.metric == metric && x.label == side)
    };
    s.push_str("| | Avg. distance attack | Avg. distance defence | Hull area attack | Hull area defence |\n");
    s.push_str("|:--|--:|--:|--:|--:|\n");
    for (row, name) in SUMMARY_ROWS.iter().enumerate() {
        let _ = write!(s, "| {name} |");
        for &(metric, side) in &columns {
            let cell = find(metric, side).map_or_else(
                || "-".to_string(),
                |x| {
                    let st = &x.stats;
                    fmt3([st.min, st.q1, st.median, st.mean, st.q3, st.max][row])
                },
            );
            let _ = write!(s, " {cell} |");
        }
        s.push('\n');
    }
    let count = |side| find(SpacingMetric::MeanDistance, side).map_or(0, |x| x.n_frames);
    let _ = writeln!(
        s,
        "\nFrames: attack {}, defence {}.\n",
        count(PlaySide::Offense),
        count(PlaySide::Defense)
    );

    s.push_str("## BD/TD ratio by number of clusters\n\n");
    if report.curve.is_empty() {
        s.push_str("_No BD/TD curve computed._\n\n");
    } else {
        s.push_str("| k | BD/TD |\n|--:|--:|\n");
        for &(k, r) in &report.curve {
            let _ = writeln!(s, "| {k} | {} |", fmt3(r));
        }
        s.push('\n');
    }
    if let Some(k) = report.selected_k {
        let _ = writeln!(s, "Selected k = {k}.\n");
    }

    s.push_str("## Cluster composition\n\n");
    match &report.crosstab {
        Some(ct) if !ct.rows.is_empty() => {
            s.push_str("| Cluster | Frames | Share (%) | Offense (%) | Defense (%) |\n|:--|--:|--:|--:|--:|\n");
            for r in &ct.rows {
                let _ = writeln!(
                    s,
                    "| C{} | {} | {} | {} | {} |",
                    r.cluster,
                    r.n_frames,
                    fmt2(r.share_pct),
                    fmt2(r.offense_pct),
                    fmt2(r.defense_pct)
                );
            }
        }
        _ => s.push_str("_No cluster crosstab available._\n"),
    }
    s
}

pub fn write_report(report: &Report, path: &Path) -> Result<(), ExportError> {
    write_file(path, &report_markdown(report))
}
