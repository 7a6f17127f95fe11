//! Fixtures shared by the golden and acceptance tests.

use std::path::PathBuf;

use court_trace::config::RunConfig;
use court_trace::exporter::{hull_svg, mds_svg, motion_frames_json, report_markdown, RenderSpec};
use court_trace::geometry::hull_metrics;
use court_trace::pipeline::{analyze_artifacts, analyze_frames, prepare, Prepared};
use court_trace::synthetic::{generate_match, MatchConfig};
use court_trace::{Frame, Point, TagId};

pub fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/goldens")
}

pub fn fixture_frame() -> Frame {
    Frame::new(
        12_400,
        [
            (1, 18.2, 3.1),
            (2, 25.0, 7.4),
            (3, 21.3, 12.6),
            (4, 16.9, 9.8),
            (5, 20.4, 7.7),
        ]
        .map(|(t, x, y)| (TagId::from(t as u32), Point::new(x, y))),
    )
}

pub fn short_match() -> (RunConfig, Prepared) {
    let m = generate_match(&MatchConfig {
        seed: 99,
        duration_ms: 90_000,
        ..MatchConfig::default()
    });
    let mut cfg = RunConfig::default();
    cfg.court = m.court.clone();
    cfg.phases.k_max = 6;
    cfg.phases.n_restarts = 4;
    let prepared = prepare(&cfg, &m.samples, Some(m.events)).unwrap();
    (cfg, prepared)
}

/// `(file name, body)` of every golden output.
pub fn golden_outputs() -> Vec<(&'static str, String)> {
    let f = fixture_frame();
    let (cfg, prepared) = short_match();
    let analysis = analyze_frames(&cfg, &prepared).unwrap();
    let model = analyze_artifacts(&cfg, &prepared, &analysis)
        .unwrap()
        .into_iter()
        .find(|(p, _)| p.ends_with("phase_model.json"))
        .map(|(_, body)| body)
        .unwrap();
    vec![
        ("hull_snapshot.svg", hull_svg(&f, &hull_metrics(&f), &RenderSpec::default()).unwrap()),
        ("report.md", report_markdown(&analysis.report())),
        (
            "mds.svg",
            mds_svg(&analysis.layouts, &analysis.crosstab, &cfg.render_spec()).unwrap(),
        ),
        ("motion_frames_head.json", motion_frames_json(&prepared.frames[..10])),
        ("phase_model.json", model),
    ]
}

/// Names of golden files whose content differs from the current output.
pub fn golden_mismatches() -> Vec<String> {
    golden_outputs()
        .into_iter()
        .filter(|(name, body)| std::fs::read_to_string(golden_dir().join(name)).ok().as_deref() != Some(body))
        .map(|(name, _)| name.to_string())
        .collect()
}
