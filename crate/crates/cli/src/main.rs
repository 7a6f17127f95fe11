use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use court_trace::config::RunConfig;
use court_trace::pipeline::{self, PipelineError};
use court_trace::synthetic::{events_csv, generate_match, MatchConfig};
use court_trace::ingest::{write_sensor_log, ColumnNames};

#[derive(Parser)]
#[command(name = "court-trace", version, about = "Player tracking analysis: spacing, hulls and game phases")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample counts and sampling rates of a sensor log.
    Summarize(RunArgs),
    /// Full analysis: report, phase model, MDS panels, hull snapshots, motion frames.
    Analyze(RunArgs),
    /// BD/TD curve over a k range and the selected phase model.
    Phases(RunArgs),
    /// Hull area series and hull snapshots of the first plays.
    Hulls(RunArgs),
    /// Synchronized frames as motion-chart JSON.
    ExportFrames(RunArgs),
    /// Write a seeded synthetic match (sensor log, events, config).
    Simulate(SimulateArgs),
}

#[derive(Args, Clone, Debug, Default)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Sensor log CSV (overrides the config).
    #[arg(long, short)]
    input: Option<PathBuf>,
    /// Event log, CSV or .json (overrides the config).
    #[arg(long)]
    events: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for k-means initialisation.
    #[arg(long)]
    seed: Option<u64>,
    /// Resampling grid rate in Hz.
    #[arg(long)]
    grid_hz: Option<f64>,
    /// Force the number of phases.
    #[arg(long)]
    k: Option<usize>,
    /// Range of k to scan, e.g. `1..12` or `2-8`.
    #[arg(long, value_parser = parse_k_range)]
    k_range: Option<(usize, usize)>,
    /// Smallest BD/TD gain that justifies one more cluster.
    #[arg(long)]
    min_gain: Option<f64>,
    /// Input positions are already filtered.
    #[arg(long)]
    skip_kalman: bool,
    /// Process noise: acceleration variance (m^2/s^4).
    #[arg(long)]
    kf_accel_var: Option<f64>,
    /// Measurement noise variance (m^2).
    #[arg(long)]
    kf_meas_var: Option<f64>,
}

#[derive(Args, Clone, Debug)]
struct SimulateArgs {
    #[arg(long, default_value = "sim")]
    out: PathBuf,
    #[arg(long, default_value_t = 2016)]
    seed: u64,
    /// Match length in seconds; defaults to a full match.
    #[arg(long)]
    duration_s: Option<u64>,
}

fn parse_k_range(text: &str) -> Result<(usize, usize), String> {
    let (a, b) = text
        .split_once("..=")
        .or_else(|| text.split_once(".."))
        .or_else(|| text.split_once('-'))
        .or_else(|| text.split_once(':'))
        .unwrap_or((text, text));
    let lo: usize = a.trim().parse().map_err(|_| format!("bad k range `{text}`"))?;
    let hi: usize = b.trim().parse().map_err(|_| format!("bad k range `{text}`"))?;
    if lo == 0 || lo > hi {
        return Err(format!("k range `{text}` is empty or starts at 0"));
    }
    Ok((lo, hi))
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig, PipelineError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(p) = &self.input {
            cfg.input.sensor_log = Some(p.clone());
        }
        if let Some(p) = &self.events {
            cfg.input.events = Some(p.clone());
        }
        if let Some(p) = &self.out {
            cfg.output.dir = p.clone();
        }
        if let Some(seed) = self.seed {
            cfg.phases.seed = seed;
        }
        if let Some(hz) = self.grid_hz {
            cfg.grid.grid_hz = hz;
        }
        if let Some((lo, hi)) = self.k_range {
            cfg.phases.k_min = lo;
            cfg.phases.k_max = hi;
            cfg.phases.k = None;
        }
        if let Some(k) = self.k {
            cfg.phases.k = Some(k);
        }
        if let Some(g) = self.min_gain {
            cfg.phases.min_gain = g;
        }
        if self.skip_kalman {
            cfg.kalman.skip = true;
        }
        if let Some(v) = self.kf_accel_var {
            cfg.kalman.params.process_noise_accel = v;
        }
        if let Some(v) = self.kf_meas_var {
            cfg.kalman.params.measurement_noise = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Summarize(args) => {
            let cfg = args.config()?;
            let stats = pipeline::summarize(&cfg)?;
            let text = pipeline::summary_markdown(&stats);
            print!("{text}");
            pipeline::write_atomic(&cfg.output.dir, &[(PathBuf::from("summary.md"), text)])?;
        }
        Command::Analyze(args) => {
            let cfg = args.config()?;
            let analysis = pipeline::analyze(&cfg, &cfg.output.dir)?;
            print!("{}", pipeline::curve_table(&analysis.phases));
            println!(
                "{} frames, {} play intervals; results in {}",
                analysis.labels.len(),
                analysis.intervals.len(),
                cfg.output.dir.display()
            );
        }
        Command::Phases(args) => {
            let cfg = args.config()?;
            let run = pipeline::phases(&cfg, &cfg.output.dir)?;
            print!("{}", pipeline::curve_table(&run));
        }
        Command::Hulls(args) => {
            let cfg = args.config()?;
            let n = pipeline::hulls(&cfg, &cfg.output.dir)?;
            println!("{n} hull frames written to {}", cfg.output.dir.display());
        }
        Command::ExportFrames(args) => {
            let cfg = args.config()?;
            let n = pipeline::export_frames(&cfg, &cfg.output.dir)?;
            println!("{n} frames written to {}", cfg.output.dir.join("motion_frames.json").display());
        }
        Command::Simulate(args) => simulate(&args)?,
    }
    Ok(())
}

fn simulate(args: &SimulateArgs) -> Result<(), PipelineError> {
    let mut mc = MatchConfig::full_match();
    mc.seed = args.seed;
    if let Some(s) = args.duration_s {
        mc.duration_ms = s * 1000;
    }
    let m = generate_match(&mc);
    let mut log = Vec::new();
    write_sensor_log(&m.samples, &ColumnNames::default(), &mut log).map_err(pipeline_io(Path::new("sensor_log.csv")))?;
    let mut cfg = RunConfig::default();
    cfg.input.sensor_log = Some("sensor_log.csv".into());
    cfg.input.events = Some("events.csv".into());
    cfg.court = m.court.clone();
    cfg.output.dir = "out".into();
    pipeline::write_atomic(
        &args.out,
        &[
            (PathBuf::from("sensor_log.csv"), String::from_utf8_lossy(&log).into_owned()),
            (PathBuf::from("events.csv"), events_csv(&m.events)),
            (PathBuf::from("config.toml"), cfg.to_toml_string()),
        ],
    )?;
    println!(
        "{} samples, {} events, {} plays written to {}",
        m.samples.len(),
        m.events.len(),
        m.plays.len(),
        args.out.display()
    );
    Ok(())
}

fn pipeline_io(path: &Path) -> impl Fn(court_trace::ingest::IngestError) -> PipelineError + '_ {
    move |e| {
        PipelineError::Export(court_trace::exporter::ExportError::Io {
            path: path.to_path_buf(),
            source: std::io::Error::other(e.to_string()),
        })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
