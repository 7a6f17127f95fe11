//! Run configuration, read from TOML. Every section and key is optional;
//! missing values take the defaults below.
//!
//! ```toml
//! [input]
//! sensor_log = "match.csv"
//! events = "events.csv"          # optional, .json selects the JSON schema
//! [input.columns]
//! tag = "tagid"
//! timestamp = "timestamp_ms"
//! x = "klm_x"
//! y = "klm_y"
//!
//! [court]
//! length_m = 28.0
//! width_m = 15.0
//! attack_direction = ["toward_positive_x", "toward_negative_x"]   # per period
//!
//! [roster]
//! tags = ["1", "2", "3", "4", "5"]   # default: the 5 busiest tags
//! size = 5
//!
//! [grid]
//! grid_hz = 5.0
//! max_gap_ms = 1000
//!
//! [kalman]
//! skip = false
//! process_noise_accel = 4.0
//! measurement_noise = 0.09
//! initial_position_var = 1.0
//! initial_velocity_var = 4.0
//!
//! [segmentation]
//! min_play_ms = 2000
//!
//! [phases]
//! k_min = 1
//! k_max = 12
//! # k = 8                           # forces k, skipping selection
//! min_gain = 0.05
//! seed = 42
//! n_restarts = 10
//! max_iter = 300
//!
//! [events]
//! window_ms = 1000
//!
//! [render]
//! pixels_per_meter = 20.0
//! show_hull = true
//! show_ids = true
//!
//! [output]
//! dir = "out"
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exporter::RenderSpec;
use crate::ingest::{ColumnNames, CourtSpec, GridSpec, TagId};
use crate::kinematics::KalmanParams;
use crate::phases::{KMeansOptions, DEFAULT_MIN_GAIN};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    pub sensor_log: Option<PathBuf>,
    pub events: Option<PathBuf>,
    pub columns: ColumnNames,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RosterConfig {
    pub tags: Option<Vec<TagId>>,
    pub size: usize,
}

impl Default for RosterConfig {
    fn default() -> Self {
        RosterConfig { tags: None, size: 5 }
    }
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct KalmanConfig {
    /// Input is already filtered.
    pub skip: bool,
    #[serde(flatten)]
    pub params: KalmanParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentationConfig {
    pub min_play_ms: u64,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        SegmentationConfig { min_play_ms: 2000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhasesConfig {
    pub k: Option<usize>,
    pub k_min: usize,
    pub k_max: usize,
    pub min_gain: f64,
    pub seed: u64,
    pub n_restarts: usize,
    pub max_iter: usize,
}

impl Default for PhasesConfig {
    fn default() -> Self {
        let km = KMeansOptions::default();
        PhasesConfig {
            k: None,
            k_min: 1,
            k_max: 12,
            min_gain: DEFAULT_MIN_GAIN,
            seed: km.seed,
            n_restarts: km.n_restarts,
            max_iter: km.max_iter,
        }
    }
}

impl PhasesConfig {
    pub fn kmeans_options(&self) -> KMeansOptions {
        KMeansOptions {
            seed: self.seed,
            max_iter: self.max_iter,
            n_restarts: self.n_restarts,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EventsConfig {
    pub window_ms: u64,
}

impl Default for EventsConfig {
    fn default() -> Self {
        EventsConfig { window_ms: 1000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderConfig {
    pub pixels_per_meter: f64,
    pub show_hull: bool,
    pub show_ids: bool,
    pub palette: BTreeMap<TagId, String>,
}

impl Default for RenderConfig {
    fn default() -> Self {
        let spec = RenderSpec::default();
        RenderConfig {
            pixels_per_meter: spec.pixels_per_meter,
            show_hull: spec.show_hull,
            show_ids: spec.show_ids,
            palette: spec.palette,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("out") }
    }
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: InputConfig,
    pub court: CourtSpec,
    pub roster: RosterConfig,
    pub grid: GridSpec,
    pub kalman: KalmanConfig,
    pub segmentation: SegmentationConfig,
    pub phases: PhasesConfig,
    pub events: EventsConfig,
    pub render: RenderConfig,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    /// Loads a config file. Relative input paths are resolved against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut Option<PathBuf>| {
            if let Some(inner) = p.as_mut() {
                if inner.is_relative() {
                    *inner = base.join(&*inner);
                }
            }
        };
        resolve(&mut cfg.input.sensor_log);
        resolve(&mut cfg.input.events);
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }

    pub fn render_spec(&self) -> RenderSpec {
        RenderSpec {
            court: self.court.clone(),
            pixels_per_meter: self.render.pixels_per_meter,
            show_hull: self.render.show_hull,
            show_ids: self.render.show_ids,
            palette: self.render.palette.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.court.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !self.kalman.skip {
            self.kalman
                .params
                .validate()
                .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        let p = &self.phases;
        if p.k_min == 0 || p.k_min > p.k_max {
            return Err(ConfigError::Invalid(format!("k range {}..={} is empty or starts at 0", p.k_min, p.k_max)));
        }
        if p.k == Some(0) {
            return Err(ConfigError::Invalid("k must be at least 1".into()));
        }
        if self.roster.size == 0 && self.roster.tags.is_none() {
            return Err(ConfigError::Invalid("roster size must be positive".into()));
        }
        Ok(())
    }
}
