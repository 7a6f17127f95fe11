//! Sensor log ingestion: parsing, per-player trajectories, stream statistics
//! and resampling onto a shared time grid.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

/// Opaque player identifier.
///
/// Ordering is numeric when both ids are integers ("7" < "23"), otherwise
/// lexicographic, with integer ids sorting first. Canonical pair ordering and
/// default rosters rely on this.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct TagId(String);

impl TagId {
    pub fn new(id: impl Into<String>) -> Self {
        TagId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl Ord for TagId {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.0.parse::<u64>(), other.0.parse::<u64>()) {
            (Ok(a), Ok(b)) => a.cmp(&b).then_with(|| self.0.cmp(&other.0)),
            (Ok(_), Err(_)) => Ordering::Less,
            (Err(_), Ok(_)) => Ordering::Greater,
            (Err(_), Err(_)) => self.0.cmp(&other.0),
        }
    }
}

impl PartialOrd for TagId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for TagId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for TagId {
    fn from(s: &str) -> Self {
        TagId(s.to_string())
    }
}

impl From<String> for TagId {
    fn from(s: String) -> Self {
        TagId(s)
    }
}

impl From<u32> for TagId {
    fn from(n: u32) -> Self {
        TagId(n.to_string())
    }
}

// Accepts both `"7"` and `7` so config files and event JSON can use either.
impl<'de> Deserialize<'de> for TagId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u64),
            Str(String),
        }
        Ok(match Raw::deserialize(deserializer)? {
            Raw::Int(n) => TagId(n.to_string()),
            Raw::Str(s) => TagId(s),
        })
    }
}

/// Court-plane position in meters.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// One raw tag reading.
#[derive(Clone, Debug, PartialEq)]
pub struct SensorSample {
    pub tag_id: TagId,
    pub timestamp_ms: u64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("no data rows")]
    EmptyInput,
    #[error("missing column `{0}` in header")]
    MissingColumn(String),
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("roster tag `{0}` has no trajectory")]
    UnknownTag(TagId),
    #[error("roster is empty")]
    EmptyRoster,
    #[error("grid frequency must be in (0, 1000] Hz, got {0}")]
    InvalidGrid(f64),
    #[error("invalid court: {0}")]
    InvalidCourt(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Supported sensor log encodings.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SensorLogFormat {
    #[default]
    Csv,
}

/// Header names of the four sensor log columns.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnNames {
    pub tag: String,
    pub timestamp: String,
    pub x: String,
    pub y: String,
}

impl Default for ColumnNames {
    fn default() -> Self {
        ColumnNames {
            tag: "tagid".into(),
            timestamp: "timestamp_ms".into(),
            x: "klm_x".into(),
            y: "klm_y".into(),
        }
    }
}

/// Parses a header-prefixed sensor log. Rows keep their input order.
pub fn parse_sensor_log<R: Read>(
    input: R,
    format: SensorLogFormat,
    columns: &ColumnNames,
) -> Result<Vec<SensorSample>, IngestError> {
    match format {
        SensorLogFormat::Csv => parse_csv(input, columns),
    }
}

fn parse_csv<R: Read>(input: R, columns: &ColumnNames) -> Result<Vec<SensorSample>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);

    let headers = match reader.byte_headers() {
        Ok(h) if h.is_empty() => return Err(IngestError::EmptyInput),
        Ok(h) => h.clone(),
        Err(e) => return Err(csv_error(e)),
    };
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name.as_bytes())
            .ok_or_else(|| IngestError::MissingColumn(name.to_string()))
    };
    let idx_tag = find(&columns.tag)?;
    let idx_ts = find(&columns.timestamp)?;
    let idx_x = find(&columns.x)?;
    let idx_y = find(&columns.y)?;

    let mut out = Vec::new();
    let mut record = csv::ByteRecord::new();
    loop {
        match reader.read_byte_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => return Err(csv_error(e)),
        }
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() == 1 && record.get(0).is_some_and(|f| f.is_empty()) {
            continue;
        }
        let malformed = |reason: String| IngestError::MalformedRow { line, reason };
        let field = |idx: usize, name: &str| -> Result<&str, IngestError> {
            let raw = record
                .get(idx)
                .ok_or_else(|| malformed(format!("missing field `{name}`")))?;
            let text = std::str::from_utf8(raw).map_err(|_| malformed("invalid UTF-8".into()))?;
            if text.is_empty() {
                return Err(malformed(format!("empty field `{name}`")));
            }
            Ok(text)
        };
        let tag = field(idx_tag, &columns.tag)?;
        let ts = field(idx_ts, &columns.timestamp)?;
        let timestamp_ms: u64 = ts
            .parse()
            .map_err(|_| malformed(format!("timestamp `{ts}` is not a non-negative integer")))?;
        let coord = |idx: usize, name: &str| -> Result<f64, IngestError> {
            let text = field(idx, name)?;
            match text.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(malformed(format!("coordinate `{text}` is not a finite number"))),
            }
        };
        let x = coord(idx_x, &columns.x)?;
        let y = coord(idx_y, &columns.y)?;
        out.push(SensorSample {
            tag_id: TagId::new(tag),
            timestamp_ms,
            x,
            y,
        });
    }
    if out.is_empty() {
        return Err(IngestError::EmptyInput);
    }
    Ok(out)
}

fn csv_error(e: csv::Error) -> IngestError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => IngestError::Io(io),
        other => IngestError::MalformedRow {
            line,
            reason: format!("{other:?}"),
        },
    }
}

/// Writes samples in the same CSV layout [`parse_sensor_log`] reads.
pub fn write_sensor_log<W: Write>(
    samples: &[SensorSample],
    columns: &ColumnNames,
    out: W,
) -> Result<(), IngestError> {
    let mut writer = csv::Writer::from_writer(out);
    let io = |e: csv::Error| IngestError::Io(std::io::Error::other(e));
    writer
        .write_record([&columns.tag, &columns.timestamp, &columns.x, &columns.y])
        .map_err(io)?;
    for s in samples {
        writer
            .write_record([
                s.tag_id.as_str(),
                &s.timestamp_ms.to_string(),
                &s.x.to_string(),
                &s.y.to_string(),
            ])
            .map_err(io)?;
    }
    writer.flush()?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub t_ms: u64,
    pub x: f64,
    pub y: f64,
}

impl TrackPoint {
    pub fn point(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// Time-ordered samples of one player. Timestamps strictly increase.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub tag_id: TagId,
    pub samples: Vec<TrackPoint>,
}

/// Groups samples by tag and sorts them by time. For duplicate
/// `(tag, timestamp)` pairs the last occurrence in input order is kept.
pub fn build_trajectories(samples: &[SensorSample]) -> BTreeMap<TagId, Trajectory> {
    let mut grouped: BTreeMap<TagId, Vec<TrackPoint>> = BTreeMap::new();
    for s in samples {
        grouped.entry(s.tag_id.clone()).or_default().push(TrackPoint {
            t_ms: s.timestamp_ms,
            x: s.x,
            y: s.y,
        });
    }
    grouped
        .into_iter()
        .map(|(tag_id, mut points)| {
            // stable sort keeps input order among equal timestamps
            points.sort_by_key(|p| p.t_ms);
            let mut deduped: Vec<TrackPoint> = Vec::with_capacity(points.len());
            for p in points {
                match deduped.last_mut() {
                    Some(last) if last.t_ms == p.t_ms => *last = p,
                    _ => deduped.push(p),
                }
            }
            let traj = Trajectory {
                tag_id: tag_id.clone(),
                samples: deduped,
            };
            (tag_id, traj)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlayerStats {
    pub count: usize,
    pub first_ms: u64,
    pub last_ms: u64,
    /// `None` with fewer than two samples.
    pub mean_interval_ms: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StreamStats {
    pub total_samples: usize,
    pub per_player: BTreeMap<TagId, PlayerStats>,
    /// Pooled mean of every per-player inter-sample interval.
    pub mean_interval_ms: Option<f64>,
    /// Span of the union of all samples.
    pub span_ms: u64,
    /// `total_samples / span`; `None` when the span is zero.
    pub observed_rate_hz: Option<f64>,
}

pub fn stream_stats(trajectories: &BTreeMap<TagId, Trajectory>) -> StreamStats {
    let mut per_player = BTreeMap::new();
    let mut total = 0usize;
    let mut interval_sum = 0u64;
    let mut interval_count = 0u64;
    let mut first = u64::MAX;
    let mut last = 0u64;
    for (tag, traj) in trajectories {
        let (Some(head), Some(tail)) = (traj.samples.first(), traj.samples.last()) else {
            continue;
        };
        let n = traj.samples.len();
        total += n;
        first = first.min(head.t_ms);
        last = last.max(tail.t_ms);
        let span = tail.t_ms - head.t_ms;
        let mean_interval_ms = (n >= 2).then(|| span as f64 / (n - 1) as f64);
        if n >= 2 {
            interval_sum += span;
            interval_count += (n - 1) as u64;
        }
        per_player.insert(
            tag.clone(),
            PlayerStats {
                count: n,
                first_ms: head.t_ms,
                last_ms: tail.t_ms,
                mean_interval_ms,
            },
        );
    }
    let span_ms = if total == 0 { 0 } else { last - first };
    StreamStats {
        total_samples: total,
        per_player,
        mean_interval_ms: (interval_count > 0).then(|| interval_sum as f64 / interval_count as f64),
        span_ms,
        observed_rate_hz: (span_ms > 0).then(|| total as f64 / (span_ms as f64 / 1000.0)),
    }
}

/// Synchronization grid parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub grid_hz: f64,
    pub max_gap_ms: u64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            grid_hz: 5.0,
            max_gap_ms: 1000,
        }
    }
}

/// Positions of the whole roster at one grid instant.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub t_ms: u64,
    pub positions: BTreeMap<TagId, Point>,
}

impl Frame {
    pub fn new(t_ms: u64, positions: impl IntoIterator<Item = (TagId, Point)>) -> Self {
        Frame {
            t_ms,
            positions: positions.into_iter().collect(),
        }
    }

    /// Arithmetic mean of player positions.
    pub fn centroid(&self) -> Option<Point> {
        let n = self.positions.len();
        if n == 0 {
            return None;
        }
        let (sx, sy) = self
            .positions
            .values()
            .fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
        Some(Point::new(sx / n as f64, sy / n as f64))
    }

    pub fn points(&self) -> Vec<Point> {
        self.positions.values().copied().collect()
    }
}

/// The `n` tags with the most samples; ties go to the lower tag id.
pub fn default_roster(trajectories: &BTreeMap<TagId, Trajectory>, n: usize) -> Vec<TagId> {
    let mut ranked: Vec<(&TagId, usize)> = trajectories
        .iter()
        .map(|(tag, traj)| (tag, traj.samples.len()))
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let mut roster: Vec<TagId> = ranked.into_iter().take(n).map(|(t, _)| t.clone()).collect();
    roster.sort();
    roster
}

/// Grid timestamp `k` steps after `epoch`, rounded to the nearest millisecond.
pub fn grid_time(epoch_ms: u64, k: u64, grid_hz: f64) -> u64 {
    epoch_ms + (k as f64 * 1000.0 / grid_hz).round() as u64
}

/// Linearly interpolates every roster player onto a uniform grid anchored at
/// the earliest roster sample. A frame is emitted only when every player has
/// an exact sample or bracketing samples at most `max_gap_ms` apart.
pub fn resample_to_grid(
    trajectories: &BTreeMap<TagId, Trajectory>,
    grid: &GridSpec,
    roster: &[TagId],
) -> Result<Vec<Frame>, IngestError> {
    if !(grid.grid_hz.is_finite() && grid.grid_hz > 0.0 && grid.grid_hz <= 1000.0) {
        return Err(IngestError::InvalidGrid(grid.grid_hz));
    }
    if roster.is_empty() {
        return Err(IngestError::EmptyRoster);
    }
    let mut tracks: Vec<(&TagId, &[TrackPoint])> = Vec::with_capacity(roster.len());
    for tag in roster {
        let traj = trajectories
            .get(tag)
            .filter(|t| !t.samples.is_empty())
            .ok_or_else(|| IngestError::UnknownTag(tag.clone()))?;
        tracks.push((tag, &traj.samples));
    }
    let epoch = tracks.iter().map(|(_, s)| s[0].t_ms).min().unwrap_or(0);
    let end = tracks.iter().map(|(_, s)| s[s.len() - 1].t_ms).max().unwrap_or(0);

    let mut cursors = vec![0usize; tracks.len()];
    let mut frames = Vec::new();
    for k in 0u64.. {
        let t = grid_time(epoch, k, grid.grid_hz);
        if t > end {
            break;
        }
        let mut positions = BTreeMap::new();
        let mut complete = true;
        for ((tag, samples), cursor) in tracks.iter().zip(cursors.iter_mut()) {
            match interpolate_at(samples, cursor, t, grid.max_gap_ms) {
                Some(p) => {
                    positions.insert((*tag).clone(), p);
                }
                None => complete = false,
            }
        }
        if complete {
            frames.push(Frame { t_ms: t, positions });
        }
    }
    Ok(frames)
}

/// Position at `t`, advancing `cursor` monotonically through `samples`.
fn interpolate_at(samples: &[TrackPoint], cursor: &mut usize, t: u64, max_gap_ms: u64) -> Option<Point> {
    while *cursor + 1 < samples.len() && samples[*cursor + 1].t_ms <= t {
        *cursor += 1;
    }
    let a = samples[*cursor];
    if a.t_ms == t {
        return Some(a.point());
    }
    if a.t_ms > t {
        return None;
    }
    let b = samples.get(*cursor + 1)?;
    let gap = b.t_ms - a.t_ms;
    if gap > max_gap_ms {
        return None;
    }
    let w = (t - a.t_ms) as f64 / gap as f64;
    let lerp = |u: f64, v: f64| (u + w * (v - u)).clamp(u.min(v), u.max(v));
    Some(Point::new(lerp(a.x, b.x), lerp(a.y, b.y)))
}

/// Which way the tracked team attacks in a period.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackDirection {
    #[serde(alias = "+x")]
    TowardPositiveX,
    #[serde(alias = "-x")]
    TowardNegativeX,
}

/// Court dimensions and per-period attack direction (index 0 = period 1).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CourtSpec {
    pub length_m: f64,
    pub width_m: f64,
    pub attack_direction: Vec<AttackDirection>,
}

impl Default for CourtSpec {
    fn default() -> Self {
        CourtSpec {
            length_m: 28.0,
            width_m: 15.0,
            attack_direction: vec![AttackDirection::TowardPositiveX],
        }
    }
}

impl CourtSpec {
    pub fn validate(&self) -> Result<(), IngestError> {
        if !(self.length_m.is_finite() && self.length_m > 0.0) {
            return Err(IngestError::InvalidCourt(format!("length_m = {}", self.length_m)));
        }
        if !(self.width_m.is_finite() && self.width_m > 0.0) {
            return Err(IngestError::InvalidCourt(format!("width_m = {}", self.width_m)));
        }
        Ok(())
    }

    pub fn half_line_x(&self) -> f64 {
        self.length_m / 2.0
    }

    /// Direction for a 1-based period number.
    pub fn direction_for(&self, period: u32) -> Option<AttackDirection> {
        let idx = (period as usize).checked_sub(1)?;
        self.attack_direction.get(idx).copied()
    }
}
