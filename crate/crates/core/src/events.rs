//! Play-by-play events: parsing, period boundaries and a nearest-frame join
//! against trajectory frames.
//!
//! CSV schema: header row with `t_ms` and `kind` columns, an optional
//! `players` column (tag ids separated by `;`), and any number of extra
//! columns that land in the event payload.
//!
//! JSON schema: an array of objects with `t_ms`, `kind`, optional `players`
//! (strings or integers) and optional `payload` object; other keys are also
//! folded into the payload.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;

use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::ingest::{Frame, TagId};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum EventKind {
    MadeShot,
    MissedShot,
    Rebound,
    Foul,
    Pass,
    Timeout,
    PeriodStart,
    PeriodEnd,
    Other(String),
}

impl EventKind {
    pub fn parse(text: &str) -> Self {
        match text.trim().to_ascii_lowercase().as_str() {
            "made_shot" => EventKind::MadeShot,
            "missed_shot" => EventKind::MissedShot,
            "rebound" => EventKind::Rebound,
            "foul" => EventKind::Foul,
            "pass" => EventKind::Pass,
            "timeout" => EventKind::Timeout,
            "period_start" => EventKind::PeriodStart,
            "period_end" => EventKind::PeriodEnd,
            _ => EventKind::Other(text.trim().to_string()),
        }
    }

    pub fn as_str(&self) -> &str {
        match self {
            EventKind::MadeShot => "made_shot",
            EventKind::MissedShot => "missed_shot",
            EventKind::Rebound => "rebound",
            EventKind::Foul => "foul",
            EventKind::Pass => "pass",
            EventKind::Timeout => "timeout",
            EventKind::PeriodStart => "period_start",
            EventKind::PeriodEnd => "period_end",
            EventKind::Other(s) => s,
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for EventKind {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GameEvent {
    pub t_ms: u64,
    pub kind: EventKind,
    pub players: Vec<TagId>,
    pub payload: BTreeMap<String, String>,
}

#[derive(Debug, Error)]
pub enum EventError {
    /// `line` is the CSV line, or the 1-based array position for JSON.
    #[error("malformed event at {line}: {reason}")]
    MalformedEvent { line: u64, reason: String },
    #[error("unbalanced period events at t = {t_ms} ms")]
    UnbalancedPeriods { t_ms: u64 },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EventFormat {
    Csv,
    Json,
}

/// Parses an event log and returns events sorted by time (stable).
pub fn parse_events<R: Read>(input: R, format: EventFormat) -> Result<Vec<GameEvent>, EventError> {
    let mut events = match format {
        EventFormat::Csv => parse_csv(input)?,
        EventFormat::Json => parse_json(input)?,
    };
    events.sort_by_key(|e| e.t_ms);
    Ok(events)
}

fn split_players(text: &str) -> Vec<TagId> {
    text.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(TagId::new)
        .collect()
}

fn parse_csv<R: Read>(input: R) -> Result<Vec<GameEvent>, EventError> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let malformed = |line: u64, reason: String| EventError::MalformedEvent { line, reason };
    let headers = reader
        .headers()
        .map_err(|e| malformed(1, e.to_string()))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let t_col = col("t_ms").ok_or_else(|| malformed(1, "missing `t_ms` column".into()))?;
    let kind_col = col("kind").ok_or_else(|| malformed(1, "missing `kind` column".into()))?;
    let players_col = col("players");

    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            malformed(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        let t_text = record.get(t_col).unwrap_or("");
        let t_ms = t_text
            .parse::<u64>()
            .map_err(|_| malformed(line, format!("t_ms `{t_text}` is not a non-negative integer")))?;
        let kind_text = record.get(kind_col).unwrap_or("");
        if kind_text.is_empty() {
            return Err(malformed(line, "empty kind".into()));
        }
        let players = players_col
            .and_then(|c| record.get(c))
            .map(split_players)
            .unwrap_or_default();
        let payload = headers
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != t_col && *i != kind_col && Some(*i) != players_col)
            .filter_map(|(i, h)| record.get(i).map(|v| (h.to_string(), v.to_string())))
            .collect();
        out.push(GameEvent {
            t_ms,
            kind: EventKind::parse(kind_text),
            players,
            payload,
        });
    }
    Ok(out)
}

#[derive(Deserialize)]
struct JsonEvent {
    t_ms: u64,
    kind: String,
    #[serde(default)]
    players: Vec<TagId>,
    #[serde(default)]
    payload: BTreeMap<String, serde_json::Value>,
    #[serde(flatten)]
    extra: BTreeMap<String, serde_json::Value>,
}

fn json_text(v: serde_json::Value) -> String {
    match v {
        serde_json::Value::String(s) => s,
        other => other.to_string(),
    }
}

fn parse_json<R: Read>(input: R) -> Result<Vec<GameEvent>, EventError> {
    let values: Vec<serde_json::Value> = serde_json::from_reader(input).map_err(|e| EventError::MalformedEvent {
        line: e.line() as u64,
        reason: e.to_string(),
    })?;
    values
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            let ev: JsonEvent = serde_json::from_value(v).map_err(|e| EventError::MalformedEvent {
                line: i as u64 + 1,
                reason: e.to_string(),
            })?;
            let mut payload: BTreeMap<String, String> =
                ev.extra.into_iter().map(|(k, v)| (k, json_text(v))).collect();
            payload.extend(ev.payload.into_iter().map(|(k, v)| (k, json_text(v))));
            Ok(GameEvent {
                t_ms: ev.t_ms,
                kind: EventKind::parse(&ev.kind),
                players: ev.players,
                payload,
            })
        })
        .collect()
}

/// Step function from time to 1-based period number.
#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize)]
pub struct PeriodMap {
    /// Start time of periods 2, 3, ...; period 1 covers everything before.
    boundaries: Vec<u64>,
}

impl PeriodMap {
    pub fn single() -> Self {
        PeriodMap::default()
    }

    pub fn from_starts(mut starts: Vec<u64>) -> Self {
        starts.sort_unstable();
        let boundaries = if starts.is_empty() { starts } else { starts[1..].to_vec() };
        PeriodMap { boundaries }
    }

    pub fn period_of(&self, t_ms: u64) -> u32 {
        1 + self.boundaries.partition_point(|&b| b <= t_ms) as u32
    }

    pub fn n_periods(&self) -> u32 {
        1 + self.boundaries.len() as u32
    }
}

/// Derives period boundaries from `PeriodStart` events. Time before the first
/// start belongs to period 1, and time after a `PeriodEnd` stays in the
/// ended period until the next start. Without period events the whole game
/// is period 1. When the log carries any `PeriodEnd`, starts and ends must
/// alternate (a trailing open period is allowed).
pub fn period_map(events: &[GameEvent]) -> Result<PeriodMap, EventError> {
    let strict = events.iter().any(|e| e.kind == EventKind::PeriodEnd);
    let mut open = false;
    let mut starts = Vec::new();
    for e in events {
        match e.kind {
            EventKind::PeriodStart => {
                if strict && open {
                    return Err(EventError::UnbalancedPeriods { t_ms: e.t_ms });
                }
                open = true;
                starts.push(e.t_ms);
            }
            EventKind::PeriodEnd => {
                if !open {
                    return Err(EventError::UnbalancedPeriods { t_ms: e.t_ms });
                }
                open = false;
            }
            _ => {}
        }
    }
    Ok(PeriodMap::from_starts(starts))
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnnotatedFrame {
    pub frame: Frame,
    pub events: Vec<GameEvent>,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct EventJoin {
    pub frames: Vec<AnnotatedFrame>,
    pub unattached: Vec<GameEvent>,
}

/// Attaches each event to the nearest frame within `window_ms`, preferring
/// the earlier frame on ties. Both inputs must be sorted by time. Linear
/// two-pointer merge.
pub fn join_events(frames: &[Frame], events: &[GameEvent], window_ms: u64) -> EventJoin {
    debug_assert!(frames.windows(2).all(|w| w[0].t_ms <= w[1].t_ms));
    debug_assert!(events.windows(2).all(|w| w[0].t_ms <= w[1].t_ms));
    let mut out = EventJoin {
        frames: frames
            .iter()
            .map(|f| AnnotatedFrame {
                frame: f.clone(),
                events: Vec::new(),
            })
            .collect(),
        unattached: Vec::new(),
    };
    let mut j = 0usize;
    for e in events {
        while j + 1 < frames.len() && frames[j + 1].t_ms <= e.t_ms {
            j += 1;
        }
        let nearest = match frames.get(j) {
            None => None,
            Some(f) => {
                let mut best = (j, f.t_ms.abs_diff(e.t_ms));
                if let Some(next) = frames.get(j + 1) {
                    let d = next.t_ms.abs_diff(e.t_ms);
                    if d < best.1 {
                        best = (j + 1, d);
                    }
                }
                Some(best)
            }
        };
        match nearest {
            Some((idx, d)) if d <= window_ms => out.frames[idx].events.push(e.clone()),
            _ => out.unattached.push(e.clone()),
        }
    }
    out
}
