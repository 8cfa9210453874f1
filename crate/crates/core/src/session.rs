//! Event and session data model plus the preparation pipeline that turns a
//! raw JSONL event log into labeled, symbolized sessions.
//!
//! The pipeline runs in four steps: group events per user and sort them by
//! time, split each stream into sessions at gaps longer than 30 minutes,
//! label each session and cut it before its first `buy`, then drop sessions
//! outside the `[10, 200]` length window.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use chrono::{DateTime, TimeDelta, Utc};
use serde::Deserialize;

use crate::error::{Error, Result};

/// Maximum gap between consecutive events of one session, inclusive.
pub const SESSION_GAP_MINUTES: i64 = 30;
pub const MIN_SESSION_LEN: usize = 10;
pub const MAX_SESSION_LEN: usize = 200;

/// Number of categories that can appear in a prepared session (everything but `buy`).
pub const NUM_SYMBOLS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventCategory {
    View,
    Click,
    Detail,
    AddToCart,
    RemoveFromCart,
    Buy,
}

impl EventCategory {
    pub const ALL: [EventCategory; 6] = [
        EventCategory::View,
        EventCategory::Click,
        EventCategory::Detail,
        EventCategory::AddToCart,
        EventCategory::RemoveFromCart,
        EventCategory::Buy,
    ];

    /// The categories a prepared session may contain, in code-book order.
    pub const SYMBOLS: [EventCategory; NUM_SYMBOLS] = [
        EventCategory::View,
        EventCategory::Click,
        EventCategory::Detail,
        EventCategory::AddToCart,
        EventCategory::RemoveFromCart,
    ];

    pub fn token(self) -> &'static str {
        match self {
            EventCategory::View => "view",
            EventCategory::Click => "click",
            EventCategory::Detail => "detail",
            EventCategory::AddToCart => "add-to-cart",
            EventCategory::RemoveFromCart => "remove-from-cart",
            EventCategory::Buy => "buy",
        }
    }

    /// Dense index in `0..NUM_SYMBOLS`; `None` for `buy`.
    pub fn symbol_index(self) -> Option<usize> {
        match self {
            EventCategory::Buy => None,
            other => Some(other as usize),
        }
    }

    pub fn from_symbol_index(index: usize) -> Option<EventCategory> {
        Self::SYMBOLS.get(index).copied()
    }
}

impl fmt::Display for EventCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for EventCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.token() == s)
            .ok_or_else(|| Error::Category(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Buy,
    NoBuy,
}

impl Label {
    pub fn token(self) -> &'static str {
        match self {
            Label::Buy => "BUY",
            Label::NoBuy => "NOBUY",
        }
    }

    pub fn is_buy(self) -> bool {
        self == Label::Buy
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "BUY" => Ok(Label::Buy),
            "NOBUY" => Ok(Label::NoBuy),
            other => Err(Error::Input(format!("unknown label `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawEvent {
    pub user: String,
    pub timestamp: DateTime<Utc>,
    pub category: EventCategory,
}

/// All events of one user, sorted by timestamp.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserStream {
    pub user: String,
    pub events: Vec<RawEvent>,
}

/// A symbolized session with its label. Never contains `buy`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabeledSession {
    symbols: Vec<EventCategory>,
    label: Label,
}

impl LabeledSession {
    pub fn new(symbols: Vec<EventCategory>, label: Label) -> Result<Self> {
        if symbols.contains(&EventCategory::Buy) {
            return Err(Error::Input(
                "prepared sessions cannot contain `buy`".to_string(),
            ));
        }
        Ok(Self { symbols, label })
    }

    pub fn symbols(&self) -> &[EventCategory] {
        &self.symbols
    }

    pub fn label(&self) -> Label {
        self.label
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Ingested,
    Synthetic,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Ingested => "ingested",
            Provenance::Synthetic => "synthetic",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub sessions: Vec<LabeledSession>,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn new(sessions: Vec<LabeledSession>, provenance: Provenance) -> Self {
        Self {
            sessions,
            provenance,
        }
    }

    pub fn len(&self) -> usize {
        self.sessions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sessions.is_empty()
    }

    pub fn count(&self, label: Label) -> usize {
        self.sessions.iter().filter(|s| s.label == label).count()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, LabeledSession> {
        self.sessions.iter()
    }

    /// Symbol sequences of one class, in dataset order.
    pub fn sequences_of(&self, label: Label) -> Vec<&[EventCategory]> {
        self.sessions
            .iter()
            .filter(|s| s.label == label)
            .map(|s| s.symbols())
            .collect()
    }

    /// Writes the prepared-dataset format: `<LABEL>\t<sym> <sym> ...` per line.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        for session in &self.sessions {
            write!(out, "{}\t", session.label)?;
            for (i, sym) in session.symbols.iter().enumerate() {
                if i > 0 {
                    out.write_all(b" ")?;
                }
                out.write_all(sym.token().as_bytes())?;
            }
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_tsv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_tsv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("tokens are ASCII")
    }

    pub fn read_tsv<R: BufRead>(reader: R, provenance: Provenance) -> Result<Self> {
        let mut sessions = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let line_no = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let (label, symbols) = line.split_once('\t').ok_or_else(|| Error::Parse {
                line: line_no,
                message: "expected `<LABEL>\\t<symbols>`".to_string(),
            })?;
            let label: Label = label.parse().map_err(|e: Error| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            let symbols = symbols
                .split_whitespace()
                .map(EventCategory::from_str)
                .collect::<Result<Vec<_>>>()?;
            let session = LabeledSession::new(symbols, label).map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            sessions.push(session);
        }
        Ok(Self::new(sessions, provenance))
    }

    pub fn from_tsv_str(text: &str, provenance: Provenance) -> Result<Self> {
        Self::read_tsv(text.as_bytes(), provenance)
    }
}

#[derive(Deserialize)]
struct EventRecord {
    session_user: String,
    ts: String,
    #[serde(rename = "type")]
    category: String,
}

/// Parses a JSONL event log and groups it per user.
///
/// Users appear in order of first occurrence. Each user's events are sorted
/// by timestamp with a stable sort, so events sharing a timestamp keep their
/// input order. Blank lines are skipped.
pub fn parse_events<R: BufRead>(reader: R) -> Result<Vec<UserStream>> {
    let mut streams: Vec<UserStream> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: EventRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let timestamp = DateTime::parse_from_rfc3339(&record.ts)
            .map_err(|e| Error::Parse {
                line: line_no,
                message: format!("bad timestamp `{}`: {e}", record.ts),
            })?
            .with_timezone(&Utc);
        let category: EventCategory = record.category.parse()?;
        let slot = *index.entry(record.session_user.clone()).or_insert_with(|| {
            streams.push(UserStream {
                user: record.session_user.clone(),
                events: Vec::new(),
            });
            streams.len() - 1
        });
        streams[slot].events.push(RawEvent {
            user: record.session_user,
            timestamp,
            category,
        });
    }
    for stream in &mut streams {
        stream.events.sort_by_key(|e| e.timestamp);
    }
    Ok(streams)
}

/// Splits one user's time-sorted events into sessions. Consecutive events
/// stay together iff they are at most `gap` apart.
pub fn sessionize(events: &[RawEvent], gap: TimeDelta) -> Result<Vec<Vec<RawEvent>>> {
    let mut sessions: Vec<Vec<RawEvent>> = Vec::new();
    for (i, event) in events.iter().enumerate() {
        match sessions.last_mut() {
            Some(current) => {
                let prev = current.last().expect("sessions are never empty");
                let dt = event.timestamp.signed_duration_since(prev.timestamp);
                if dt < TimeDelta::zero() {
                    return Err(Error::Ordering { index: i });
                }
                if dt <= gap {
                    current.push(event.clone());
                } else {
                    sessions.push(vec![event.clone()]);
                }
            }
            None => sessions.push(vec![event.clone()]),
        }
    }
    Ok(sessions)
}

/// Labels a session and cuts it strictly before its first `buy`.
///
/// A session that starts with `buy` yields an empty BUY session, which the
/// length filter later removes.
pub fn label_and_truncate(categories: &[EventCategory]) -> Result<LabeledSession> {
    if categories.is_empty() {
        return Err(Error::Input("cannot label an empty session".to_string()));
    }
    let session = match categories.iter().position(|&c| c == EventCategory::Buy) {
        Some(cut) => LabeledSession {
            symbols: categories[..cut].to_vec(),
            label: Label::Buy,
        },
        None => LabeledSession {
            symbols: categories.to_vec(),
            label: Label::NoBuy,
        },
    };
    Ok(session)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FilterReport {
    pub kept: usize,
    pub too_short: usize,
    pub too_long: usize,
}

/// Keeps sessions whose length lies in `min..=max`.
pub fn filter_by_length(
    sessions: Vec<LabeledSession>,
    min: usize,
    max: usize,
    provenance: Provenance,
) -> (Dataset, FilterReport) {
    let mut report = FilterReport::default();
    let kept = sessions
        .into_iter()
        .filter(|s| {
            if s.len() < min {
                report.too_short += 1;
                false
            } else if s.len() > max {
                report.too_long += 1;
                false
            } else {
                report.kept += 1;
                true
            }
        })
        .collect();
    (Dataset::new(kept, provenance), report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrepareConfig {
    pub gap: TimeDelta,
    pub min_len: usize,
    pub max_len: usize,
}

impl Default for PrepareConfig {
    fn default() -> Self {
        Self {
            gap: TimeDelta::minutes(SESSION_GAP_MINUTES),
            min_len: MIN_SESSION_LEN,
            max_len: MAX_SESSION_LEN,
        }
    }
}

impl PrepareConfig {
    pub fn with_gap_minutes(self, minutes: i64) -> Self {
        Self {
            gap: TimeDelta::minutes(minutes),
            ..self
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PrepareStats {
    pub events: usize,
    pub users: usize,
    pub raw_sessions: usize,
    pub filter: FilterReport,
}

/// Full JSONL-to-dataset pipeline. Length filtering runs after truncation.
pub fn prepare<R: BufRead>(reader: R, config: &PrepareConfig) -> Result<(Dataset, PrepareStats)> {
    let streams = parse_events(reader)?;
    let mut stats = PrepareStats {
        users: streams.len(),
        ..PrepareStats::default()
    };
    let mut labeled = Vec::new();
    for stream in &streams {
        stats.events += stream.events.len();
        for session in sessionize(&stream.events, config.gap)? {
            stats.raw_sessions += 1;
            let categories: Vec<EventCategory> = session.iter().map(|e| e.category).collect();
            labeled.push(label_and_truncate(&categories)?);
        }
    }
    let (dataset, filter) =
        filter_by_length(labeled, config.min_len, config.max_len, Provenance::Ingested);
    stats.filter = filter;
    Ok((dataset, stats))
}
