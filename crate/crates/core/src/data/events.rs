//! Raw event logs: click CSV and playlist lines.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, NaiveDateTime};

use crate::error::{Error, Result};

/// Share of malformed rows above which loading fails.
pub const MAX_MALFORMED_FRACTION: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EventFormat {
    /// Header `SessionId,ItemId,Time`; time as ISO-8601 or integer epoch seconds.
    ClickCsv,
    /// One playlist per line, whitespace-separated tokens, no timestamps.
    PlaylistLines,
}

impl FromStr for EventFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "click_csv" => Ok(EventFormat::ClickCsv),
            "playlist_lines" => Ok(EventFormat::PlaylistLines),
            _ => Err(Error::Config(format!("unknown event format {s:?}; expected click_csv or playlist_lines"))),
        }
    }
}

/// The events of one session, in time order.
#[derive(Clone, Debug, PartialEq)]
pub struct SessionEvents {
    pub id: String,
    pub items: Vec<String>,
    /// Seconds since the epoch, parallel to `items`; empty when the source has no times.
    pub times: Vec<f64>,
}

impl SessionEvents {
    pub fn last_time(&self) -> Option<f64> {
        self.times.last().copied()
    }
}

/// Sessions in order of first appearance.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EventLog {
    pub sessions: Vec<SessionEvents>,
    /// Rows skipped because they could not be parsed.
    pub malformed: usize,
}

impl EventLog {
    pub fn record_count(&self) -> usize {
        self.sessions.iter().map(|s| s.items.len()).sum()
    }

    pub fn has_timestamps(&self) -> bool {
        !self.sessions.is_empty() && self.sessions.iter().all(|s| s.times.len() == s.items.len())
    }
}

/// Reads an event log from `path`.
pub fn load_events(path: &Path, format: EventFormat) -> Result<EventLog> {
    let file = File::open(path)?;
    let log = parse_events(file, format)?;
    if log.sessions.is_empty() {
        log::warn!("{} holds no events", path.display());
    }
    Ok(log)
}

/// Parses an event log from any reader.
pub fn parse_events(input: impl Read, format: EventFormat) -> Result<EventLog> {
    let (log, rows) = match format {
        EventFormat::ClickCsv => parse_clicks(input)?,
        EventFormat::PlaylistLines => parse_playlists(input)?,
    };
    if log.malformed > 0 {
        log::warn!("skipped {} malformed rows of {rows}", log.malformed);
        if log.malformed as f64 > MAX_MALFORMED_FRACTION * rows as f64 {
            return Err(Error::Format(format!(
                "{} of {rows} rows are malformed (limit {}%)",
                log.malformed,
                MAX_MALFORMED_FRACTION * 100.0
            )));
        }
    }
    Ok(log)
}

fn parse_clicks(input: impl Read) -> Result<(EventLog, usize)> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(input);
    let headers = reader.headers().map_err(csv_error)?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Ok((EventLog::default(), 0));
    }
    if headers.iter().map(str::trim).ne(["SessionId", "ItemId", "Time"]) {
        return Err(Error::Format(format!("expected header SessionId,ItemId,Time, found {:?}", headers.iter().collect::<Vec<_>>())));
    }

    let mut log = EventLog::default();
    let mut position: HashMap<String, usize> = HashMap::new();
    let mut rows = 0;
    for record in reader.records() {
        rows += 1;
        let record = match record {
            Ok(r) => r,
            Err(e) if e.is_io_error() => return Err(csv_error(e)),
            Err(_) => {
                log.malformed += 1;
                continue;
            }
        };
        let parsed = match (record.get(0), record.get(1), record.get(2), record.len()) {
            (Some(s), Some(i), Some(t), 3) if !s.trim().is_empty() && !i.trim().is_empty() => {
                parse_time(t.trim()).map(|t| (s.trim(), i.trim(), t))
            }
            _ => None,
        };
        let Some((session, item, time)) = parsed else {
            log.malformed += 1;
            continue;
        };
        let idx = *position.entry(session.to_string()).or_insert_with(|| {
            log.sessions.push(SessionEvents { id: session.to_string(), items: Vec::new(), times: Vec::new() });
            log.sessions.len() - 1
        });
        log.sessions[idx].items.push(item.to_string());
        log.sessions[idx].times.push(time);
    }
    for s in &mut log.sessions {
        sort_by_time(s);
    }
    Ok((log, rows))
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Format(format!("{other:?}")),
    }
}

/// Stable sort, so equal times keep file order.
fn sort_by_time(s: &mut SessionEvents) {
    let mut order: Vec<usize> = (0..s.items.len()).collect();
    order.sort_by(|&a, &b| s.times[a].total_cmp(&s.times[b]));
    s.items = order.iter().map(|&i| std::mem::take(&mut s.items[i])).collect();
    s.times = order.iter().map(|&i| s.times[i]).collect();
}

/// Epoch seconds from an integer or an ISO-8601 string; naive times are read as UTC.
pub fn parse_time(s: &str) -> Option<f64> {
    if let Ok(secs) = s.parse::<i64>() {
        return Some(secs as f64);
    }
    let from_naive = |t: NaiveDateTime| {
        let utc = t.and_utc();
        utc.timestamp() as f64 + f64::from(utc.timestamp_subsec_nanos()) * 1e-9
    };
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(from_naive(t.naive_utc()));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(from_naive(t));
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d").ok().and_then(|d| d.and_hms_opt(0, 0, 0)).map(from_naive)
}

fn parse_playlists(input: impl Read) -> Result<(EventLog, usize)> {
    let mut log = EventLog::default();
    let mut rows = 0;
    for (n, line) in BufReader::new(input).lines().enumerate() {
        let line = match line {
            Ok(l) => l,
            Err(e) if e.kind() == std::io::ErrorKind::InvalidData => {
                rows += 1;
                log.malformed += 1;
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let items: Vec<String> = line.split_whitespace().map(str::to_string).collect();
        if items.is_empty() {
            continue;
        }
        rows += 1;
        log.sessions.push(SessionEvents { id: (n + 1).to_string(), items, times: Vec::new() });
    }
    Ok((log, rows))
}
