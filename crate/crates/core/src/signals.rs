//! Sensor sample types, the on-disk CSV stream formats, and the
//! deterministic multi-stream merge that every downstream stage consumes.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Millis;

/// Samples arriving up to this many milliseconds late are re-sorted.
pub const REORDER_TOLERANCE_MS: Millis = 50;

pub const HR_RANGE_BPM: (f64, f64) = (20.0, 250.0);
pub const RR_RANGE_MS: (f64, f64) = (240.0, 3000.0);

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("bad header: expected `{expected}`, found `{found}`")]
    Header { expected: &'static str, found: String },
    #[error("line {line}: timestamp {t} ms is more than {tolerance} ms behind {max_seen} ms")]
    Ordering {
        line: u64,
        t: Millis,
        max_seen: Millis,
        tolerance: Millis,
    },
    #[error("stream {stream} is not time-ordered at position {position}")]
    StreamOrder { stream: usize, position: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<csv::Error> for SignalError {
    fn from(err: csv::Error) -> Self {
        let line = err.position().map(|p| p.line()).unwrap_or(0);
        SignalError::Parse {
            line,
            message: err.to_string(),
        }
    }
}

/// Why preprocessing rejected an otherwise present pupil sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Artifact {
    /// Diameter below the blink floor on a sample flagged valid.
    Blink,
    /// Within the padding interval around a blink.
    BlinkPad,
    /// Outside the plausible diameter range.
    OutOfRange,
    /// Physiologically impossible jump from the previous sample.
    Slew,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PupilSample {
    pub t: Millis,
    pub left_mm: f64,
    pub right_mm: f64,
    /// Tracker validity flag, as recorded. Preprocessing never rewrites it.
    pub valid: bool,
    /// Set by preprocessing; `None` on freshly parsed samples.
    pub artifact: Option<Artifact>,
}

fn usable_eye(d: f64) -> Option<f64> {
    (d.is_finite() && d > 0.0).then_some(d)
}

impl PupilSample {
    pub fn new(t: Millis, left_mm: f64, right_mm: f64, valid: bool) -> Self {
        Self {
            t,
            left_mm,
            right_mm,
            valid,
            artifact: None,
        }
    }

    /// Mean of both eyes when both are usable, else the usable eye.
    pub fn diameter(&self) -> Option<f64> {
        if !self.valid {
            return None;
        }
        match (usable_eye(self.left_mm), usable_eye(self.right_mm)) {
            (Some(l), Some(r)) => Some(0.5 * (l + r)),
            (Some(d), None) | (None, Some(d)) => Some(d),
            (None, None) => None,
        }
    }

    /// Valid, artifact-free and carrying a diameter.
    pub fn is_usable(&self) -> bool {
        self.artifact.is_none() && self.diameter().is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BeatKind {
    Hr,
    Rr,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeatSample {
    pub t: Millis,
    pub kind: BeatKind,
    /// bpm for [`BeatKind::Hr`], inter-beat interval in ms for [`BeatKind::Rr`].
    pub value: f64,
    /// False when `value` lies outside the physiological range for `kind`.
    pub valid: bool,
}

impl BeatSample {
    pub fn new(t: Millis, kind: BeatKind, value: f64) -> Self {
        let (lo, hi) = match kind {
            BeatKind::Hr => HR_RANGE_BPM,
            BeatKind::Rr => RR_RANGE_MS,
        };
        Self {
            t,
            kind,
            value,
            valid: value.is_finite() && value > lo && value < hi,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GazeSample {
    pub t: Millis,
    /// 1-based source line under fixation.
    pub line: u32,
    pub valid: bool,
}

/// Participant actions that reach the engine through the merged stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum ClientEvent {
    PromptResponse { prompt_id: u64, accepted: bool },
    HelpToggle { enabled: bool },
    BugResolved { bug_id: String },
    HintDismissed,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Pupil(PupilSample),
    Beat(BeatSample),
    Gaze(GazeSample),
    Client(ClientEvent),
}

impl Payload {
    /// Tie-break rank for events sharing a timestamp.
    pub fn rank(&self) -> u8 {
        match self {
            Payload::Pupil(_) => 0,
            Payload::Beat(_) => 1,
            Payload::Gaze(_) => 2,
            Payload::Client(_) => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorEvent {
    pub t: Millis,
    pub payload: Payload,
}

impl From<PupilSample> for SensorEvent {
    fn from(s: PupilSample) -> Self {
        Self {
            t: s.t,
            payload: Payload::Pupil(s),
        }
    }
}

impl From<BeatSample> for SensorEvent {
    fn from(s: BeatSample) -> Self {
        Self {
            t: s.t,
            payload: Payload::Beat(s),
        }
    }
}

impl From<GazeSample> for SensorEvent {
    fn from(s: GazeSample) -> Self {
        Self {
            t: s.t,
            payload: Payload::Gaze(s),
        }
    }
}

/// Bounded re-sorting of slightly late samples.
///
/// Items are released once they trail the newest timestamp by at least the
/// tolerance; anything arriving later than that is rejected.
#[derive(Debug)]
pub struct ReorderBuffer<T> {
    tolerance: Millis,
    max_seen: Option<Millis>,
    seq: u64,
    pending: BTreeMap<(Millis, u64), T>,
}

impl<T> ReorderBuffer<T> {
    pub fn new(tolerance: Millis) -> Self {
        Self {
            tolerance,
            max_seen: None,
            seq: 0,
            pending: BTreeMap::new(),
        }
    }

    /// Returns `Err(max_seen)` when `t` is too late to be re-sorted.
    pub fn push(&mut self, t: Millis, item: T) -> Result<Vec<T>, Millis> {
        if let Some(max) = self.max_seen {
            if t + self.tolerance < max {
                return Err(max);
            }
        }
        let max = self.max_seen.map_or(t, |m| m.max(t));
        self.max_seen = Some(max);
        self.pending.insert((t, self.seq), item);
        self.seq += 1;

        let horizon = max.saturating_sub(self.tolerance);
        let mut out = Vec::new();
        while let Some(entry) = self.pending.first_entry() {
            if entry.key().0 > horizon {
                break;
            }
            out.push(entry.remove());
        }
        Ok(out)
    }

    pub fn finish(self) -> Vec<T> {
        self.pending.into_values().collect()
    }
}

fn csv_reader<R: Read>(source: R, expected: &'static str) -> Result<csv::Reader<R>, SignalError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let header = rdr.headers()?.iter().collect::<Vec<_>>().join(",");
    if header != expected {
        return Err(SignalError::Header {
            expected,
            found: header,
        });
    }
    Ok(rdr)
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, idx: usize, name: &str) -> Result<T, SignalError> {
    let line = rec.position().map_or(0, |p| p.line());
    let raw = rec.get(idx).ok_or_else(|| SignalError::Parse {
        line,
        message: format!("missing column `{name}`"),
    })?;
    raw.parse().map_err(|_| SignalError::Parse {
        line,
        message: format!("invalid {name} `{raw}`"),
    })
}

fn flag(rec: &csv::StringRecord, idx: usize) -> Result<bool, SignalError> {
    match rec.get(idx) {
        Some("1") => Ok(true),
        Some("0") => Ok(false),
        other => Err(SignalError::Parse {
            line: rec.position().map_or(0, |p| p.line()),
            message: format!("valid flag must be 0 or 1, got `{}`", other.unwrap_or("")),
        }),
    }
}

fn check_width(rec: &csv::StringRecord, width: usize) -> Result<(), SignalError> {
    if rec.len() != width {
        return Err(SignalError::Parse {
            line: rec.position().map_or(0, |p| p.line()),
            message: format!("expected {width} columns, found {}", rec.len()),
        });
    }
    Ok(())
}

/// Parses rows in file order through a [`ReorderBuffer`].
fn parse_rows<R, T, F>(source: R, header: &'static str, width: usize, mut row: F) -> Result<Vec<T>, SignalError>
where
    R: Read,
    F: FnMut(&csv::StringRecord) -> Result<(Millis, T), SignalError>,
{
    let mut rdr = csv_reader(source, header)?;
    let mut buf = ReorderBuffer::new(REORDER_TOLERANCE_MS);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        check_width(&rec, width)?;
        let (t, item) = row(&rec)?;
        let released = buf.push(t, item).map_err(|max_seen| SignalError::Ordering {
            line: rec.position().map_or(0, |p| p.line()),
            t,
            max_seen,
            tolerance: REORDER_TOLERANCE_MS,
        })?;
        out.extend(released);
    }
    out.extend(buf.finish());
    Ok(out)
}

pub const PUPIL_HEADER: &str = "t_ms,left_mm,right_mm,valid";
pub const BEATS_HEADER: &str = "t_ms,value";
pub const GAZE_HEADER: &str = "t_ms,line,valid";

/// Reads a `t_ms,left_mm,right_mm,valid` stream.
///
/// A row flagged valid must carry at least one finite, positive diameter.
pub fn parse_pupil_csv<R: Read>(source: R) -> Result<Vec<PupilSample>, SignalError> {
    parse_rows(source, PUPIL_HEADER, 4, |rec| {
        let t: Millis = field(rec, 0, "t_ms")?;
        let left: f64 = field(rec, 1, "left_mm")?;
        let right: f64 = field(rec, 2, "right_mm")?;
        let valid = flag(rec, 3)?;
        let sample = PupilSample::new(t, left, right, valid);
        if valid && sample.diameter().is_none() {
            return Err(SignalError::Parse {
                line: rec.position().map_or(0, |p| p.line()),
                message: "row marked valid has no usable diameter".into(),
            });
        }
        Ok((t, sample))
    })
}

/// Reads a `t_ms,value` cardiac stream, tagging every row with `kind`.
/// Out-of-range values are kept and flagged invalid.
pub fn parse_beats_csv<R: Read>(source: R, kind: BeatKind) -> Result<Vec<BeatSample>, SignalError> {
    parse_rows(source, BEATS_HEADER, 2, |rec| {
        let t: Millis = field(rec, 0, "t_ms")?;
        let value: f64 = field(rec, 1, "value")?;
        Ok((t, BeatSample::new(t, kind, value)))
    })
}

pub fn parse_gaze_csv<R: Read>(source: R) -> Result<Vec<GazeSample>, SignalError> {
    parse_rows(source, GAZE_HEADER, 3, |rec| {
        let t: Millis = field(rec, 0, "t_ms")?;
        let line: u32 = field(rec, 1, "line")?;
        let valid = flag(rec, 2)?;
        if valid && line < 1 {
            return Err(SignalError::Parse {
                line: rec.position().map_or(0, |p| p.line()),
                message: "gaze line must be >= 1".into(),
            });
        }
        Ok((t, GazeSample { t, line, valid }))
    })
}

#[derive(Deserialize, Serialize)]
struct ClientRow {
    t: Millis,
    #[serde(flatten)]
    event: ClientEvent,
}

/// Reads scripted participant actions, one JSON object per line:
/// `{"t": 301000, "event": "prompt_response", "prompt_id": 1, "accepted": true}`.
pub fn parse_client_events<R: Read>(mut source: R) -> Result<Vec<(Millis, ClientEvent)>, SignalError> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    let mut buf = ReorderBuffer::new(REORDER_TOLERANCE_MS);
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i as u64 + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let row: ClientRow = serde_json::from_str(raw).map_err(|e| SignalError::Parse {
            line,
            message: e.to_string(),
        })?;
        let t = row.t;
        let released = buf
            .push(t, (t, row.event))
            .map_err(|max_seen| SignalError::Ordering {
                line,
                t,
                max_seen,
                tolerance: REORDER_TOLERANCE_MS,
            })?;
        out.extend(released);
    }
    out.extend(buf.finish());
    Ok(out)
}

pub fn write_client_events<W: Write>(mut sink: W, events: &[(Millis, ClientEvent)]) -> Result<(), SignalError> {
    for (t, event) in events {
        let row = ClientRow {
            t: *t,
            event: event.clone(),
        };
        let line = serde_json::to_string(&row).map_err(std::io::Error::other)?;
        writeln!(sink, "{line}")?;
    }
    Ok(())
}

fn csv_writer<W: Write>(sink: W, header: &str) -> Result<csv::Writer<W>, SignalError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(sink);
    w.write_record(header.split(','))?;
    Ok(w)
}

pub fn write_pupil_csv<W: Write>(sink: W, samples: &[PupilSample]) -> Result<(), SignalError> {
    let mut w = csv_writer(sink, PUPIL_HEADER)?;
    for s in samples {
        w.write_record([
            s.t.to_string(),
            s.left_mm.to_string(),
            s.right_mm.to_string(),
            u8::from(s.valid).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_beats_csv<W: Write>(sink: W, samples: &[BeatSample]) -> Result<(), SignalError> {
    let mut w = csv_writer(sink, BEATS_HEADER)?;
    for s in samples {
        w.write_record([s.t.to_string(), s.value.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_gaze_csv<W: Write>(sink: W, samples: &[GazeSample]) -> Result<(), SignalError> {
    let mut w = csv_writer(sink, GAZE_HEADER)?;
    for s in samples {
        w.write_record([s.t.to_string(), s.line.to_string(), u8::from(s.valid).to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Merges individually time-ordered streams into one totally ordered
/// sequence. Ties on `t` are broken by payload rank
/// (pupil < beat < gaze < client), then by stream position in `streams`,
/// then by position within the stream.
pub fn merge_streams(streams: Vec<Vec<SensorEvent>>) -> Result<Vec<SensorEvent>, SignalError> {
    for (stream, events) in streams.iter().enumerate() {
        if let Some(position) = events.windows(2).position(|w| w[1].t < w[0].t) {
            return Err(SignalError::StreamOrder {
                stream,
                position: position + 1,
            });
        }
    }
    let mut merged: Vec<SensorEvent> = streams.into_iter().flatten().collect();
    // stable: equal keys keep stream-then-position order
    merged.sort_by_key(|e| (e.t, e.payload.rank()));
    Ok(merged)
}
