//! Timestamped telegram captures and their JSON Lines form.
//!
//! One record per line: `{"t":12.34,"seg":0,"raw":"bc1101..."}`.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::SegmentId;
use crate::codec::{hex_compact, parse_hex, CodecError, Telegram};

#[derive(Debug, Error)]
pub enum CaptureError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: timestamp {t} precedes the previous record")]
    NonMonotone { line: usize, t: f64 },
    #[error("line {line}: {source}")]
    Undecodable { line: usize, source: CodecError },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Origin {
    Attack,
    NoAttack,
    Unlabeled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaptureRecord {
    pub timestamp: f64,
    pub segment: SegmentId,
    pub raw: Vec<u8>,
}

impl CaptureRecord {
    pub fn telegram(&self) -> Result<Telegram, CodecError> {
        Telegram::decode(&self.raw)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonRecord {
    t: f64,
    seg: u8,
    raw: String,
}

/// Timestamps are stored at microsecond resolution so the JSONL form
/// reproduces them exactly.
pub fn quantize_time(t: f64) -> f64 {
    (t * 1e6).round() / 1e6
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaptureSeries {
    pub origin: Origin,
    pub records: Vec<CaptureRecord>,
    /// End of the observation period; defaults to the last timestamp.
    pub end: Option<f64>,
}

impl CaptureSeries {
    pub fn new(origin: Origin, records: Vec<CaptureRecord>) -> Self {
        Self { origin, records, end: None }
    }

    pub fn with_end(mut self, end: f64) -> Self {
        self.end = Some(end);
        self
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn timestamps(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.timestamp)
    }

    pub fn observation_end(&self) -> f64 {
        self.end.unwrap_or_else(|| self.records.last().map_or(0.0, |r| r.timestamp))
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<(), CaptureError> {
        for r in &self.records {
            let line = serde_json::to_string(&JsonRecord { t: r.timestamp, seg: r.segment.0, raw: hex_compact(&r.raw) })
                .map_err(|e| CaptureError::Parse { line: 0, msg: e.to_string() })?;
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn to_jsonl_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }

    /// Reads a capture, checking ordering and that every frame decodes.
    pub fn read_jsonl<R: BufRead>(reader: R, origin: Origin) -> Result<Self, CaptureError> {
        let mut records = Vec::new();
        let mut last = f64::NEG_INFINITY;
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let n = i + 1;
            let rec: JsonRecord =
                serde_json::from_str(&line).map_err(|e| CaptureError::Parse { line: n, msg: e.to_string() })?;
            if rec.t < last {
                return Err(CaptureError::NonMonotone { line: n, t: rec.t });
            }
            last = rec.t;
            let raw = parse_hex(&rec.raw).map_err(|e| CaptureError::Parse { line: n, msg: e.to_string() })?;
            Telegram::decode(&raw).map_err(|source| CaptureError::Undecodable { line: n, source })?;
            records.push(CaptureRecord { timestamp: rec.t, segment: SegmentId(rec.seg), raw });
        }
        Ok(Self::new(origin, records))
    }

    /// Records on one segment only.
    pub fn filter_segment(&self, segment: SegmentId) -> Self {
        Self {
            origin: self.origin,
            records: self.records.iter().filter(|r| r.segment == segment).cloned().collect(),
            end: self.end,
        }
    }
}
