//! Raw eye stream records and CSV ingestion/emission.
//!
//! CSV schema (one record per row, strictly increasing timestamps):
//! `timestamp_ms,gaze_x,gaze_y,gaze_dir_x,gaze_dir_y,pupil_mm,eye_pos_x,
//! eye_pos_y,eye_pos_z,event_type`. An empty `pupil_mm` field is a missing
//! pupil sample. The cleaned stream is written with the same columns plus a
//! trailing `pupil_fluct`.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventType {
    Fixation,
    Saccade,
    Blink,
}

impl fmt::Display for EventType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EventType::Fixation => "fixation",
            EventType::Saccade => "saccade",
            EventType::Blink => "blink",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for EventType {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "fixation" => Ok(EventType::Fixation),
            "saccade" => Ok(EventType::Saccade),
            "blink" => Ok(EventType::Blink),
            other => Err(format!("unknown event type `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EyeRecord {
    pub timestamp_ms: f64,
    pub gaze: [f64; 2],
    pub gaze_dir: [f64; 2],
    pub pupil_mm: Option<f64>,
    pub eye_pos: [f64; 3],
    pub event: EventType,
    /// Pupil first difference; populated by the fluctuation stage.
    pub pupil_fluct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RawEyeStream {
    pub records: Vec<EyeRecord>,
}

impl RawEyeStream {
    pub fn new(records: Vec<EyeRecord>) -> Result<Self> {
        let stream = Self { records };
        stream.validate()?;
        Ok(stream)
    }

    pub fn validate(&self) -> Result<()> {
        for pair in self.records.windows(2) {
            if pair[1].timestamp_ms <= pair[0].timestamp_ms {
                return Err(Error::Validation {
                    field: "timestamp_ms".into(),
                    reason: format!(
                        "timestamps must strictly increase, got {} then {}",
                        pair[0].timestamp_ms, pair[1].timestamp_ms
                    ),
                });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn has_missing_pupil(&self) -> bool {
        self.records.iter().any(|r| r.pupil_mm.is_none())
    }
}

const HEADER: [&str; 10] = [
    "timestamp_ms",
    "gaze_x",
    "gaze_y",
    "gaze_dir_x",
    "gaze_dir_y",
    "pupil_mm",
    "eye_pos_x",
    "eye_pos_y",
    "eye_pos_z",
    "event_type",
];

fn parse_f64(s: &str, line: usize, field: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| Error::MalformedRecord {
            line,
            field: field.to_string(),
            reason: e.to_string(),
        })
}

pub fn read_eye_csv(path: impl AsRef<Path>) -> Result<RawEyeStream> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path.as_ref())?;
    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let line = i + 2; // 1-based, after the header row
        let row = row.map_err(|e| Error::MalformedRecord {
            line,
            field: "<row>".into(),
            reason: e.to_string(),
        })?;
        if row.len() < 10 {
            return Err(Error::MalformedRecord {
                line,
                field: "<row>".into(),
                reason: format!("expected 10 columns, got {}", row.len()),
            });
        }
        let pupil_raw = row.get(5).unwrap_or("").trim();
        let pupil_mm = if pupil_raw.is_empty() {
            None
        } else {
            Some(parse_f64(pupil_raw, line, HEADER[5])?)
        };
        let event: EventType = row
            .get(9)
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|reason| Error::MalformedRecord {
                line,
                field: HEADER[9].to_string(),
                reason,
            })?;
        records.push(EyeRecord {
            timestamp_ms: parse_f64(row.get(0).unwrap_or(""), line, HEADER[0])?,
            gaze: [
                parse_f64(row.get(1).unwrap_or(""), line, HEADER[1])?,
                parse_f64(row.get(2).unwrap_or(""), line, HEADER[2])?,
            ],
            gaze_dir: [
                parse_f64(row.get(3).unwrap_or(""), line, HEADER[3])?,
                parse_f64(row.get(4).unwrap_or(""), line, HEADER[4])?,
            ],
            pupil_mm,
            eye_pos: [
                parse_f64(row.get(6).unwrap_or(""), line, HEADER[6])?,
                parse_f64(row.get(7).unwrap_or(""), line, HEADER[7])?,
                parse_f64(row.get(8).unwrap_or(""), line, HEADER[8])?,
            ],
            event,
            pupil_fluct: None,
        });
    }
    RawEyeStream::new(records)
}

/// Write a stream with the raw schema plus the `pupil_fluct` column (empty
/// when the fluctuation stage has not run).
pub fn write_eye_csv(stream: &RawEyeStream, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{},pupil_fluct", HEADER.join(","))?;
    for r in &stream.records {
        let pupil = r.pupil_mm.map_or(String::new(), |p| format!("{p}"));
        let fluct = r.pupil_fluct.map_or(String::new(), |p| format!("{p}"));
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.timestamp_ms,
            r.gaze[0],
            r.gaze[1],
            r.gaze_dir[0],
            r.gaze_dir[1],
            pupil,
            r.eye_pos[0],
            r.eye_pos[1],
            r.eye_pos[2],
            r.event,
            fluct
        )?;
    }
    w.flush()?;
    Ok(())
}
