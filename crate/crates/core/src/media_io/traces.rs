//! Viewing-direction traces.
//!
//! File layout: a mandatory first line `# sample_rate=<samples per second>`,
//! then a CSV header `subject_id,sequence_id,sample_index,longitude_deg,latitude_deg`
//! and one row per sample.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere::SphereDirection;

const SAMPLE_RATE_PREFIX: &str = "# sample_rate=";

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub subject_id: String,
    pub sequence_id: String,
    pub sample_index: u64,
    pub direction: SphereDirection,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceSet {
    records: Vec<TraceRecord>,
    sample_rate: f64,
}

#[derive(Serialize, Deserialize)]
struct TraceRow {
    subject_id: String,
    sequence_id: String,
    sample_index: u64,
    longitude_deg: f64,
    latitude_deg: f64,
}

impl TraceSet {
    pub fn new(records: Vec<TraceRecord>, sample_rate: f64) -> Result<Self> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::arg(format!(
                "sample rate must be positive, got {sample_rate}"
            )));
        }
        let mut seen = BTreeSet::new();
        for r in &records {
            if !seen.insert((r.subject_id.as_str(), r.sequence_id.as_str(), r.sample_index)) {
                return Err(Error::data(format!(
                    "duplicate trace sample ({}, {}, {})",
                    r.subject_id, r.sequence_id, r.sample_index
                )));
            }
        }
        Ok(Self {
            records,
            sample_rate,
        })
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn subjects(&self) -> BTreeSet<&str> {
        self.records.iter().map(|r| r.subject_id.as_str()).collect()
    }

    pub fn sequences(&self) -> BTreeSet<&str> {
        self.records.iter().map(|r| r.sequence_id.as_str()).collect()
    }

    /// Samples grouped by (subject, sequence), each group ordered by sample index.
    pub fn grouped(&self) -> BTreeMap<(&str, &str), Vec<(u64, SphereDirection)>> {
        let mut groups: BTreeMap<(&str, &str), Vec<(u64, SphereDirection)>> = BTreeMap::new();
        for r in &self.records {
            groups
                .entry((r.subject_id.as_str(), r.sequence_id.as_str()))
                .or_default()
                .push((r.sample_index, r.direction));
        }
        for samples in groups.values_mut() {
            samples.sort_by_key(|(i, _)| *i);
        }
        groups
    }

    /// Ordered samples of one subject watching one sequence.
    pub fn samples(&self, subject: &str, sequence: &str) -> Vec<(u64, SphereDirection)> {
        let mut out: Vec<_> = self
            .records
            .iter()
            .filter(|r| r.subject_id == subject && r.sequence_id == sequence)
            .map(|r| (r.sample_index, r.direction))
            .collect();
        out.sort_by_key(|(i, _)| *i);
        out
    }

    /// Per-frame directions for one (subject, sequence) pair.
    ///
    /// Sample `k` belongs to frame `floor(k * fps / sample_rate)`; the earliest
    /// sample of each frame is used. Frames without samples are `None`.
    pub fn directions_per_frame(
        &self,
        subject: &str,
        sequence: &str,
        fps: f64,
        frame_count: usize,
    ) -> Vec<Option<SphereDirection>> {
        let mut out = vec![None; frame_count];
        for (k, d) in self.samples(subject, sequence) {
            let frame = frame_of_sample(k, fps, self.sample_rate);
            if frame < frame_count && out[frame].is_none() {
                out[frame] = Some(d);
            }
        }
        out
    }
}

/// Frame ordinal a trace sample falls on.
pub fn frame_of_sample(sample_index: u64, fps: f64, sample_rate: f64) -> usize {
    (sample_index as f64 * fps / sample_rate).floor() as usize
}

pub fn load_traces(path: impl AsRef<Path>) -> Result<TraceSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_traces(&text, &path.display().to_string())
}

/// Parses trace text; `origin` names the source in error messages.
pub fn parse_traces(text: &str, origin: &str) -> Result<TraceSet> {
    let (first, rest) = text.split_once('\n').unwrap_or((text, ""));
    let sample_rate = first
        .trim()
        .strip_prefix(SAMPLE_RATE_PREFIX)
        .ok_or_else(|| Error::Parse {
            path: origin.to_string(),
            line: 1,
            message: format!("expected `{SAMPLE_RATE_PREFIX}<rate>` header line"),
        })?
        .trim()
        .parse::<f64>()
        .map_err(|e| Error::Parse {
            path: origin.to_string(),
            line: 1,
            message: format!("bad sample rate: {e}"),
        })?;

    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(rest.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse {
            path: origin.to_string(),
            line: 2,
            message: e.to_string(),
        })?
        .clone();
    let mut records = Vec::new();
    for raw in reader.records() {
        // +1 for the sample-rate line that precedes the CSV body.
        let raw = raw.map_err(|e| Error::Parse {
            path: origin.to_string(),
            line: e.position().map(|p| p.line()).unwrap_or(0) + 1,
            message: e.to_string(),
        })?;
        let line = raw.position().map(|p| p.line()).unwrap_or(0) + 1;
        let row: TraceRow = raw.deserialize(Some(&headers)).map_err(|e| Error::Parse {
            path: origin.to_string(),
            line,
            message: e.to_string(),
        })?;
        let direction =
            SphereDirection::new(row.longitude_deg, row.latitude_deg).map_err(|e| Error::Range {
                path: origin.to_string(),
                line,
                message: e.to_string(),
            })?;
        records.push(TraceRecord {
            subject_id: row.subject_id,
            sequence_id: row.sequence_id,
            sample_index: row.sample_index,
            direction,
        });
    }
    TraceSet::new(records, sample_rate)
}

pub fn write_traces<W: Write>(traces: &TraceSet, mut sink: W) -> Result<()> {
    writeln!(sink, "{SAMPLE_RATE_PREFIX}{}", traces.sample_rate)?;
    let mut writer = csv::Writer::from_writer(sink);
    for r in &traces.records {
        writer
            .serialize(TraceRow {
                subject_id: r.subject_id.clone(),
                sequence_id: r.sequence_id.clone(),
                sample_index: r.sample_index,
                longitude_deg: r.direction.longitude(),
                latitude_deg: r.direction.latitude(),
            })
            .map_err(|e| Error::data(e.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

pub fn save_traces(traces: &TraceSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_traces(traces, &mut buf)?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}
