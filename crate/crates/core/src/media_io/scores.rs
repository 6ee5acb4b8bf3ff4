//! Raw subjective scores (`subject_id,sequence_id,raw_score`) and the
//! impaired-to-reference map (`sequence_id,reference_id`).

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreEntry {
    pub subject_id: String,
    pub sequence_id: String,
    pub raw_score: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreTable {
    entries: Vec<ScoreEntry>,
    reference_of: BTreeMap<String, String>,
}

impl ScoreTable {
    pub fn new(entries: Vec<ScoreEntry>, reference_of: BTreeMap<String, String>) -> Result<Self> {
        let references: BTreeSet<&str> = reference_of.values().map(String::as_str).collect();
        let mut seen = BTreeSet::new();
        for e in &entries {
            if !(0.0..=100.0).contains(&e.raw_score) {
                return Err(Error::data(format!(
                    "score {} of ({}, {}) outside [0, 100]",
                    e.raw_score, e.subject_id, e.sequence_id
                )));
            }
            if !seen.insert((e.subject_id.as_str(), e.sequence_id.as_str())) {
                return Err(Error::data(format!(
                    "duplicate score for ({}, {})",
                    e.subject_id, e.sequence_id
                )));
            }
            if !reference_of.contains_key(&e.sequence_id)
                && !references.contains(e.sequence_id.as_str())
            {
                return Err(Error::data(format!(
                    "sequence {} is neither a reference nor mapped to one",
                    e.sequence_id
                )));
            }
        }
        Ok(Self {
            entries,
            reference_of,
        })
    }

    pub fn entries(&self) -> &[ScoreEntry] {
        &self.entries
    }

    pub fn reference_of(&self) -> &BTreeMap<String, String> {
        &self.reference_of
    }

    pub fn score(&self, subject: &str, sequence: &str) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.subject_id == subject && e.sequence_id == sequence)
            .map(|e| e.raw_score)
    }

    pub fn is_impaired(&self, sequence: &str) -> bool {
        self.reference_of.contains_key(sequence)
    }
}

#[derive(Deserialize)]
struct ScoreRow {
    subject_id: String,
    sequence_id: String,
    raw_score: f64,
}

#[derive(Deserialize)]
struct ReferenceRow {
    sequence_id: String,
    reference_id: String,
}

pub(crate) fn read_csv_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv_rows(&text, &path.display().to_string())
}

pub(crate) fn parse_csv_rows<T: for<'de> Deserialize<'de>>(text: &str, origin: &str) -> Result<Vec<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse {
            path: origin.to_string(),
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let mut rows = Vec::new();
    for raw in reader.records() {
        let raw = raw.map_err(|e| Error::Parse {
            path: origin.to_string(),
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = raw.position().map(|p| p.line()).unwrap_or(0);
        rows.push(raw.deserialize(Some(&headers)).map_err(|e| Error::Parse {
            path: origin.to_string(),
            line,
            message: e.to_string(),
        })?);
    }
    Ok(rows)
}

pub fn load_scores(scores: impl AsRef<Path>, references: impl AsRef<Path>) -> Result<ScoreTable> {
    let rows: Vec<ScoreRow> = read_csv_rows(scores.as_ref())?;
    let refs: Vec<ReferenceRow> = read_csv_rows(references.as_ref())?;
    build_table(rows, refs)
}

pub fn parse_scores(scores: &str, references: &str) -> Result<ScoreTable> {
    build_table(
        parse_csv_rows(scores, "scores")?,
        parse_csv_rows(references, "references")?,
    )
}

fn build_table(rows: Vec<ScoreRow>, refs: Vec<ReferenceRow>) -> Result<ScoreTable> {
    let mut reference_of = BTreeMap::new();
    for r in refs {
        if reference_of.insert(r.sequence_id.clone(), r.reference_id).is_some() {
            return Err(Error::data(format!(
                "sequence {} mapped to more than one reference",
                r.sequence_id
            )));
        }
    }
    let entries = rows
        .into_iter()
        .map(|r| ScoreEntry {
            subject_id: r.subject_id,
            sequence_id: r.sequence_id,
            raw_score: r.raw_score,
        })
        .collect();
    ScoreTable::new(entries, reference_of)
}
