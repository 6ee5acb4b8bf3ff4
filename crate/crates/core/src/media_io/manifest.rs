//! Sequence manifests.
//!
//! CSV columns: `sequence_id,path,width,height,frame_count,role,reference_id,fps`.
//! `role` is `reference` or `impaired`; `reference_id` is empty for references;
//! `fps` may be omitted (25). Relative paths resolve against the manifest's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::scores::read_csv_rows;
use crate::error::{Error, Result};

pub const DEFAULT_FPS: f64 = 25.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Reference,
    Impaired,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SequenceEntry {
    pub sequence_id: String,
    pub path: PathBuf,
    pub width: usize,
    pub height: usize,
    pub frame_count: usize,
    pub role: Role,
    pub reference_id: Option<String>,
    pub fps: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Manifest {
    sequences: Vec<SequenceEntry>,
}

#[derive(Deserialize)]
struct ManifestRow {
    sequence_id: String,
    path: String,
    width: usize,
    height: usize,
    frame_count: usize,
    role: Role,
    #[serde(default)]
    reference_id: Option<String>,
    #[serde(default)]
    fps: Option<f64>,
}

impl Manifest {
    /// Validates pairings and dimensions; paths are checked only by [`load_manifest`].
    pub fn new(sequences: Vec<SequenceEntry>) -> Result<Self> {
        let by_id: BTreeMap<&str, &SequenceEntry> = sequences
            .iter()
            .map(|s| (s.sequence_id.as_str(), s))
            .collect();
        if by_id.len() != sequences.len() {
            return Err(Error::data("manifest contains duplicate sequence ids"));
        }
        for s in &sequences {
            if !(s.fps.is_finite() && s.fps > 0.0) {
                return Err(Error::data(format!("{}: fps must be positive", s.sequence_id)));
            }
            match (s.role, &s.reference_id) {
                (Role::Impaired, None) => {
                    return Err(Error::data(format!(
                        "impaired sequence {} has no reference_id",
                        s.sequence_id
                    )))
                }
                (Role::Impaired, Some(r)) => {
                    let reference = by_id.get(r.as_str()).ok_or_else(|| {
                        Error::data(format!(
                            "{}: reference {} not in manifest",
                            s.sequence_id, r
                        ))
                    })?;
                    if (reference.width, reference.height) != (s.width, s.height) {
                        return Err(Error::data(format!(
                            "{} is {}x{} but its reference {} is {}x{}",
                            s.sequence_id, s.width, s.height, r, reference.width, reference.height
                        )));
                    }
                }
                (Role::Reference, _) => {}
            }
        }
        Ok(Self { sequences })
    }

    pub fn sequences(&self) -> &[SequenceEntry] {
        &self.sequences
    }

    pub fn get(&self, sequence_id: &str) -> Option<&SequenceEntry> {
        self.sequences.iter().find(|s| s.sequence_id == sequence_id)
    }
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let rows: Vec<ManifestRow> = read_csv_rows(path)?;
    let mut sequences = Vec::with_capacity(rows.len());
    for row in rows {
        let mut p = PathBuf::from(&row.path);
        if p.is_relative() {
            p = base.join(p);
        }
        if !p.exists() {
            return Err(Error::data(format!(
                "{}: video file {} not found",
                row.sequence_id,
                p.display()
            )));
        }
        sequences.push(SequenceEntry {
            sequence_id: row.sequence_id,
            path: p,
            width: row.width,
            height: row.height,
            frame_count: row.frame_count,
            role: row.role,
            reference_id: row.reference_id.filter(|r| !r.is_empty()),
            fps: row.fps.unwrap_or(DEFAULT_FPS),
        });
    }
    Manifest::new(sequences)
}
