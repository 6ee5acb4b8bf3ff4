//! From raw opinion scores to difference mean opinion scores.
//!
//! Raw scores become per-subject standardized difference scores, outlying
//! subjects are dropped, the rest are rescaled to [0, 100] and averaged into
//! an overall DMOS per sequence. Viewing traces split that average by the six
//! cube-map regions each subject actually looked at.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::media_io::{ScoreTable, TraceSet};
use crate::sphere::{region_of, Region, SphereDirection};

/// Written in place of a regional DMOS that no subject qualifies for.
pub const INVALID_MARKER: &str = "---";
pub const DEFAULT_REGION_THRESHOLD: f64 = 1.0 / 6.0;
pub const DEFAULT_DISCARD_SECONDS: f64 = 1.0;
const OUTLIER_SIGMAS: f64 = 2.0;
const OUTLIER_FRACTION: f64 = 0.05;
const BOUNDARY_TOL: f64 = 1e-12;

/// `subject → sequence → value`.
pub type SubjectTable = BTreeMap<String, BTreeMap<String, f64>>;

/// `d_ij = S_ref − S_ij` for every impaired sequence a subject rated.
pub fn difference_scores(scores: &ScoreTable) -> Result<SubjectTable> {
    let mut raw: BTreeMap<(&str, &str), f64> = BTreeMap::new();
    for e in scores.entries() {
        raw.insert((e.subject_id.as_str(), e.sequence_id.as_str()), e.raw_score);
    }
    let mut out = SubjectTable::new();
    for e in scores.entries() {
        let Some(reference) = scores.reference_of().get(&e.sequence_id) else {
            continue;
        };
        let s_ref = raw
            .get(&(e.subject_id.as_str(), reference.as_str()))
            .ok_or_else(|| {
                Error::data(format!(
                    "no reference score for subject {} on {} (reference of {})",
                    e.subject_id, reference, e.sequence_id
                ))
            })?;
        out.entry(e.subject_id.clone())
            .or_default()
            .insert(e.sequence_id.clone(), s_ref - e.raw_score);
    }
    Ok(out)
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Standardized scores plus the subjects removed by outlier screening.
#[derive(Clone, Debug, PartialEq)]
pub struct ZScoreTable {
    z: SubjectTable,
    rejected: BTreeMap<String, f64>,
}

impl ZScoreTable {
    /// Retained subjects' z-scores.
    pub fn z(&self) -> &SubjectTable {
        &self.z
    }

    pub fn get(&self, subject: &str, sequence: &str) -> Option<f64> {
        self.z.get(subject)?.get(sequence).copied()
    }

    /// Rejected subjects with the fraction of their scores found outlying.
    pub fn rejected(&self) -> &BTreeMap<String, f64> {
        &self.rejected
    }

    pub fn rescaled(&self, subject: &str, sequence: &str) -> Option<f64> {
        self.get(subject, sequence).map(rescale)
    }

    /// Sequences rated by at least one retained subject.
    pub fn sequences(&self) -> Vec<&str> {
        let mut seqs: Vec<&str> = self
            .z
            .values()
            .flat_map(|m| m.keys().map(String::as_str))
            .collect();
        seqs.sort_unstable();
        seqs.dedup();
        seqs
    }
}

/// `Z_ij = (d_ij − μ_i) / σ_i` with the sample (n − 1) standard deviation per subject.
pub fn z_scores(d: &SubjectTable) -> Result<ZScoreTable> {
    let mut z = SubjectTable::new();
    for (subject, row) in d {
        if row.len() < 2 {
            return Err(Error::data(format!(
                "subject {subject} rated {} impaired sequence(s); at least 2 needed",
                row.len()
            )));
        }
        let values: Vec<f64> = row.values().copied().collect();
        let (mu, sigma) = mean_std(&values);
        if !(sigma > 0.0) {
            return Err(Error::data(format!(
                "subject {subject} gave identical difference scores; cannot standardize"
            )));
        }
        z.insert(
            subject.clone(),
            row.iter().map(|(seq, v)| (seq.clone(), (v - mu) / sigma)).collect(),
        );
    }
    Ok(ZScoreTable {
        z,
        rejected: BTreeMap::new(),
    })
}

/// Population used for the mean and spread a z-score is compared against.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectionScope {
    /// All subjects' z-scores on the same sequence.
    #[default]
    PerSequence,
    /// Every z-score in the panel.
    Panel,
}

/// Drops subjects with more than 5% of their z-scores beyond 2σ of the mean.
pub fn reject_subjects(table: &ZScoreTable, scope: RejectionScope) -> Result<ZScoreTable> {
    if table.z.len() < 2 {
        return Err(Error::data("subject screening needs at least 2 subjects"));
    }
    let mut per_sequence: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for row in table.z.values() {
        for (seq, &v) in row {
            per_sequence.entry(seq.as_str()).or_default().push(v);
        }
    }
    let stats: BTreeMap<&str, (f64, f64)> = match scope {
        RejectionScope::PerSequence => per_sequence
            .iter()
            .filter(|(_, v)| v.len() >= 2)
            .map(|(s, v)| (*s, mean_std(v)))
            .collect(),
        RejectionScope::Panel => {
            let all: Vec<f64> = per_sequence.values().flatten().copied().collect();
            let ms = mean_std(&all);
            per_sequence.keys().map(|s| (*s, ms)).collect()
        }
    };

    let mut kept = SubjectTable::new();
    let mut rejected = table.rejected.clone();
    for (subject, row) in &table.z {
        let outside = row
            .iter()
            .filter(|(seq, &v)| {
                stats
                    .get(seq.as_str())
                    .is_some_and(|&(mu, sigma)| (v - mu).abs() > OUTLIER_SIGMAS * sigma + BOUNDARY_TOL)
            })
            .count();
        let fraction = outside as f64 / row.len() as f64;
        if fraction > OUTLIER_FRACTION {
            rejected.insert(subject.clone(), fraction);
        } else {
            kept.insert(subject.clone(), row.clone());
        }
    }
    if kept.is_empty() {
        return Err(Error::data("every subject was rejected; the panel is degenerate"));
    }
    Ok(ZScoreTable { z: kept, rejected })
}

/// `Z' = 100 (Z + 3) / 6`.
pub fn rescale(z: f64) -> f64 {
    100.0 * (z + 3.0) / 6.0
}

/// Mean rescaled score per sequence over retained subjects.
pub fn o_dmos(table: &ZScoreTable) -> Result<BTreeMap<String, f64>> {
    let mut acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for row in table.z.values() {
        for (seq, &z) in row {
            let e = acc.entry(seq.clone()).or_insert((0.0, 0));
            e.0 += rescale(z);
            e.1 += 1;
        }
    }
    if acc.is_empty() {
        return Err(Error::data("no valid subjects left to average"));
    }
    Ok(acc.into_iter().map(|(s, (sum, n))| (s, sum / n as f64)).collect())
}

/// Per-region sample counts of one subject on one sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RegionCounts {
    pub counts: [u64; 6],
}

impl RegionCounts {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Fractions in [`Region::ALL`] order.
    pub fn fractions(&self) -> [f64; 6] {
        let total = self.total() as f64;
        self.counts.map(|c| c as f64 / total)
    }
}

/// Counts samples per region after dropping the first `discard_seconds`.
pub fn region_frequencies(
    samples: &[(u64, SphereDirection)],
    sample_rate: f64,
    discard_seconds: f64,
) -> Result<RegionCounts> {
    let mut counts = [0u64; 6];
    for &(k, d) in samples {
        if (k as f64) / sample_rate < discard_seconds {
            continue;
        }
        counts[region_of(d).index()] += 1;
    }
    if counts.iter().sum::<u64>() == 0 {
        return Err(Error::data(format!(
            "no trace samples left after discarding the first {discard_seconds} s"
        )));
    }
    Ok(RegionCounts { counts })
}

/// Overall DMOS plus one entry per region (`None` when no subject qualifies).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VDmosVector {
    pub o_dmos: f64,
    pub regional: [Option<f64>; 6],
}

impl VDmosVector {
    pub fn region(&self, r: Region) -> Option<f64> {
        self.regional[r.index()]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VDmosOptions {
    /// A subject counts for a region when its viewing frequency there exceeds this.
    pub threshold: f64,
    pub discard_seconds: f64,
    pub rejection: RejectionScope,
}

impl Default for VDmosOptions {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_REGION_THRESHOLD,
            discard_seconds: DEFAULT_DISCARD_SECONDS,
            rejection: RejectionScope::PerSequence,
        }
    }
}

/// Regional DMOS per sequence from screened z-scores and the subjects' traces on that sequence.
///
/// Subjects without any trace on a sequence contribute to its overall DMOS only.
pub fn v_dmos(
    table: &ZScoreTable,
    traces: &TraceSet,
    options: &VDmosOptions,
) -> Result<BTreeMap<String, VDmosVector>> {
    let overall = o_dmos(table)?;
    let grouped = traces.grouped();
    let mut out = BTreeMap::new();
    for (seq, &o) in &overall {
        let mut sums = [(0.0, 0usize); 6];
        for (subject, row) in &table.z {
            let Some(&z) = row.get(seq) else { continue };
            let Some(samples) = grouped.get(&(subject.as_str(), seq.as_str())) else {
                continue;
            };
            let freq = region_frequencies(samples, traces.sample_rate(), options.discard_seconds)
                .map_err(|e| Error::data(format!("subject {subject}, sequence {seq}: {e}")))?
                .fractions();
            for (slot, f) in sums.iter_mut().zip(freq) {
                if f > options.threshold {
                    slot.0 += rescale(z);
                    slot.1 += 1;
                }
            }
        }
        out.insert(
            seq.clone(),
            VDmosVector {
                o_dmos: o,
                regional: sums.map(|(s, n)| (n > 0).then(|| s / n as f64)),
            },
        );
    }
    Ok(out)
}

/// Full pipeline: differences, z-scores, screening, V-DMOS.
pub fn dmos_pipeline(
    scores: &ScoreTable,
    traces: &TraceSet,
    options: &VDmosOptions,
) -> Result<(ZScoreTable, BTreeMap<String, VDmosVector>)> {
    let z = z_scores(&difference_scores(scores)?)?;
    let screened = if z.z.len() >= 2 {
        reject_subjects(&z, options.rejection)?
    } else {
        z
    };
    let v = v_dmos(&screened, traces, options)?;
    Ok((screened, v))
}

/// `sequence_id,o_dmos,front,left,back,right,top,bottom` with `---` for invalid entries.
pub fn v_dmos_csv(rows: &BTreeMap<String, VDmosVector>) -> String {
    let mut out = String::from("sequence_id,o_dmos");
    for r in Region::ALL {
        out.push(',');
        out.push_str(r.name());
    }
    out.push('\n');
    for (seq, v) in rows {
        write!(out, "{seq},{}", v.o_dmos).unwrap();
        for entry in v.regional {
            match entry {
                Some(x) => write!(out, ",{x}").unwrap(),
                None => write!(out, ",{INVALID_MARKER}").unwrap(),
            }
        }
        out.push('\n');
    }
    out
}
