use std::collections::BTreeSet;

use rayon::prelude::*;

use super::candidates::extract_candidates;
use super::forest::LabeledRow;
use super::{unit_seed, GazeConfig};
use crate::error::{Error, Result};
use crate::media_io::{Frame, FrameSource, Manifest, TraceSet, YuvFile};
use crate::sphere::{angular_distance, SphereDirection};

/// Labeled rows from one sequence: at every frame `t` each subject's
/// candidates are labeled against the same subject's direction at `t + 1`.
pub fn training_rows_for_sequence<S: FrameSource>(
    sequence_id: &str,
    frames: &mut S,
    fps: f64,
    traces: &TraceSet,
    seed: u64,
    config: &GazeConfig,
) -> Result<Vec<LabeledRow>> {
    config.validate()?;
    let frame_count = frames.frame_count();
    let subjects: Vec<&str> = traces
        .grouped()
        .keys()
        .filter(|(_, seq)| *seq == sequence_id)
        .map(|(subj, _)| *subj)
        .collect();
    let per_frame: Vec<Vec<Option<SphereDirection>>> = subjects
        .iter()
        .map(|s| traces.directions_per_frame(s, sequence_id, fps, frame_count))
        .collect();

    let mut rows = Vec::new();
    let mut cached: Option<(usize, Frame)> = None;
    let load = |frames: &mut S, cached: &mut Option<(usize, Frame)>, t: usize| -> Result<Frame> {
        match cached {
            Some((i, f)) if *i == t => Ok(f.clone()),
            _ => frames.read_frame(t),
        }
    };
    for t in 0..frame_count.saturating_sub(1) {
        let pairs: Vec<(usize, SphereDirection, SphereDirection)> = per_frame
            .iter()
            .enumerate()
            .filter_map(|(k, dirs)| Some((k, dirs[t]?, dirs[t + 1]?)))
            .collect();
        if pairs.is_empty() {
            continue;
        }
        let frame = load(frames, &mut cached, t)?;
        let previous = if t > 0 {
            Some(load(frames, &mut cached, t - 1)?)
        } else {
            None
        };
        let labeled: Vec<Vec<LabeledRow>> = pairs
            .par_iter()
            .map(|&(k, now, next)| {
                let s = unit_seed(seed, &[sequence_id, subjects[k]], t as u64);
                let cands = extract_candidates(&frame, previous.as_ref(), now, s, config)?;
                let nearest = cands
                    .iter()
                    .enumerate()
                    .map(|(i, c)| (i, angular_distance(c.direction, next)))
                    .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
                Ok(cands
                    .iter()
                    .enumerate()
                    .map(|(i, c)| LabeledRow {
                        features: c.features.expect("extracted candidates carry features"),
                        positive: i == nearest.0 && nearest.1 <= config.positive_threshold_deg,
                    })
                    .collect())
            })
            .collect::<Result<_>>()?;
        rows.extend(labeled.into_iter().flatten());
        cached = Some((t, frame));
    }
    Ok(rows)
}

/// Training rows over every manifest sequence that has traces.
///
/// Fails when traces name sequences absent from the manifest, or when no
/// manifest sequence has traces at all.
pub fn build_training_set(
    manifest: &Manifest,
    traces: &TraceSet,
    seed: u64,
    config: &GazeConfig,
) -> Result<Vec<LabeledRow>> {
    let grouped = traces.grouped();
    if grouped.is_empty() {
        return Err(Error::data("no traces to train on"));
    }
    let missing: Vec<String> = grouped
        .keys()
        .filter(|(_, seq)| manifest.get(seq).is_none())
        .map(|(subj, seq)| format!("({subj}, {seq})"))
        .collect();
    if !missing.is_empty() {
        return Err(Error::data(format!(
            "traces reference sequences missing from the manifest: {}",
            missing.join(", ")
        )));
    }
    let traced: BTreeSet<&str> = grouped.keys().map(|(_, seq)| *seq).collect();
    let mut rows = Vec::new();
    for entry in manifest.sequences() {
        if !traced.contains(entry.sequence_id.as_str()) {
            continue;
        }
        let mut file = YuvFile::open(&entry.path, entry.width, entry.height)?;
        if file.frame_count() < entry.frame_count {
            return Err(Error::data(format!(
                "{}: manifest lists {} frames but file holds {}",
                entry.sequence_id,
                entry.frame_count,
                file.frame_count()
            )));
        }
        let mut frames = Truncated {
            inner: &mut file,
            count: entry.frame_count,
        };
        rows.extend(training_rows_for_sequence(
            &entry.sequence_id,
            &mut frames,
            entry.fps,
            traces,
            seed,
            config,
        )?);
    }
    Ok(rows)
}

/// Limits a source to its first `count` frames.
pub(crate) struct Truncated<'a, S: FrameSource> {
    pub inner: &'a mut S,
    pub count: usize,
}

impl<S: FrameSource> FrameSource for Truncated<'_, S> {
    fn frame_count(&self) -> usize {
        self.count.min(self.inner.frame_count())
    }

    fn read_frame(&mut self, index: usize) -> Result<Frame> {
        if index >= self.count {
            return Err(Error::arg(format!("frame {index} out of range ({} frames)", self.count)));
        }
        self.inner.read_frame(index)
    }
}
