use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Deserialize;

use super::candidates::{extract_candidates, Candidate};
use super::forest::ForestModel;
use super::{unit_seed, GazeConfig};
use crate::error::{Error, Result};
use crate::media_io::{parse_csv_rows, Frame, FrameSource};
use crate::sphere::{angular_distance, SphereDirection};

/// Maximum-posterior candidate; ties go to the one nearest `current`, then to list order.
pub fn predict_direction(
    model: &ForestModel,
    candidates: &[Candidate],
    current: SphereDirection,
) -> Result<SphereDirection> {
    let mut best: Option<(f64, f64, SphereDirection)> = None;
    for c in candidates {
        let features = c
            .features
            .as_ref()
            .ok_or_else(|| Error::arg("candidate without features"))?;
        let g = model.posterior(features);
        let d = angular_distance(current, c.direction);
        let better = match best {
            None => true,
            Some((bg, bd, _)) => g > bg || (g == bg && d < bd),
        };
        if better {
            best = Some((g, d, c.direction));
        }
    }
    best.map(|b| b.2).ok_or_else(|| Error::arg("no candidates to choose from"))
}

/// One simulated viewing direction per frame.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    directions: Vec<SphereDirection>,
}

impl Trajectory {
    pub fn new(directions: Vec<SphereDirection>) -> Result<Self> {
        if directions.is_empty() {
            return Err(Error::arg("trajectory needs at least one frame"));
        }
        Ok(Self { directions })
    }

    pub fn directions(&self) -> &[SphereDirection] {
        &self.directions
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    /// `frame_index,longitude_deg,latitude_deg` rows.
    pub fn write_csv<W: Write>(&self, mut sink: W) -> Result<()> {
        writeln!(sink, "frame_index,longitude_deg,latitude_deg")?;
        for (i, d) in self.directions.iter().enumerate() {
            writeln!(sink, "{i},{},{}", d.longitude(), d.latitude())?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        fs::write(path, buf).map_err(|e| Error::io(path, e))
    }
}

#[derive(Deserialize)]
struct TrajectoryRow {
    frame_index: usize,
    longitude_deg: f64,
    latitude_deg: f64,
}

pub fn parse_trajectory(text: &str, origin: &str) -> Result<Trajectory> {
    let rows: Vec<TrajectoryRow> = parse_csv_rows(text, origin)?;
    let mut directions = Vec::with_capacity(rows.len());
    for (i, row) in rows.into_iter().enumerate() {
        if row.frame_index != i {
            return Err(Error::data(format!(
                "{origin}: expected frame_index {i}, found {}",
                row.frame_index
            )));
        }
        directions.push(SphereDirection::new(row.longitude_deg, row.latitude_deg)?);
    }
    Trajectory::new(directions)
}

pub fn load_trajectory(path: impl AsRef<Path>) -> Result<Trajectory> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trajectory(&text, &path.display().to_string())
}

/// Simulates one viewer: start at the front center, then repeatedly move to
/// the predicted direction for the next frame.
pub fn predict_trajectory<S: FrameSource>(
    frames: &mut S,
    model: &ForestModel,
    seed: u64,
    config: &GazeConfig,
) -> Result<Trajectory> {
    config.validate()?;
    let n = frames.frame_count();
    if n == 0 {
        return Err(Error::arg("cannot predict a trajectory for an empty sequence"));
    }
    let mut directions = vec![SphereDirection::FRONT];
    let mut previous: Option<Frame> = None;
    for t in 0..n - 1 {
        let frame = frames.read_frame(t)?;
        let current = directions[t];
        let cands = extract_candidates(&frame, previous.as_ref(), current, unit_seed(seed, &[], t as u64), config)?;
        directions.push(predict_direction(model, &cands, current)?);
        previous = Some(frame);
    }
    Trajectory::new(directions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaze::{FeatureVector, ForestParams, Node, Tree};

    fn cand(lon: f64, marker: f64) -> Candidate {
        Candidate {
            direction: SphereDirection::new(lon, 0.0).unwrap(),
            viewport_point: (0.0, 0.0),
            spread: 1.0,
            features: Some(FeatureVector::from_values([marker, 0.0, 0.0, 0.0, 0.0]).unwrap()),
        }
    }

    /// Single tree whose posterior for feature 0 = m is looked up from `g` by rank.
    fn lookup_model(g: &[f64]) -> ForestModel {
        let mut nodes = Vec::new();
        build(&mut nodes, g, 0);
        ForestModel::new(vec![Tree::new(nodes).unwrap()], ForestParams::default()).unwrap()
    }

    fn build(nodes: &mut Vec<Node>, g: &[f64], offset: usize) -> usize {
        let idx = nodes.len();
        if g.len() == 1 {
            nodes.push(Node::Leaf { posterior: g[0] });
            return idx;
        }
        nodes.push(Node::Leaf { posterior: 0.0 });
        let mid = g.len() / 2;
        let left = build(nodes, &g[..mid], offset);
        let right = build(nodes, &g[mid..], offset + mid);
        nodes[idx] = Node::Split {
            feature: 0,
            threshold: (offset + mid) as f64 - 0.5,
            left,
            right,
        };
        idx
    }

    #[test]
    fn single_candidate() {
        let m = lookup_model(&[0.3]);
        let d = predict_direction(&m, &[cand(12.0, 0.0)], SphereDirection::FRONT).unwrap();
        assert_eq!(d.longitude(), 12.0);
    }

    #[test]
    fn argmax() {
        let m = lookup_model(&[0.2, 0.9, 0.4]);
        let cands = [cand(1.0, 0.0), cand(2.0, 1.0), cand(3.0, 2.0)];
        let d = predict_direction(&m, &cands, SphereDirection::FRONT).unwrap();
        assert_eq!(d.longitude(), 2.0);
    }

    #[test]
    fn tie_prefers_nearer() {
        let m = lookup_model(&[0.5, 0.5]);
        let cands = [cand(50.0, 0.0), cand(5.0, 1.0)];
        let d = predict_direction(&m, &cands, SphereDirection::FRONT).unwrap();
        assert_eq!(d.longitude(), 5.0);
    }

    #[test]
    fn empty_or_featureless() {
        let m = lookup_model(&[0.5]);
        assert!(predict_direction(&m, &[], SphereDirection::FRONT).is_err());
        let mut c = cand(0.0, 0.0);
        c.features = None;
        assert!(predict_direction(&m, &[c], SphereDirection::FRONT).is_err());
    }

    #[test]
    fn one_frame_sequence() {
        let m = lookup_model(&[0.5]);
        let mut frames = vec![Frame::filled(64, 32, 0, 128, 128).unwrap()];
        let cfg = GazeConfig { viewport_size: 64, ..GazeConfig::default() };
        let t = predict_trajectory(&mut frames, &m, 0, &cfg).unwrap();
        assert_eq!(t.directions(), &[SphereDirection::FRONT]);
    }

    #[test]
    fn trajectory_csv_round_trip() {
        let t = Trajectory::new(vec![SphereDirection::FRONT, SphereDirection::new(-12.5, 3.25).unwrap()]).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("frame_index,longitude_deg,latitude_deg\n0,0,0\n"));
        assert_eq!(parse_trajectory(&text, "t").unwrap(), t);
    }
}
