//! Viewing-direction prediction: salient-region candidates inside the current
//! viewport, a random-forest scorer trained on recorded head traces, and
//! frame-by-frame trajectory simulation.

mod candidates;
mod features;
mod forest;
mod predict;
mod training;

pub use candidates::{
    candidates_from_saliency, extract_candidates, mean_shift, sample_points, Candidate, Cluster,
};
pub use features::{extract_features, FeatureVector, FEATURE_COUNT};
pub use forest::{
    forest_posterior, train_forest, ForestModel, ForestParams, LabeledRow, Node, Tree,
};
pub use predict::{load_trajectory, parse_trajectory, predict_direction, predict_trajectory, Trajectory};
pub use training::{build_training_set, training_rows_for_sequence};
pub(crate) use training::Truncated;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere::{DEFAULT_VIEWPORT_SIZE, MIN_VIEWPORT_SIZE};

/// Knobs shared by candidate extraction, training and prediction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GazeConfig {
    pub viewport_size: usize,
    pub sample_count: usize,
    /// Mean-shift bandwidth as a fraction of the viewport side.
    pub bandwidth_fraction: f64,
    /// Clusters holding less than this share of the samples yield no candidate.
    pub min_cluster_fraction: f64,
    /// A candidate within this many degrees of the next recorded direction is a positive.
    pub positive_threshold_deg: f64,
}

impl Default for GazeConfig {
    fn default() -> Self {
        Self {
            viewport_size: DEFAULT_VIEWPORT_SIZE,
            sample_count: 10_000,
            bandwidth_fraction: 0.1,
            min_cluster_fraction: 0.02,
            positive_threshold_deg: 15.0,
        }
    }
}

impl GazeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.viewport_size < MIN_VIEWPORT_SIZE {
            return Err(Error::arg(format!(
                "viewport size {} below minimum {MIN_VIEWPORT_SIZE}",
                self.viewport_size
            )));
        }
        if self.sample_count == 0 {
            return Err(Error::arg("sample count must be >= 1"));
        }
        if !(self.bandwidth_fraction > 0.0 && self.bandwidth_fraction.is_finite()) {
            return Err(Error::arg("bandwidth fraction must be > 0"));
        }
        if !(0.0..1.0).contains(&self.min_cluster_fraction) {
            return Err(Error::arg("minimum cluster fraction must be in [0, 1)"));
        }
        if !(self.positive_threshold_deg > 0.0) {
            return Err(Error::arg("positive threshold must be > 0"));
        }
        Ok(())
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth_fraction * self.viewport_size as f64
    }
}

pub(crate) fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(text: &str) -> u64 {
    text.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Seed for one unit of work, independent of scheduling order.
pub(crate) fn unit_seed(base: u64, labels: &[&str], index: u64) -> u64 {
    let mut s = splitmix(base);
    for l in labels {
        s = splitmix(s ^ fnv1a(l));
    }
    splitmix(s ^ index)
}
