//! Random-forest classifier over candidate feature vectors.
//!
//! Trees are CART trees grown on bootstrap resamples with Gini impurity; each
//! split considers a random subset of the features. A leaf stores the fraction
//! of positive training rows that reached it.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::{FeatureVector, FEATURE_COUNT};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Node {
    /// Rows with `features[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        posterior: f64,
    },
}

/// A binary tree stored as a flat node array rooted at index 0.
#[derive(Clone, Debug, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    /// Checks that children point forward, features exist, and posteriors are probabilities.
    pub fn new(nodes: Vec<Node>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Schema("tree has no nodes".into()));
        }
        for (i, node) in nodes.iter().enumerate() {
            match *node {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if feature >= FEATURE_COUNT {
                        return Err(Error::Schema(format!(
                            "node {i}: feature index {feature} out of range"
                        )));
                    }
                    if !threshold.is_finite() {
                        return Err(Error::Schema(format!("node {i}: non-finite threshold")));
                    }
                    for child in [left, right] {
                        if child <= i || child >= nodes.len() {
                            return Err(Error::Schema(format!(
                                "node {i}: child index {child} invalid"
                            )));
                        }
                    }
                }
                Node::Leaf { posterior } => {
                    if !(0.0..=1.0).contains(&posterior) {
                        return Err(Error::Schema(format!(
                            "node {i}: leaf posterior {posterior} outside [0, 1]"
                        )));
                    }
                }
            }
        }
        Ok(Self { nodes })
    }

    /// Single-leaf tree.
    pub fn constant(posterior: f64) -> Result<Self> {
        Self::new(vec![Node::Leaf { posterior }])
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Positive-class posterior of the leaf the features fall into.
    pub fn posterior(&self, features: &FeatureVector) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { posterior } => return posterior,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if features.values()[feature] <= threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestParams {
    pub tree_count: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub features_per_split: usize,
    pub seed: u64,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: bool,
}

fn default_bootstrap() -> bool {
    true
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            tree_count: 100,
            max_depth: 12,
            min_leaf: 5,
            features_per_split: 2,
            seed: 0,
            bootstrap: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForestModel {
    trees: Vec<Tree>,
    params: ForestParams,
}

impl ForestModel {
    pub fn new(trees: Vec<Tree>, params: ForestParams) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::Schema("forest needs at least one tree".into()));
        }
        Ok(Self { trees, params })
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn params(&self) -> &ForestParams {
        &self.params
    }

    pub fn tree_count(&self) -> usize {
        self.trees.len()
    }

    /// Averaged positive-class posterior over all trees.
    pub fn posterior(&self, features: &FeatureVector) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.posterior(features)).sum();
        sum / self.trees.len() as f64
    }
}

/// Free-function form of [`ForestModel::posterior`].
pub fn forest_posterior(model: &ForestModel, features: &FeatureVector) -> f64 {
    model.posterior(features)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LabeledRow {
    pub features: FeatureVector,
    pub positive: bool,
}

pub fn train_forest(rows: &[LabeledRow], params: &ForestParams) -> Result<ForestModel> {
    if params.tree_count == 0 {
        return Err(Error::arg("tree_count must be at least 1"));
    }
    if params.min_leaf == 0 {
        return Err(Error::arg("min_leaf must be at least 1"));
    }
    if params.features_per_split == 0 || params.features_per_split > FEATURE_COUNT {
        return Err(Error::arg(format!(
            "features_per_split must be in 1..={FEATURE_COUNT}"
        )));
    }
    let positives = rows.iter().filter(|r| r.positive).count();
    if positives == 0 || positives == rows.len() {
        return Err(Error::data(format!(
            "training data is single-class ({positives} positive of {} rows)",
            rows.len()
        )));
    }

    let trees = (0..params.tree_count)
        .into_par_iter()
        .map(|tau| {
            let mut rng = ChaCha8Rng::seed_from_u64(tree_seed(params.seed, tau));
            let indices: Vec<usize> = if params.bootstrap {
                (0..rows.len()).map(|_| rng.gen_range(0..rows.len())).collect()
            } else {
                (0..rows.len()).collect()
            };
            grow_tree(rows, indices, params, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    ForestModel::new(trees, *params)
}

fn tree_seed(seed: u64, tree: usize) -> u64 {
    // splitmix64 step
    let mut z = seed.wrapping_add((tree as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct Pending {
    slot: usize,
    indices: Vec<usize>,
    depth: usize,
}

fn grow_tree(
    rows: &[LabeledRow],
    indices: Vec<usize>,
    params: &ForestParams,
    rng: &mut ChaCha8Rng,
) -> Result<Tree> {
    let mut nodes = vec![Node::Leaf { posterior: 0.0 }];
    let mut stack = vec![Pending {
        slot: 0,
        indices,
        depth: 0,
    }];
    while let Some(Pending {
        slot,
        indices,
        depth,
    }) = stack.pop()
    {
        let positives = indices.iter().filter(|&&i| rows[i].positive).count();
        let posterior = positives as f64 / indices.len() as f64;
        let pure = positives == 0 || positives == indices.len();
        if pure || depth >= params.max_depth || indices.len() < 2 * params.min_leaf {
            nodes[slot] = Node::Leaf { posterior };
            continue;
        }
        let features = sample(rng, FEATURE_COUNT, params.features_per_split);
        let Some(split) = best_split(rows, &indices, features.iter(), params.min_leaf) else {
            nodes[slot] = Node::Leaf { posterior };
            continue;
        };
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
            .iter()
            .partition(|&&i| rows[i].features.values()[split.feature] <= split.threshold);
        let left = nodes.len();
        let right = left + 1;
        nodes.push(Node::Leaf { posterior: 0.0 });
        nodes.push(Node::Leaf { posterior: 0.0 });
        nodes[slot] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        stack.push(Pending {
            slot: right,
            indices: right_idx,
            depth: depth + 1,
        });
        stack.push(Pending {
            slot: left,
            indices: left_idx,
            depth: depth + 1,
        });
    }
    Tree::new(nodes)
}

struct Split {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

fn best_split(
    rows: &[LabeledRow],
    indices: &[usize],
    features: impl Iterator<Item = usize>,
    min_leaf: usize,
) -> Option<Split> {
    let n = indices.len();
    let total_pos = indices.iter().filter(|&&i| rows[i].positive).count();
    let mut best: Option<Split> = None;
    let mut sorted: Vec<(f64, bool)> = Vec::with_capacity(n);
    for feature in features {
        sorted.clear();
        sorted.extend(
            indices
                .iter()
                .map(|&i| (rows[i].features.values()[feature], rows[i].positive)),
        );
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut left_pos = 0;
        for k in 1..n {
            if sorted[k - 1].1 {
                left_pos += 1;
            }
            if k < min_leaf || n - k < min_leaf {
                continue;
            }
            let (lo, hi) = (sorted[k - 1].0, sorted[k].0);
            if lo == hi {
                continue;
            }
            let impurity = (k as f64 * gini(left_pos, k)
                + (n - k) as f64 * gini(total_pos - left_pos, n - k))
                / n as f64;
            if best.as_ref().map_or(true, |b| impurity < b.impurity) {
                let mid = lo + (hi - lo) / 2.0;
                let threshold = if mid < hi { mid } else { lo };
                best = Some(Split {
                    feature,
                    threshold,
                    impurity,
                });
            }
        }
    }
    best
}
