//! JSON persistence for forest models.
//!
//! ```json
//! {"version": 1, "tree_count": 2, "params": {...},
//!  "trees": [{"nodes": [{"feature_index": 0, "threshold": 0.5, "left": 1, "right": 2,
//!                        "leaf_posterior": null}, ...]}, ...]}
//! ```
//!
//! Thresholds and posteriors are written with shortest round-trip formatting
//! and parsed with correct rounding, so a saved model reproduces posteriors
//! bit for bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gaze::{ForestModel, ForestParams, Node, Tree};

pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    version: u32,
    tree_count: usize,
    params: ForestParams,
    trees: Vec<TreeDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TreeDoc {
    nodes: Vec<NodeDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeDoc {
    feature_index: Option<usize>,
    threshold: Option<f64>,
    left: Option<usize>,
    right: Option<usize>,
    leaf_posterior: Option<f64>,
}

pub fn model_to_json(model: &ForestModel) -> String {
    let doc = ModelDoc {
        version: MODEL_VERSION,
        tree_count: model.tree_count(),
        params: *model.params(),
        trees: model
            .trees()
            .iter()
            .map(|t| TreeDoc {
                nodes: t
                    .nodes()
                    .iter()
                    .map(|n| match *n {
                        Node::Split {
                            feature,
                            threshold,
                            left,
                            right,
                        } => NodeDoc {
                            feature_index: Some(feature),
                            threshold: Some(threshold),
                            left: Some(left),
                            right: Some(right),
                            leaf_posterior: None,
                        },
                        Node::Leaf { posterior } => NodeDoc {
                            feature_index: None,
                            threshold: None,
                            left: None,
                            right: None,
                            leaf_posterior: Some(posterior),
                        },
                    })
                    .collect(),
            })
            .collect(),
    };
    serde_json::to_string(&doc).expect("model document serializes")
}

pub fn model_from_json(text: &str) -> Result<ForestModel> {
    let doc: ModelDoc =
        serde_json::from_str(text).map_err(|e| Error::Schema(format!("model JSON: {e}")))?;
    if doc.version != MODEL_VERSION {
        return Err(Error::Schema(format!(
            "model version {} not supported (expected {MODEL_VERSION})",
            doc.version
        )));
    }
    if doc.tree_count == 0 {
        return Err(Error::Schema("tree_count must be at least 1".into()));
    }
    if doc.tree_count != doc.trees.len() {
        return Err(Error::Schema(format!(
            "tree_count {} but {} trees present",
            doc.tree_count,
            doc.trees.len()
        )));
    }
    let trees = doc
        .trees
        .into_iter()
        .enumerate()
        .map(|(ti, t)| {
            let nodes = t
                .nodes
                .into_iter()
                .enumerate()
                .map(|(ni, n)| match n {
                    NodeDoc {
                        feature_index: Some(feature),
                        threshold: Some(threshold),
                        left: Some(left),
                        right: Some(right),
                        leaf_posterior: None,
                    } => Ok(Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    }),
                    NodeDoc {
                        feature_index: None,
                        threshold: None,
                        left: None,
                        right: None,
                        leaf_posterior: Some(posterior),
                    } => Ok(Node::Leaf { posterior }),
                    _ => Err(Error::Schema(format!(
                        "tree {ti} node {ni}: must be either a split or a leaf"
                    ))),
                })
                .collect::<Result<Vec<_>>>()?;
            Tree::new(nodes).map_err(|e| Error::Schema(format!("tree {ti}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    ForestModel::new(trees, doc.params)
}

pub fn save_model(model: &ForestModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, model_to_json(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ForestModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_json(&text)
}

/// Short content hash identifying a model in reports.
pub fn model_id(model: &ForestModel) -> String {
    short_digest(model_to_json(model).as_bytes())
}

pub(crate) fn short_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    format!("{digest:x}")[..16].to_string()
}
