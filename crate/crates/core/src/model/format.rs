//! JSON model exchange format.
//!
//! ```json
//! {"format_version": "1", "task": "binary", "classes": ["0", "1"],
//!  "features": [{"id": 0, "name": "x", "kind": "numeric", "domain_min": 0, "domain_max": 1}],
//!  "trees": [{"nodes": [
//!     {"node_id": 0, "feature": 0, "threshold": 0.5, "left": 1, "right": 2},
//!     {"node_id": 1, "leaf_value": [1.0, 0.0]},
//!     {"node_id": 2, "leaf_value": [0.0, 1.0]}]}]}
//! ```
//!
//! An internal node sends an instance left iff `value <= threshold`. Nodes may
//! carry `"relation": "<="`; any other relation is rejected. Numbers are
//! written in their shortest round-trip form.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FeatureSpec, ForestModel, LeafValue, Node, Task, Tree, TreeStats};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: &str = "1";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDocument {
    format_version: String,
    task: Task,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    classes: Option<Vec<String>>,
    features: Vec<FeatureSpec>,
    trees: Vec<TreeDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tree_stats: Option<Vec<TreeStats>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TreeDocument {
    nodes: Vec<NodeDocument>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeDocument {
    node_id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    feature: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    relation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    left: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    right: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    leaf_value: Option<LeafValue>,
}

/// Parses and validates a model document.
pub fn load_model(bytes: &[u8]) -> Result<ForestModel> {
    let doc: ModelDocument = serde_json::from_slice(bytes)
        .map_err(|e| Error::Malformed(e.to_string()))?;
    if doc.format_version != FORMAT_VERSION {
        return Err(Error::Malformed(format!(
            "unsupported format_version {:?}",
            doc.format_version
        )));
    }
    let classes = match (doc.task, doc.classes) {
        (Task::Regression, None) => Vec::new(),
        (Task::Regression, Some(c)) if c.is_empty() => Vec::new(),
        (Task::Regression, Some(_)) => {
            return Err(Error::Malformed("regression model must not list classes".into()))
        }
        (_, None) => return Err(Error::Malformed("classification model needs classes".into())),
        (_, Some(c)) => c,
    };
    let mut trees = Vec::with_capacity(doc.trees.len());
    for (t, tree) in doc.trees.into_iter().enumerate() {
        trees.push(build_tree(t, tree)?);
    }
    let model = ForestModel::new(doc.task, classes, doc.features, trees)?;
    if let Some(stored) = doc.tree_stats {
        if model.task() != Task::Regression {
            return Err(Error::Malformed("tree_stats only apply to regression models".into()));
        }
        if stored.len() != model.n_trees() {
            return Err(Error::Malformed(format!(
                "tree_stats has {} entries for {} trees",
                stored.len(),
                model.n_trees()
            )));
        }
        for (tree, (s, c)) in stored.iter().zip(model.tree_stats()).enumerate() {
            if s != c {
                return Err(Error::TreeStatsMismatch {
                    tree,
                    stored_min: s.min_pred,
                    stored_max: s.max_pred,
                    min: c.min_pred,
                    max: c.max_pred,
                });
            }
        }
    }
    Ok(model)
}

fn build_tree(t: usize, doc: TreeDocument) -> Result<Tree> {
    let mut index: HashMap<u64, usize> = HashMap::with_capacity(doc.nodes.len());
    for (i, n) in doc.nodes.iter().enumerate() {
        if index.insert(n.node_id, i).is_some() {
            return Err(Error::Malformed(format!(
                "tree {t}: duplicate node_id {}",
                n.node_id
            )));
        }
    }
    let lookup = |from: u64, id: u64| {
        index.get(&id).copied().ok_or(Error::DanglingNode {
            tree: t,
            node: from,
            missing: id,
        })
    };
    let mut ids = Vec::with_capacity(doc.nodes.len());
    let mut nodes = Vec::with_capacity(doc.nodes.len());
    for n in &doc.nodes {
        if let Some(rel) = &n.relation {
            if rel != "<=" {
                return Err(Error::UnsupportedRelation(rel.clone()));
            }
        }
        let node = match (n.feature, n.threshold, n.left, n.right, &n.leaf_value) {
            (Some(feature), Some(threshold), Some(l), Some(r), None) => Node::Split {
                feature,
                threshold,
                left: lookup(n.node_id, l)?,
                right: lookup(n.node_id, r)?,
            },
            (None, None, None, None, Some(v)) if n.relation.is_none() => Node::Leaf(v.clone()),
            _ => {
                return Err(Error::Malformed(format!(
                    "tree {t}, node {}: populate either feature/threshold/left/right or leaf_value",
                    n.node_id
                )))
            }
        };
        ids.push(n.node_id);
        nodes.push(node);
    }
    Tree::with_ids(t, ids, nodes)
}

fn document(model: &ForestModel) -> ModelDocument {
    let trees = model
        .trees()
        .iter()
        .map(|tree| TreeDocument {
            nodes: tree
                .nodes()
                .iter()
                .enumerate()
                .map(|(i, node)| match node {
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => NodeDocument {
                        node_id: tree.node_id(i),
                        feature: Some(*feature),
                        relation: None,
                        threshold: Some(*threshold),
                        left: Some(tree.node_id(*left)),
                        right: Some(tree.node_id(*right)),
                        leaf_value: None,
                    },
                    Node::Leaf(v) => NodeDocument {
                        node_id: tree.node_id(i),
                        feature: None,
                        relation: None,
                        threshold: None,
                        left: None,
                        right: None,
                        leaf_value: Some(v.clone()),
                    },
                })
                .collect(),
        })
        .collect();
    ModelDocument {
        format_version: FORMAT_VERSION.into(),
        task: model.task(),
        classes: model
            .task()
            .is_classification()
            .then(|| model.classes().to_vec()),
        features: model.features().to_vec(),
        trees,
        tree_stats: (model.task() == Task::Regression).then(|| model.tree_stats().to_vec()),
    }
}

/// Serializes a model; output is deterministic for a given model.
pub fn serialize_model(model: &ForestModel) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec(&document(model))?;
    out.push(b'\n');
    Ok(out)
}

pub fn read_model(path: &Path) -> Result<ForestModel> {
    load_model(&std::fs::read(path)?)
}
