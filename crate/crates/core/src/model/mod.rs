//! Tree-ensemble data model.
//!
//! A [`ForestModel`] is an immutable collection of binary decision trees over a
//! fixed feature list. Internal nodes route an instance left when
//! `value <= threshold` and right otherwise. Classification leaves carry a
//! class-probability vector; the forest prediction is the argmax of the mean of
//! those vectors (soft voting, ties resolved towards the lower class index).
//! Regression leaves carry a scalar and the forest predicts the mean.

pub mod format;
mod path;

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use format::{load_model, read_model, serialize_model, FORMAT_VERSION};
pub use path::{extract_paths, path_interval, Condition, DecisionPath, Interval, Relation, Vote};

/// Tolerance on the sum of a classification leaf distribution.
pub const LEAF_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Binary,
    Multiclass,
    Regression,
}

impl Task {
    pub fn is_classification(self) -> bool {
        !matches!(self, Task::Regression)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Binary => "binary",
            Task::Multiclass => "multiclass",
            Task::Regression => "regression",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "binary" => Ok(Task::Binary),
            "multiclass" | "multi-class" => Ok(Task::Multiclass),
            "regression" => Ok(Task::Regression),
            other => Err(Error::InvalidConfig(format!("unknown task {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Numeric,
    OneHotMember,
}

/// One input column of the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureSpec {
    pub id: usize,
    pub name: String,
    pub kind: FeatureKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub member_value: Option<String>,
    /// Smallest value observed at training time.
    pub domain_min: f64,
    /// Largest value observed at training time.
    pub domain_max: f64,
}

impl FeatureSpec {
    pub fn numeric(id: usize, name: impl Into<String>, domain_min: f64, domain_max: f64) -> Self {
        FeatureSpec {
            id,
            name: name.into(),
            kind: FeatureKind::Numeric,
            group: None,
            member_value: None,
            domain_min,
            domain_max,
        }
    }

    pub fn one_hot(
        id: usize,
        name: impl Into<String>,
        group: impl Into<String>,
        member_value: impl Into<String>,
    ) -> Self {
        FeatureSpec {
            id,
            name: name.into(),
            kind: FeatureKind::OneHotMember,
            group: Some(group.into()),
            member_value: Some(member_value.into()),
            domain_min: 0.0,
            domain_max: 1.0,
        }
    }

    pub fn is_one_hot(&self) -> bool {
        self.kind == FeatureKind::OneHotMember
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Malformed(format!("feature {:?}: {msg}", self.name)));
        match self.kind {
            FeatureKind::OneHotMember => {
                if self.group.as_deref().map_or(true, str::is_empty)
                    || self.member_value.as_deref().map_or(true, str::is_empty)
                {
                    return bad("one_hot_member needs a group and a member_value");
                }
            }
            FeatureKind::Numeric => {
                if self.group.is_some() || self.member_value.is_some() {
                    return bad("numeric features carry no group or member_value");
                }
            }
        }
        if !self.domain_min.is_finite() || !self.domain_max.is_finite() {
            return bad("domain bounds must be finite");
        }
        if self.domain_min > self.domain_max {
            return bad("domain_min exceeds domain_max");
        }
        Ok(())
    }
}

/// A categorical variable encoded as one-hot member columns.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalGroup {
    pub name: String,
    /// Member feature ids in declaration order.
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LeafValue {
    Distribution(Vec<f64>),
    Scalar(f64),
}

impl LeafValue {
    pub fn distribution(&self) -> Option<&[f64]> {
        match self {
            LeafValue::Distribution(d) => Some(d),
            LeafValue::Scalar(_) => None,
        }
    }

    pub fn scalar(&self) -> Option<f64> {
        match self {
            LeafValue::Scalar(v) => Some(*v),
            LeafValue::Distribution(_) => None,
        }
    }

    /// Probability of `class`, zero for scalar leaves.
    pub fn class_probability(&self, class: usize) -> f64 {
        self.distribution()
            .and_then(|d| d.get(class).copied())
            .unwrap_or(0.0)
    }
}

/// Index of the largest component; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf(LeafValue),
}

/// A binary decision tree stored as a node arena.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    ids: Vec<u64>,
    nodes: Vec<Node>,
    root: usize,
}

impl Tree {
    /// Builds a tree whose node ids are the arena positions.
    pub fn new(nodes: Vec<Node>) -> Result<Self> {
        let ids = (0..nodes.len() as u64).collect();
        Tree::with_ids(0, ids, nodes)
    }

    /// Builds a tree from an arena plus external node ids, checking that the
    /// child links form a single rooted binary tree.
    pub(crate) fn with_ids(tree_index: usize, ids: Vec<u64>, nodes: Vec<Node>) -> Result<Self> {
        let not_a_tree = |reason: String| Error::NotATree {
            tree: tree_index,
            reason,
        };
        if nodes.is_empty() {
            return Err(not_a_tree("tree has no nodes".into()));
        }
        let n = nodes.len();
        let mut parents = vec![0usize; n];
        for node in &nodes {
            if let Node::Split { left, right, .. } = node {
                for &child in [left, right] {
                    if child >= n {
                        return Err(not_a_tree(format!("child index {child} out of range")));
                    }
                    parents[child] += 1;
                }
            }
        }
        let roots: Vec<usize> = (0..n).filter(|&i| parents[i] == 0).collect();
        if roots.len() != 1 {
            return Err(not_a_tree(format!("expected one root, found {}", roots.len())));
        }
        if let Some(i) = (0..n).find(|&i| parents[i] > 1) {
            return Err(not_a_tree(format!("node {} has several parents", ids[i])));
        }
        let root = roots[0];
        let mut seen = vec![false; n];
        let mut stack = vec![root];
        while let Some(i) = stack.pop() {
            if seen[i] {
                return Err(not_a_tree("cycle detected".into()));
            }
            seen[i] = true;
            if let Node::Split { left, right, .. } = nodes[i] {
                stack.push(left);
                stack.push(right);
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(not_a_tree("unreachable nodes (cycle)".into()));
        }
        Ok(Tree { ids, nodes, root })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn node_id(&self, index: usize) -> u64 {
        self.ids[index]
    }

    /// Arena index of the leaf reached by `x`.
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut i = self.root;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
                Node::Leaf(_) => return i,
            }
        }
    }

    pub fn leaf(&self, x: &[f64]) -> &LeafValue {
        match &self.nodes[self.leaf_index(x)] {
            Node::Leaf(v) => v,
            Node::Split { .. } => unreachable!("leaf_index stops at leaves"),
        }
    }

    pub fn leaves(&self) -> impl Iterator<Item = &LeafValue> {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf(v) => Some(v),
            Node::Split { .. } => None,
        })
    }

    /// Length of the longest root-to-leaf path in edges.
    pub fn depth(&self) -> usize {
        let mut best = 0;
        let mut stack = vec![(self.root, 0usize)];
        while let Some((i, d)) = stack.pop() {
            match self.nodes[i] {
                Node::Split { left, right, .. } => {
                    stack.push((left, d + 1));
                    stack.push((right, d + 1));
                }
                Node::Leaf(_) => best = best.max(d),
            }
        }
        best
    }
}

/// Extreme leaf predictions of one regression tree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeStats {
    pub min_pred: f64,
    pub max_pred: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Prediction {
    Class { index: usize, probabilities: Vec<f64> },
    Value(f64),
}

impl Prediction {
    pub fn class(&self) -> Option<usize> {
        match self {
            Prediction::Class { index, .. } => Some(*index),
            Prediction::Value(_) => None,
        }
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            Prediction::Value(v) => Some(*v),
            Prediction::Class { .. } => None,
        }
    }
}

/// A frozen random forest.
#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    task: Task,
    classes: Vec<String>,
    features: Vec<FeatureSpec>,
    trees: Vec<Tree>,
    tree_stats: Vec<TreeStats>,
}

impl ForestModel {
    /// Validates the parts and computes regression tree statistics.
    pub fn new(
        task: Task,
        classes: Vec<String>,
        features: Vec<FeatureSpec>,
        trees: Vec<Tree>,
    ) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::Malformed("model has no trees".into()));
        }
        if features.is_empty() {
            return Err(Error::Malformed("model has no features".into()));
        }
        let mut names = HashSet::new();
        let mut members: BTreeMap<&str, HashSet<&str>> = BTreeMap::new();
        for (i, f) in features.iter().enumerate() {
            if f.id != i {
                return Err(Error::Malformed(format!(
                    "feature ids must be 0..n in order; position {i} has id {}",
                    f.id
                )));
            }
            f.validate()?;
            if !names.insert(f.name.as_str()) {
                return Err(Error::Malformed(format!("duplicate feature name {:?}", f.name)));
            }
            if let (Some(g), Some(v)) = (&f.group, &f.member_value) {
                if !members.entry(g).or_default().insert(v) {
                    return Err(Error::Malformed(format!(
                        "group {g:?} declares member value {v:?} twice"
                    )));
                }
            }
        }
        match task {
            Task::Binary if classes.len() != 2 => {
                return Err(Error::Malformed(format!(
                    "binary model needs 2 classes, got {}",
                    classes.len()
                )))
            }
            Task::Multiclass if classes.len() < 3 => {
                return Err(Error::Malformed(format!(
                    "multiclass model needs at least 3 classes, got {}",
                    classes.len()
                )))
            }
            Task::Regression if !classes.is_empty() => {
                return Err(Error::Malformed("regression model must not list classes".into()))
            }
            _ => {}
        }
        let n_features = features.len();
        for (t, tree) in trees.iter().enumerate() {
            for (i, node) in tree.nodes.iter().enumerate() {
                let node_id = tree.ids[i];
                match node {
                    Node::Split {
                        feature, threshold, ..
                    } => {
                        if *feature >= n_features {
                            return Err(Error::Malformed(format!(
                                "tree {t}, node {node_id}: feature {feature} does not exist"
                            )));
                        }
                        if !threshold.is_finite() {
                            return Err(Error::Malformed(format!(
                                "tree {t}, node {node_id}: threshold is not finite"
                            )));
                        }
                    }
                    Node::Leaf(value) => check_leaf(task, classes.len(), t, node_id, value)?,
                }
            }
        }
        let tree_stats = if task == Task::Regression {
            trees.iter().map(compute_stats).collect()
        } else {
            Vec::new()
        };
        Ok(ForestModel {
            task,
            classes,
            features,
            trees,
            tree_stats,
        })
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn features(&self) -> &[FeatureSpec] {
        &self.features
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    /// Per-tree leaf extrema; empty for classification models.
    pub fn tree_stats(&self) -> &[TreeStats] {
        &self.tree_stats
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    /// Categorical groups in order of their first member column.
    pub fn groups(&self) -> Vec<CategoricalGroup> {
        let mut groups: Vec<CategoricalGroup> = Vec::new();
        for f in &self.features {
            if let Some(g) = &f.group {
                match groups.iter_mut().find(|x| &x.name == g) {
                    Some(existing) => existing.members.push(f.id),
                    None => groups.push(CategoricalGroup {
                        name: g.clone(),
                        members: vec![f.id],
                    }),
                }
            }
        }
        groups
    }

    pub fn check_instance(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.features.len() {
            return Err(Error::DimensionMismatch {
                expected: self.features.len(),
                got: x.len(),
            });
        }
        if let Some(feature) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { feature });
        }
        Ok(())
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        self.check_instance(x)?;
        Ok(self.predict_unchecked(x))
    }

    /// Prediction without input validation; `x` must have one finite value per feature.
    pub fn predict_unchecked(&self, x: &[f64]) -> Prediction {
        let t = self.trees.len() as f64;
        match self.task {
            Task::Regression => {
                let sum: f64 = self
                    .trees
                    .iter()
                    .map(|tree| tree.leaf(x).scalar().unwrap_or(0.0))
                    .sum();
                Prediction::Value(sum / t)
            }
            Task::Binary | Task::Multiclass => {
                let mut probabilities = vec![0.0; self.classes.len()];
                for tree in &self.trees {
                    if let Some(d) = tree.leaf(x).distribution() {
                        for (acc, p) in probabilities.iter_mut().zip(d) {
                            *acc += p;
                        }
                    }
                }
                for p in &mut probabilities {
                    *p /= t;
                }
                Prediction::Class {
                    index: argmax(&probabilities),
                    probabilities,
                }
            }
        }
    }

    /// Per-tree scalar predictions (regression).
    pub fn tree_predictions(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.require(Task::Regression)?;
        self.check_instance(x)?;
        Ok(self
            .trees
            .iter()
            .map(|tree| tree.leaf(x).scalar().unwrap_or(0.0))
            .collect())
    }

    pub(crate) fn require(&self, task: Task) -> Result<()> {
        let ok = match task {
            Task::Regression => self.task == Task::Regression,
            _ => self.task.is_classification(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::WrongTask {
                expected: if task == Task::Regression {
                    "regression".into()
                } else {
                    "classification".into()
                },
                got: self.task.to_string(),
            })
        }
    }

    /// Human-readable label for a prediction.
    pub fn describe(&self, prediction: &Prediction) -> String {
        match prediction {
            Prediction::Class { index, .. } => self
                .classes
                .get(*index)
                .cloned()
                .unwrap_or_else(|| index.to_string()),
            Prediction::Value(v) => v.to_string(),
        }
    }
}

fn check_leaf(task: Task, n_classes: usize, tree: usize, node: u64, value: &LeafValue) -> Result<()> {
    match (task, value) {
        (Task::Regression, LeafValue::Scalar(v)) => {
            if !v.is_finite() {
                return Err(Error::Malformed(format!(
                    "tree {tree}, node {node}: leaf value is not finite"
                )));
            }
            Ok(())
        }
        (Task::Binary | Task::Multiclass, LeafValue::Distribution(d)) => {
            if d.len() != n_classes {
                return Err(Error::Malformed(format!(
                    "tree {tree}, node {node}: leaf has {} components for {n_classes} classes",
                    d.len()
                )));
            }
            if d.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::Malformed(format!(
                    "tree {tree}, node {node}: leaf probabilities must be finite and non-negative"
                )));
            }
            let sum: f64 = d.iter().sum();
            if (sum - 1.0).abs() > LEAF_SUM_TOLERANCE {
                return Err(Error::LeafNotNormalized { tree, node, sum });
            }
            Ok(())
        }
        _ => Err(Error::LeafTaskMismatch {
            tree,
            node,
            task: task.to_string(),
        }),
    }
}

fn compute_stats(tree: &Tree) -> TreeStats {
    let mut min_pred = f64::INFINITY;
    let mut max_pred = f64::NEG_INFINITY;
    for v in tree.leaves().filter_map(LeafValue::scalar) {
        min_pred = min_pred.min(v);
        max_pred = max_pred.max(v);
    }
    TreeStats { min_pred, max_pred }
}
