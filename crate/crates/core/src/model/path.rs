use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{argmax, ForestModel, LeafValue, Node, Task};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub feature: usize,
    pub relation: Relation,
    pub threshold: f64,
}

impl Condition {
    pub fn holds(&self, value: f64) -> bool {
        match self.relation {
            Relation::Le => value <= self.threshold,
            Relation::Gt => value > self.threshold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Vote {
    Class(usize),
    Value(f64),
}

/// Root-to-leaf route of one tree for one instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecisionPath {
    pub tree_index: usize,
    pub conditions: Vec<Condition>,
    pub vote: Vote,
    pub leaf: LeafValue,
}

impl DecisionPath {
    pub fn features(&self) -> BTreeSet<usize> {
        self.conditions.iter().map(|c| c.feature).collect()
    }

    pub fn mentions(&self, feature: usize) -> bool {
        self.conditions.iter().any(|c| c.feature == feature)
    }

    pub fn interval(&self, feature: usize) -> Option<Interval> {
        path_interval(self, feature)
    }

    pub fn satisfied_by(&self, x: &[f64]) -> bool {
        self.conditions.iter().all(|c| c.holds(x[c.feature]))
    }

    pub fn class_vote(&self) -> Option<usize> {
        match self.vote {
            Vote::Class(c) => Some(c),
            Vote::Value(_) => None,
        }
    }

    pub fn value_vote(&self) -> Option<f64> {
        match self.vote {
            Vote::Value(v) => Some(v),
            Vote::Class(_) => None,
        }
    }
}

/// Half-open interval `(lower, upper]`; infinite ends mean the side is open.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn contains(&self, v: f64) -> bool {
        self.lower < v && v <= self.upper
    }

    pub fn is_empty(&self) -> bool {
        self.lower >= self.upper
    }
}

/// Intersection of the path's conditions on `feature`, or `None` when the
/// path never tests it.
pub fn path_interval(path: &DecisionPath, feature: usize) -> Option<Interval> {
    let mut found = false;
    let mut iv = Interval {
        lower: f64::NEG_INFINITY,
        upper: f64::INFINITY,
    };
    for c in path.conditions.iter().filter(|c| c.feature == feature) {
        found = true;
        match c.relation {
            Relation::Le => iv.upper = iv.upper.min(c.threshold),
            Relation::Gt => iv.lower = iv.lower.max(c.threshold),
        }
    }
    found.then_some(iv)
}

/// One decision path per tree, in tree order.
pub fn extract_paths(model: &ForestModel, x: &[f64]) -> Result<Vec<DecisionPath>> {
    model.check_instance(x)?;
    Ok(model
        .trees()
        .iter()
        .enumerate()
        .map(|(tree_index, tree)| {
            let mut conditions = Vec::new();
            let mut i = tree.root();
            loop {
                match &tree.nodes()[i] {
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => {
                        let go_left = x[*feature] <= *threshold;
                        conditions.push(Condition {
                            feature: *feature,
                            relation: if go_left { Relation::Le } else { Relation::Gt },
                            threshold: *threshold,
                        });
                        i = if go_left { *left } else { *right };
                    }
                    Node::Leaf(leaf) => {
                        let vote = match (model.task(), leaf) {
                            (Task::Regression, LeafValue::Scalar(v)) => Vote::Value(*v),
                            (_, LeafValue::Distribution(d)) => Vote::Class(argmax(d)),
                            (_, LeafValue::Scalar(v)) => Vote::Value(*v),
                        };
                        return DecisionPath {
                            tree_index,
                            conditions,
                            vote,
                            leaf: leaf.clone(),
                        };
                    }
                }
            }
        })
        .collect())
}
