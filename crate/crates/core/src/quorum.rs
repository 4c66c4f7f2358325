//! Minimum retained-path requirements and the regression error bound.
//!
//! Classification: keeping a strict majority (`floor(T/2) + 1`) of the paths
//! voting the predicted class M fixes the outcome whatever the other trees
//! vote. When M holds no majority, keeping every path of M and of the runner-up
//! L plus `K - |C_M| - |C_L|` others, where `K = T + |C_L| - |C_M| + 1`, leaves
//! too few discarded votes for any class to catch up with M.
//!
//! Regression: an excluded tree may move to any of its leaves, so the worst
//! shift of the forest mean is bounded by the excluded trees' distance to
//! their extreme leaves.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{DecisionPath, ForestModel, Task, TreeStats};

/// Absolute slack on the soft-vote margin.
pub const MARGIN_EPS: f64 = 1e-9;

pub fn quorum(total: usize) -> usize {
    total / 2 + 1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VoteTally {
    pub counts: Vec<usize>,
    pub majority: usize,
    /// Runner-up class; lowest index among equal counts.
    pub second: usize,
    pub total: usize,
}

impl VoteTally {
    /// Builds a tally; a tie between the two largest counts is an error.
    pub fn from_counts(counts: Vec<usize>) -> Result<Self> {
        if counts.len() < 2 {
            return Err(Error::InvalidConfig("a tally needs at least two classes".into()));
        }
        let total: usize = counts.iter().sum();
        if total == 0 {
            return Err(Error::InvalidConfig("a tally needs at least one vote".into()));
        }
        let mut majority = 0;
        for (i, &c) in counts.iter().enumerate() {
            if c > counts[majority] {
                majority = i;
            }
        }
        let second = (0..counts.len())
            .filter(|&i| i != majority)
            .fold(None, |best: Option<usize>, i| match best {
                Some(b) if counts[b] >= counts[i] => Some(b),
                _ => Some(i),
            })
            .expect("at least two classes");
        if counts[second] == counts[majority] {
            return Err(Error::Tie {
                first: majority.min(second),
                second: majority.max(second),
                votes: counts[majority],
            });
        }
        Ok(VoteTally {
            counts,
            majority,
            second,
            total,
        })
    }

    pub fn from_paths(paths: &[DecisionPath], n_classes: usize) -> Result<Self> {
        let mut counts = vec![0; n_classes];
        for p in paths {
            let c = p
                .class_vote()
                .ok_or_else(|| Error::WrongTask {
                    expected: "classification".into(),
                    got: "regression".into(),
                })?;
            counts[c] += 1;
        }
        VoteTally::from_counts(counts)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Rationale {
    Quorum,
    KRule,
    /// The soft-voted class is not the hard-vote majority; nothing may be dropped.
    AllPaths,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RetentionRequirement {
    /// Class whose prediction must be preserved.
    pub class: usize,
    pub minimum_paths: usize,
    /// Per-class number of paths that must be kept.
    pub mandatory: Vec<usize>,
    /// Paths to keep from classes without a mandatory count.
    pub free_pick: usize,
    pub rationale: Rationale,
}

impl RetentionRequirement {
    pub fn mandatory_total(&self) -> usize {
        self.mandatory.iter().sum()
    }
}

/// Quorum requirement for a two-class forest.
pub fn requirement_binary(tally: &VoteTally) -> Result<RetentionRequirement> {
    let q = quorum(tally.total);
    let m = tally.majority;
    if tally.counts[m] < q {
        return Err(Error::Tie {
            first: m.min(tally.second),
            second: m.max(tally.second),
            votes: tally.counts[m],
        });
    }
    let mut mandatory = vec![0; tally.counts.len()];
    mandatory[m] = q;
    Ok(RetentionRequirement {
        class: m,
        minimum_paths: q,
        mandatory,
        free_pick: 0,
        rationale: Rationale::Quorum,
    })
}

/// Quorum requirement when the majority class holds a quorum, K-rule otherwise.
pub fn requirement_multiclass(tally: &VoteTally) -> Result<RetentionRequirement> {
    let m = tally.majority;
    let l = tally.second;
    let (cm, cl) = (tally.counts[m], tally.counts[l]);
    if cm >= quorum(tally.total) {
        return requirement_binary(tally);
    }
    let k = tally.total + cl - cm + 1;
    let mut mandatory = vec![0; tally.counts.len()];
    mandatory[m] = cm;
    mandatory[l] = cl;
    Ok(RetentionRequirement {
        class: m,
        minimum_paths: k,
        mandatory,
        free_pick: k - cm - cl,
        rationale: Rationale::KRule,
    })
}

/// Requirement for preserving `predicted` (the soft-voted class).
pub fn requirement_for(task: Task, tally: &VoteTally, predicted: usize) -> Result<RetentionRequirement> {
    if predicted != tally.majority {
        return Ok(RetentionRequirement {
            class: predicted,
            minimum_paths: tally.total,
            mandatory: tally.counts.clone(),
            free_pick: 0,
            rationale: Rationale::AllPaths,
        });
    }
    match task {
        Task::Binary => requirement_binary(tally),
        Task::Multiclass => requirement_multiclass(tally),
        Task::Regression => Err(Error::WrongTask {
            expected: "classification".into(),
            got: "regression".into(),
        }),
    }
}

/// Per-tree predictions and leaf extrema for one regression instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorModel {
    preds: Vec<f64>,
    stats: Vec<TreeStats>,
}

impl ErrorModel {
    pub fn new(model: &ForestModel, x: &[f64]) -> Result<Self> {
        Ok(ErrorModel {
            preds: model.tree_predictions(x)?,
            stats: model.tree_stats().to_vec(),
        })
    }

    pub fn from_parts(preds: Vec<f64>, stats: Vec<TreeStats>) -> Self {
        assert_eq!(preds.len(), stats.len());
        ErrorModel { preds, stats }
    }

    pub fn n_trees(&self) -> usize {
        self.preds.len()
    }

    pub fn predictions(&self) -> &[f64] {
        &self.preds
    }

    /// Worst-case shift of the forest mean when the trees flagged `false`
    /// may output any of their leaves.
    pub fn error_excluding(&self, retained: &[bool]) -> f64 {
        let (mut up, mut down) = (0.0, 0.0);
        for (t, keep) in retained.iter().enumerate() {
            if !keep {
                up += self.stats[t].max_pred - self.preds[t];
                down += self.preds[t] - self.stats[t].min_pred;
            }
        }
        up.max(down) / self.preds.len() as f64
    }

    pub fn error_for<'a>(&self, retained: impl IntoIterator<Item = &'a DecisionPath>) -> f64 {
        let mut mask = vec![false; self.preds.len()];
        for p in retained {
            mask[p.tree_index] = true;
        }
        self.error_excluding(&mask)
    }
}

/// Worst-case prediction shift when only the trees in `retained` are kept.
pub fn local_error(model: &ForestModel, x: &[f64], retained: &[usize]) -> Result<f64> {
    let em = ErrorModel::new(model, x)?;
    let mut mask = vec![false; em.n_trees()];
    for &t in retained {
        if t >= mask.len() {
            return Err(Error::InvalidConfig(format!("tree index {t} out of range")));
        }
        mask[t] = true;
    }
    Ok(em.error_excluding(&mask))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetSource {
    ModelMae,
    User,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorBudget {
    pub allowed_error: f64,
    pub source: BudgetSource,
}

impl ErrorBudget {
    pub fn user(allowed_error: f64) -> Result<Self> {
        if !(allowed_error >= 0.0 && allowed_error.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "allowed_error must be a finite non-negative number, got {allowed_error}"
            )));
        }
        Ok(ErrorBudget {
            allowed_error,
            source: BudgetSource::User,
        })
    }
}

/// Model MAE on a validation set, the default error budget.
pub fn default_allowed_error(model: &ForestModel, rows: &[Vec<f64>], targets: &[f64]) -> Result<ErrorBudget> {
    model.require(Task::Regression)?;
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if rows.len() != targets.len() {
        return Err(Error::InvalidData("target length differs from row count".into()));
    }
    let mut sum = 0.0;
    for (r, y) in rows.iter().zip(targets) {
        let p = model.predict(r)?.value().unwrap_or(0.0);
        sum += (p - y).abs();
    }
    Ok(ErrorBudget {
        allowed_error: sum / rows.len() as f64,
        source: BudgetSource::ModelMae,
    })
}

/// Acceptance predicate for a candidate set of retained paths.
#[derive(Debug, Clone)]
pub enum Constraint {
    Classification {
        requirement: RetentionRequirement,
        n_trees: usize,
        /// Summed class-M probability over every tree.
        full_mass: f64,
    },
    Regression {
        errors: ErrorModel,
        budget: ErrorBudget,
    },
}

impl Constraint {
    pub fn classification(requirement: RetentionRequirement, all_paths: &[DecisionPath]) -> Self {
        let full_mass = all_paths
            .iter()
            .map(|p| p.leaf.class_probability(requirement.class))
            .sum();
        Constraint::Classification {
            requirement,
            n_trees: all_paths.len(),
            full_mass,
        }
    }

    pub fn regression(errors: ErrorModel, budget: ErrorBudget) -> Self {
        Constraint::Regression { errors, budget }
    }

    pub fn is_regression(&self) -> bool {
        matches!(self, Constraint::Regression { .. })
    }

    pub fn requirement(&self) -> Option<&RetentionRequirement> {
        match self {
            Constraint::Classification { requirement, .. } => Some(requirement),
            Constraint::Regression { .. } => None,
        }
    }

    pub fn accepts<'a>(&self, retained: &[&'a DecisionPath]) -> bool {
        match self {
            Constraint::Classification {
                requirement,
                n_trees,
                full_mass,
            } => {
                counts_ok(requirement, retained)
                    && (retained.len() == *n_trees
                        || (soft_margin(requirement.class, retained, *n_trees) > MARGIN_EPS
                            && floor_identity(requirement.class, retained, *n_trees, *full_mass)))
            }
            Constraint::Regression { errors, budget } => {
                errors.error_for(retained.iter().copied()) <= budget.allowed_error
            }
        }
    }

    /// Regression bound for `retained`; `None` for classification.
    pub fn local_error(&self, retained: &[&DecisionPath]) -> Option<f64> {
        match self {
            Constraint::Regression { errors, .. } => Some(errors.error_for(retained.iter().copied())),
            Constraint::Classification { .. } => None,
        }
    }
}

/// Per-class mandatory counts and the overall minimum are met.
pub fn counts_ok(req: &RetentionRequirement, retained: &[&DecisionPath]) -> bool {
    if retained.len() < req.minimum_paths {
        return false;
    }
    let mut counts = vec![0usize; req.mandatory.len()];
    for p in retained {
        if let Some(c) = p.class_vote() {
            counts[c] += 1;
        }
    }
    counts.iter().zip(&req.mandatory).all(|(have, need)| have >= need)
}

/// Smallest lead of class `m` over any rival once every discarded tree is
/// assumed to put its whole probability mass on that rival.
pub fn soft_margin(m: usize, retained: &[&DecisionPath], n_trees: usize) -> f64 {
    let n_classes = retained
        .iter()
        .filter_map(|p| p.leaf.distribution().map(<[f64]>::len))
        .max()
        .unwrap_or(0);
    let mut mass = vec![0.0; n_classes.max(m + 1)];
    for p in retained {
        if let Some(d) = p.leaf.distribution() {
            for (acc, v) in mass.iter_mut().zip(d) {
                *acc += v;
            }
        }
    }
    let discarded = (n_trees - retained.len()) as f64;
    (0..mass.len())
        .filter(|&j| j != m)
        .map(|j| mass[m] - mass[j] - discarded)
        .fold(f64::INFINITY, f64::min)
}

fn floor_identity(m: usize, retained: &[&DecisionPath], n_trees: usize, full_mass: f64) -> bool {
    let t = n_trees as f64;
    let kept: f64 = retained.iter().map(|p| p.leaf.class_probability(m)).sum();
    (kept / t + 0.5).floor() == (full_mass / t + 0.5).floor()
}
