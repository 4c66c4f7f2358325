//! Method codes and the staged reduction pipeline.
//!
//! Classification codes are non-empty increasing digit strings over
//! `1` (association rules), `2` (clustering) and `3` (random selection).
//! Regression accepts `1`, `3`, `13`, `DSi` and `DSo`. `none` keeps every
//! path of the initial pool.

use std::fmt;
use std::str::FromStr;

use super::association::{reduce_association_rules, ArOptions};
use super::clustering::{reduce_clustering, ClusterOptions};
use super::distribution::{reduce_distribution, DsVariant};
use super::random::reduce_random;
use super::{repair, ReductionOutcome};
use crate::error::{Error, Result};
use crate::model::{extract_paths, DecisionPath, ForestModel, Prediction, Task};
use crate::quorum::{requirement_for, Constraint, ErrorBudget, ErrorModel, Rationale, RetentionRequirement, VoteTally};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    AssociationRules,
    Clustering,
    Random,
}

impl Stage {
    fn digit(self) -> char {
        match self {
            Stage::AssociationRules => '1',
            Stage::Clustering => '2',
            Stage::Random => '3',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Method {
    NoReduction,
    Stages(Vec<Stage>),
    Distribution(DsVariant),
}

impl Method {
    /// Every method code accepted for `task`, in a fixed order.
    pub fn all_for(task: Task) -> Vec<Method> {
        let codes: &[&str] = if task == Task::Regression {
            &["1", "3", "13", "DSi", "DSo"]
        } else {
            &["1", "2", "3", "12", "13", "23", "123"]
        };
        codes.iter().map(|c| c.parse().expect("valid code")).collect()
    }

    pub fn check_task(&self, task: Task) -> Result<()> {
        let mismatch = match self {
            Method::NoReduction => false,
            Method::Stages(stages) => task == Task::Regression && stages.contains(&Stage::Clustering),
            Method::Distribution(_) => task != Task::Regression,
        };
        if mismatch {
            return Err(Error::MethodTaskMismatch {
                method: self.to_string(),
                task: task.to_string(),
            });
        }
        Ok(())
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::NoReduction => f.write_str("none"),
            Method::Stages(stages) => {
                for s in stages {
                    write!(f, "{}", s.digit())?;
                }
                Ok(())
            }
            Method::Distribution(v) => write!(f, "{v}"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "none" => return Ok(Method::NoReduction),
            "dsi" | "dso" => return Ok(Method::Distribution(lower.parse()?)),
            _ => {}
        }
        let mut stages = Vec::new();
        let mut last = '0';
        for c in lower.chars() {
            let stage = match c {
                '1' => Stage::AssociationRules,
                '2' => Stage::Clustering,
                '3' => Stage::Random,
                _ => return Err(Error::InvalidMethod(s.into())),
            };
            if c <= last {
                return Err(Error::InvalidMethod(s.into()));
            }
            last = c;
            stages.push(stage);
        }
        if stages.is_empty() {
            return Err(Error::InvalidMethod(s.into()));
        }
        Ok(Method::Stages(stages))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReductionOptions {
    pub ar: ArOptions,
    pub cluster: ClusterOptions,
    pub seed: u64,
}

impl Default for ReductionOptions {
    fn default() -> Self {
        ReductionOptions {
            ar: ArOptions::default(),
            cluster: ClusterOptions::default(),
            seed: 42,
        }
    }
}

/// Everything the reducers need about one explained instance.
#[derive(Debug, Clone)]
pub struct Prepared {
    /// One path per tree, in tree order.
    pub paths: Vec<DecisionPath>,
    pub prediction: Prediction,
    pub tally: Option<VoteTally>,
    pub constraint: Constraint,
}

impl Prepared {
    /// Extracts paths and derives the retention requirement (classification)
    /// or error constraint (regression, which needs a budget).
    pub fn new(model: &ForestModel, x: &[f64], budget: Option<ErrorBudget>) -> Result<Self> {
        let prediction = model.predict(x)?;
        let paths = extract_paths(model, x)?;
        match &prediction {
            Prediction::Class { index, .. } => {
                let tally = VoteTally::from_paths(&paths, model.n_classes())?;
                let requirement = requirement_for(model.task(), &tally, *index)?;
                let constraint = Constraint::classification(requirement, &paths);
                Ok(Prepared {
                    paths,
                    prediction,
                    tally: Some(tally),
                    constraint,
                })
            }
            Prediction::Value(_) => {
                let budget = budget.ok_or_else(|| {
                    Error::InvalidConfig("regression explanations need an allowed_error".into())
                })?;
                let constraint = Constraint::regression(ErrorModel::new(model, x)?, budget);
                Ok(Prepared {
                    paths,
                    prediction,
                    tally: None,
                    constraint,
                })
            }
        }
    }

    pub fn requirement(&self) -> Option<&RetentionRequirement> {
        self.constraint.requirement()
    }

    /// Paths voting the predicted class under a quorum requirement, every
    /// path otherwise.
    pub fn initial_pool(&self) -> Vec<DecisionPath> {
        match self.requirement() {
            Some(req) if req.rationale == Rationale::Quorum => self
                .paths
                .iter()
                .filter(|p| p.class_vote() == Some(req.class))
                .cloned()
                .collect(),
            _ => self.paths.clone(),
        }
    }

    /// Re-checks an outcome against the whole forest and adds paths if needed.
    pub fn validate(&self, mut outcome: ReductionOutcome) -> ReductionOutcome {
        if self.constraint.accepts(&outcome.refs()) {
            return outcome;
        }
        let mut keep = vec![false; self.paths.len()];
        for p in &outcome.retained_paths {
            keep[p.tree_index] = true;
        }
        let added = repair(&self.paths, &mut keep, &self.constraint);
        let mut trace = std::mem::take(&mut outcome.method_trace);
        trace.push(format!("repair(+{added})"));
        ReductionOutcome::from_mask(&self.paths, &keep, &self.constraint, trace)
    }
}

/// Applies the stages of `method` in order, each on the previous stage's
/// paths, re-validating after every stage.
pub fn run_stages(model: &ForestModel, prepared: &Prepared, method: &Method, options: &ReductionOptions) -> Result<ReductionOutcome> {
    method.check_task(model.task())?;
    let constraint = &prepared.constraint;
    let pool = prepared.initial_pool();
    let outcome = match method {
        Method::NoReduction => ReductionOutcome::whole(&pool, constraint, vec!["none".into()]),
        Method::Distribution(variant) => reduce_distribution(&pool, constraint, *variant)?,
        Method::Stages(stages) => {
            let mut current = ReductionOutcome::whole(&pool, constraint, Vec::new());
            for stage in stages {
                let input = std::mem::take(&mut current.retained_paths);
                let mut trace = std::mem::take(&mut current.method_trace);
                let next = match stage {
                    Stage::AssociationRules => reduce_association_rules(&input, constraint, &options.ar)?,
                    Stage::Clustering => {
                        let k = options.cluster.k.min(input.len());
                        reduce_clustering(&input, constraint, model.features(), &ClusterOptions { k })?
                    }
                    Stage::Random => reduce_random(&input, constraint, options.seed),
                };
                let next = prepared.validate(next);
                trace.extend(next.method_trace.iter().cloned());
                current = ReductionOutcome { method_trace: trace, ..next };
            }
            current
        }
    };
    Ok(prepared.validate(outcome))
}

/// Full reduction for one instance.
pub fn run_pipeline(
    model: &ForestModel,
    x: &[f64],
    method: &Method,
    options: &ReductionOptions,
    budget: Option<ErrorBudget>,
) -> Result<ReductionOutcome> {
    method.check_task(model.task())?;
    let prepared = Prepared::new(model, x, budget)?;
    run_stages(model, &prepared, method, options)
}
