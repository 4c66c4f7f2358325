//! Turning a reduced path set into a single rule.

pub mod importance;
pub mod render;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{path_interval, ForestModel, Prediction};
use crate::quorum::{ErrorBudget, RetentionRequirement};
use crate::reduce::pipeline::run_stages;
use crate::reduce::{Method, Prepared, ReductionOptions, ReductionOutcome};

pub use importance::{permutation_importance, ImportanceOptions};
pub use render::{render, Format, PlotContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BoundOrigin {
    #[default]
    PathBound,
    DomainBound,
}

fn yes() -> bool {
    true
}

/// `lower (<|<=) feature (<|<=) upper`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureRange {
    pub feature: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub lower: f64,
    pub upper: f64,
    #[serde(default = "yes")]
    pub lower_inclusive: bool,
    #[serde(default = "yes")]
    pub upper_inclusive: bool,
    #[serde(default)]
    pub lower_origin: BoundOrigin,
    #[serde(default)]
    pub upper_origin: BoundOrigin,
}

impl FeatureRange {
    pub fn contains(&self, v: f64) -> bool {
        let above = if self.lower_inclusive { v >= self.lower } else { v > self.lower };
        let below = if self.upper_inclusive { v <= self.upper } else { v < self.upper };
        above && below
    }

    /// True when `other` admits no value this range rejects.
    pub fn within(&self, other: &FeatureRange) -> bool {
        let lo_ok = self.lower > other.lower
            || (self.lower == other.lower && (other.lower_inclusive || !self.lower_inclusive));
        let hi_ok = self.upper < other.upper
            || (self.upper == other.upper && (other.upper_inclusive || !self.upper_inclusive));
        lo_ok && hi_ok
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CategoricalEquality {
    pub group: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RuleCondition {
    Range(FeatureRange),
    Equality(CategoricalEquality),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Consequent {
    Class {
        label: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        index: Option<usize>,
    },
    Value {
        value: f64,
        #[serde(default)]
        error: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        allowed_error: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct RuleTrace {
    pub method: String,
    pub steps: Vec<String>,
    pub retained_paths: usize,
    pub total_paths: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub minimum_paths: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationRule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub conditions: Vec<RuleCondition>,
    /// Per categorical group, values other than the instance's that the
    /// retained paths test.
    #[serde(default)]
    pub alternatives: BTreeMap<String, Vec<String>>,
    pub consequent: Consequent,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<RuleTrace>,
}

impl ExplanationRule {
    pub fn ranges(&self) -> impl Iterator<Item = &FeatureRange> {
        self.conditions.iter().filter_map(|c| match c {
            RuleCondition::Range(r) => Some(r),
            RuleCondition::Equality(_) => None,
        })
    }

    pub fn equalities(&self) -> impl Iterator<Item = &CategoricalEquality> {
        self.conditions.iter().filter_map(|c| match c {
            RuleCondition::Equality(e) => Some(e),
            RuleCondition::Range(_) => None,
        })
    }

    pub fn range_for(&self, feature: usize) -> Option<&FeatureRange> {
        self.ranges().find(|r| r.feature == feature)
    }

    /// Number of ranges plus equalities.
    pub fn len(&self) -> usize {
        self.conditions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.conditions.is_empty()
    }

    /// Model features mentioned by the rule: range features plus every
    /// member of a group with an equality.
    pub fn features(&self, model: &ForestModel) -> Vec<usize> {
        let mut out: Vec<usize> = self.ranges().map(|r| r.feature).collect();
        for eq in self.equalities() {
            out.extend(
                model
                    .features()
                    .iter()
                    .filter(|f| f.group.as_deref() == Some(eq.group.as_str()))
                    .map(|f| f.id),
            );
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Per retained numeric feature, the intersection of the retained paths'
/// intervals. Open sides fall back to the domain bounds, widened if needed
/// so that the range still holds the instance value.
pub fn intersect_ranges(outcome: &ReductionOutcome, x: &[f64], model: &ForestModel) -> Result<Vec<FeatureRange>> {
    let mut out = Vec::new();
    for &f in &outcome.retained_features {
        let spec = &model.features()[f];
        if spec.is_one_hot() {
            continue;
        }
        let mut lower = f64::NEG_INFINITY;
        let mut upper = f64::INFINITY;
        for p in &outcome.retained_paths {
            if let Some(iv) = path_interval(p, f) {
                lower = lower.max(iv.lower);
                upper = upper.min(iv.upper);
            }
        }
        let v = x[f];
        let mut range = FeatureRange {
            feature: f,
            name: Some(spec.name.clone()),
            lower,
            upper,
            lower_inclusive: false,
            upper_inclusive: true,
            lower_origin: BoundOrigin::PathBound,
            upper_origin: BoundOrigin::PathBound,
        };
        if !lower.is_finite() {
            range.lower = spec.domain_min.min(v);
            range.lower_inclusive = true;
            range.lower_origin = BoundOrigin::DomainBound;
        }
        if !upper.is_finite() {
            range.upper = spec.domain_max.max(v);
            range.upper_origin = BoundOrigin::DomainBound;
        }
        if !range.contains(v) {
            return Err(Error::Internal(format!(
                "range for feature {} excludes the instance value {v}",
                spec.name
            )));
        }
        out.push(range);
    }
    Ok(out)
}

/// Checks that every categorical group of `x` has exactly one active member.
pub fn check_one_hot(model: &ForestModel, x: &[f64]) -> Result<()> {
    for g in model.groups() {
        let ones = g.members.iter().filter(|&&m| x[m] == 1.0).count();
        let zeros = g.members.iter().filter(|&&m| x[m] == 0.0).count();
        if ones != 1 || ones + zeros != g.members.len() {
            return Err(Error::OneHotViolation { group: g.name });
        }
    }
    Ok(())
}

/// Equalities for groups whose active member column is tested by a retained
/// path, and per group the inactive member values that are tested.
pub fn resolve_categoricals(
    outcome: &ReductionOutcome,
    x: &[f64],
    model: &ForestModel,
) -> Result<(Vec<CategoricalEquality>, BTreeMap<String, Vec<String>>)> {
    check_one_hot(model, x)?;
    let mut equalities = Vec::new();
    let mut alternatives = BTreeMap::new();
    for g in model.groups() {
        let mut alts = Vec::new();
        for &m in &g.members {
            if !outcome.retained_features.contains(&m) {
                continue;
            }
            let value = model.features()[m].member_value.clone().unwrap_or_default();
            if x[m] == 1.0 {
                equalities.push(CategoricalEquality {
                    group: g.name.clone(),
                    value,
                });
            } else {
                alts.push(value);
            }
        }
        if !alts.is_empty() {
            alternatives.insert(g.name.clone(), alts);
        }
    }
    Ok((equalities, alternatives))
}

fn group_importance(model: &ForestModel, group: &str, importances: &[f64]) -> (f64, usize) {
    let members: Vec<usize> = model
        .features()
        .iter()
        .filter(|f| f.group.as_deref() == Some(group))
        .map(|f| f.id)
        .collect();
    let score = members.iter().map(|&m| importances.get(m).copied().unwrap_or(0.0)).sum();
    (score, members.into_iter().min().unwrap_or(usize::MAX))
}

/// Builds the rule: conditions ordered by importance (descending, then
/// feature id), consequent from the model prediction.
pub fn compose_rule(
    outcome: &ReductionOutcome,
    x: &[f64],
    model: &ForestModel,
    prediction: &Prediction,
    importances: &[f64],
    allowed_error: Option<f64>,
) -> Result<ExplanationRule> {
    let ranges = intersect_ranges(outcome, x, model)?;
    let (equalities, alternatives) = resolve_categoricals(outcome, x, model)?;
    let mut keyed: Vec<(f64, usize, RuleCondition)> = ranges
        .into_iter()
        .map(|r| (importances.get(r.feature).copied().unwrap_or(0.0), r.feature, RuleCondition::Range(r)))
        .collect();
    for eq in equalities {
        let (score, id) = group_importance(model, &eq.group, importances);
        keyed.push((score, id, RuleCondition::Equality(eq)));
    }
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let consequent = match prediction {
        Prediction::Class { index, .. } => Consequent::Class {
            label: model.describe(prediction),
            index: Some(*index),
        },
        Prediction::Value(v) => Consequent::Value {
            value: *v,
            error: outcome.achieved_local_error.unwrap_or(0.0),
            allowed_error,
        },
    };
    Ok(ExplanationRule {
        id: None,
        conditions: keyed.into_iter().map(|(_, _, c)| c).collect(),
        alternatives,
        consequent,
        instance: Some(x.to_vec()),
        trace: None,
    })
}

/// Result of explaining one instance.
#[derive(Debug, Clone)]
pub struct Explanation {
    pub rule: ExplanationRule,
    pub outcome: ReductionOutcome,
    pub prediction: Prediction,
    pub requirement: Option<RetentionRequirement>,
}

/// Prediction, path extraction, reduction and rule composition for `x`.
pub fn explain(
    model: &ForestModel,
    x: &[f64],
    importances: &[f64],
    method: &Method,
    options: &ReductionOptions,
    budget: Option<ErrorBudget>,
) -> Result<Explanation> {
    method.check_task(model.task())?;
    let prepared = Prepared::new(model, x, budget)?;
    explain_prepared(model, x, importances, &prepared, method, options)
}

/// Like [`explain`] but reusing an already prepared instance.
pub fn explain_prepared(
    model: &ForestModel,
    x: &[f64],
    importances: &[f64],
    prepared: &Prepared,
    method: &Method,
    options: &ReductionOptions,
) -> Result<Explanation> {
    let outcome = run_stages(model, prepared, method, options)?;
    let allowed = match &prepared.constraint {
        crate::quorum::Constraint::Regression { budget, .. } => Some(budget.allowed_error),
        _ => None,
    };
    let mut rule = compose_rule(&outcome, x, model, &prepared.prediction, importances, allowed)?;
    rule.trace = Some(RuleTrace {
        method: method.to_string(),
        steps: outcome.method_trace.clone(),
        retained_paths: outcome.retained_paths.len(),
        total_paths: model.n_trees(),
        minimum_paths: prepared.requirement().map(|r| r.minimum_paths),
    });
    Ok(Explanation {
        rule,
        outcome,
        prediction: prepared.prediction.clone(),
        requirement: prepared.requirement().cloned(),
    })
}
