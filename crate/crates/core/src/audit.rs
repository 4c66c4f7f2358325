//! Exhaustive single-feature check that a rule is conclusive.
//!
//! Between two consecutive split thresholds of a feature every tree routes
//! the same way, so probing each threshold, each inclusive end of the
//! allowed interval and the midpoints between them visits every region the
//! rule admits.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explain::{check_one_hot, Consequent, ExplanationRule, FeatureRange};
use crate::model::{ForestModel, Node, Prediction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Conclusive,
    Violated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProbeValue {
    Number(f64),
    Category(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub feature: String,
    pub value: ProbeValue,
    pub new_prediction: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub rule_id: Option<String>,
    pub verdict: Verdict,
    pub violations: Vec<Violation>,
    pub probes_evaluated: usize,
}

/// Sorted distinct split thresholds on `feature` across the forest.
pub fn breakpoints(model: &ForestModel, feature: usize) -> Vec<f64> {
    let mut out: Vec<f64> = model
        .trees()
        .iter()
        .flat_map(|t| t.nodes())
        .filter_map(|n| match n {
            Node::Split { feature: f, threshold, .. } if *f == feature => Some(*threshold),
            _ => None,
        })
        .collect();
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// Values of `feature` to try inside `range`.
pub fn probe_values(breaks: &[f64], range: &FeatureRange) -> Vec<f64> {
    let mut points: Vec<f64> = breaks.iter().copied().filter(|&b| range.contains(b)).collect();
    if range.lower_inclusive {
        points.push(range.lower);
    }
    if range.upper_inclusive {
        points.push(range.upper);
    }
    let mut anchors = points.clone();
    anchors.push(range.lower);
    anchors.push(range.upper);
    anchors.sort_by(f64::total_cmp);
    anchors.dedup();
    for w in anchors.windows(2) {
        let mid = w[0] + (w[1] - w[0]) / 2.0;
        if range.contains(mid) {
            points.push(mid);
        }
    }
    points.sort_by(f64::total_cmp);
    points.dedup();
    points
}

enum Expected {
    Class(usize),
    Value { value: f64, tolerance: f64 },
}

impl Expected {
    fn holds(&self, p: &Prediction) -> bool {
        match (self, p) {
            (Expected::Class(c), Prediction::Class { index, .. }) => index == c,
            (Expected::Value { value, tolerance }, Prediction::Value(v)) => (v - value).abs() <= *tolerance,
            _ => false,
        }
    }
}

fn expected(model: &ForestModel, rule: &ExplanationRule, actual: &Prediction) -> Result<Expected> {
    let mismatch = |rule_says: String| Error::ConsequentMismatch {
        rule: rule_says,
        model: model.describe(actual),
    };
    match (&rule.consequent, actual) {
        (Consequent::Class { label, index }, Prediction::Class { index: got, .. }) => {
            let want = match index {
                Some(i) => *i,
                None => model.classes().iter().position(|c| c == label).ok_or_else(|| mismatch(label.clone()))?,
            };
            if want != *got || model.classes().get(want) != Some(label) {
                return Err(mismatch(label.clone()));
            }
            Ok(Expected::Class(want))
        }
        (Consequent::Value { value, error, allowed_error }, Prediction::Value(got)) => {
            let slack = 1e-9 * value.abs().max(1.0);
            if (got - value).abs() > slack {
                return Err(mismatch(value.to_string()));
            }
            Ok(Expected::Value {
                value: *value,
                tolerance: allowed_error.unwrap_or(*error) + slack,
            })
        }
        (Consequent::Class { label, .. }, _) => Err(mismatch(label.clone())),
        (Consequent::Value { value, .. }, _) => Err(mismatch(value.to_string())),
    }
}

/// Checks that the rule refers to real features and that `x` satisfies it.
fn check_rule(model: &ForestModel, x: &[f64], rule: &ExplanationRule) -> Result<()> {
    let groups = model.groups();
    for r in rule.ranges() {
        let spec = model
            .features()
            .get(r.feature)
            .ok_or_else(|| Error::SchemaMismatch(format!("rule names feature {} but the model has {}", r.feature, model.n_features())))?;
        if let Some(name) = &r.name {
            if name != &spec.name {
                return Err(Error::SchemaMismatch(format!("rule feature {} is {name:?}, model has {:?}", r.feature, spec.name)));
            }
        }
        if spec.is_one_hot() {
            return Err(Error::SchemaMismatch(format!("range on categorical column {:?}", spec.name)));
        }
        if !r.contains(x[r.feature]) {
            return Err(Error::InvalidConfig(format!("instance value of {} lies outside the rule", spec.name)));
        }
    }
    for e in rule.equalities() {
        let g = groups
            .iter()
            .find(|g| g.name == e.group)
            .ok_or_else(|| Error::SchemaMismatch(format!("unknown categorical group {:?}", e.group)))?;
        let active = g.members.iter().find(|&&m| x[m] == 1.0).and_then(|&m| model.features()[m].member_value.as_deref());
        if active != Some(e.value.as_str()) {
            return Err(Error::InvalidConfig(format!("instance does not have {}={}", e.group, e.value)));
        }
    }
    Ok(())
}

struct Probed {
    order: (usize, usize),
    violation: Option<Violation>,
}

/// Perturbs one feature (or one categorical group) at a time within what
/// the rule allows and reports every probe whose prediction differs from
/// the rule's consequent.
pub fn audit(model: &ForestModel, x: &[f64], rule: &ExplanationRule) -> Result<AuditReport> {
    model.check_instance(x)?;
    check_one_hot(model, x)?;
    check_rule(model, x, rule)?;
    let actual = model.predict(x)?;
    let expect = expected(model, rule, &actual)?;

    let numeric: Vec<usize> = model.features().iter().filter(|f| !f.is_one_hot()).map(|f| f.id).collect();
    let mut probed: Vec<Probed> = numeric
        .par_iter()
        .flat_map_iter(|&f| {
            let spec = &model.features()[f];
            let range = rule.range_for(f).cloned().unwrap_or(FeatureRange {
                feature: f,
                name: None,
                lower: spec.domain_min.min(x[f]),
                upper: spec.domain_max.max(x[f]),
                lower_inclusive: true,
                upper_inclusive: true,
                lower_origin: Default::default(),
                upper_origin: Default::default(),
            });
            let values = probe_values(&breakpoints(model, f), &range);
            let mut probe = x.to_vec();
            values
                .into_iter()
                .enumerate()
                .map(|(i, v)| {
                    probe[f] = v;
                    let p = model.predict_unchecked(&probe);
                    Probed {
                        order: (f, i),
                        violation: (!expect.holds(&p)).then(|| Violation {
                            feature: spec.name.clone(),
                            value: ProbeValue::Number(v),
                            new_prediction: model.describe(&p),
                        }),
                    }
                })
                .collect::<Vec<_>>()
        })
        .collect();

    for g in model.groups() {
        let first = g.members.iter().copied().min().unwrap_or(0);
        let value_of = |m: usize| model.features()[m].member_value.clone().unwrap_or_default();
        let allowed: Vec<usize> = if rule.equalities().any(|e| e.group == g.name) {
            g.members.iter().copied().filter(|&m| x[m] == 1.0).collect()
        } else if let Some(alts) = rule.alternatives.get(&g.name) {
            g.members.iter().copied().filter(|&m| !alts.contains(&value_of(m))).collect()
        } else {
            g.members.clone()
        };
        for (i, &m) in allowed.iter().enumerate() {
            let mut probe = x.to_vec();
            for &other in &g.members {
                probe[other] = 0.0;
            }
            probe[m] = 1.0;
            let p = model.predict_unchecked(&probe);
            probed.push(Probed {
                order: (first, i),
                violation: (!expect.holds(&p)).then(|| Violation {
                    feature: g.name.clone(),
                    value: ProbeValue::Category(value_of(m)),
                    new_prediction: model.describe(&p),
                }),
            });
        }
    }

    probed.sort_by_key(|p| p.order);
    let probes_evaluated = probed.len();
    let violations: Vec<Violation> = probed.into_iter().filter_map(|p| p.violation).collect();
    Ok(AuditReport {
        rule_id: rule.id.clone(),
        verdict: if violations.is_empty() { Verdict::Conclusive } else { Verdict::Violated },
        violations,
        probes_evaluated,
    })
}
