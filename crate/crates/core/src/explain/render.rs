//! Text, JSON and plot-data renderings of a rule.

use std::fmt::Write as _;
use std::str::FromStr;

use serde_json::{json, Map, Value};

use super::{Consequent, ExplanationRule, FeatureRange, RuleCondition};
use crate::error::{Error, Result};
use crate::model::ForestModel;

const HISTOGRAM_BINS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Text,
    Json,
    PlotData,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "text" => Ok(Format::Text),
            "json" => Ok(Format::Json),
            "plotdata" => Ok(Format::PlotData),
            other => Err(Error::InvalidConfig(format!("unknown output format {other:?}"))),
        }
    }
}

/// Extra inputs for plot data: the unreduced rule for the same instance and
/// training rows (model column order) for the histograms.
#[derive(Debug, Clone, Copy, Default)]
pub struct PlotContext<'a> {
    pub baseline: Option<&'a ExplanationRule>,
    pub rows: Option<&'a [Vec<f64>]>,
}

pub fn render(rule: &ExplanationRule, model: &ForestModel, format: Format, ctx: PlotContext<'_>) -> Result<String> {
    match format {
        Format::Text => Ok(text(rule, model)),
        Format::Json => Ok(serde_json::to_string_pretty(rule)?),
        Format::PlotData => Ok(serde_json::to_string_pretty(&plot_data(rule, model, ctx))?),
    }
}

fn range_name<'a>(r: &'a FeatureRange, model: &'a ForestModel) -> &'a str {
    r.name
        .as_deref()
        .or_else(|| model.features().get(r.feature).map(|f| f.name.as_str()))
        .unwrap_or("?")
}

/// `if a < f ≤ b and g=v then label`, plus a line listing alternatives.
pub fn text(rule: &ExplanationRule, model: &ForestModel) -> String {
    let parts: Vec<String> = rule
        .conditions
        .iter()
        .map(|c| match c {
            RuleCondition::Range(r) => format!(
                "{} {} {} {} {}",
                r.lower,
                if r.lower_inclusive { "≤" } else { "<" },
                range_name(r, model),
                if r.upper_inclusive { "≤" } else { "<" },
                r.upper
            ),
            RuleCondition::Equality(e) => format!("{}={}", e.group, e.value),
        })
        .collect();
    let consequent = match &rule.consequent {
        Consequent::Class { label, .. } => label.clone(),
        Consequent::Value { value, error, .. } => format!("{value} ± {error}"),
    };
    let mut out = if parts.is_empty() {
        format!("if then {consequent}")
    } else {
        format!("if {} then {consequent}", parts.join(" and "))
    };
    for (group, values) in &rule.alternatives {
        let _ = write!(out, "\nalternatives: {group} ∈ {{{}}}", values.join(", "));
    }
    out
}

fn histogram(values: &[f64], lo: f64, hi: f64) -> (Vec<f64>, Vec<usize>) {
    if !(hi > lo) {
        return (vec![lo, hi], vec![values.len()]);
    }
    let width = (hi - lo) / HISTOGRAM_BINS as f64;
    let edges = (0..=HISTOGRAM_BINS).map(|i| lo + width * i as f64).collect();
    let mut counts = vec![0; HISTOGRAM_BINS];
    for &v in values {
        let bin = (((v - lo) / width) as usize).min(HISTOGRAM_BINS - 1);
        counts[bin] += 1;
    }
    (edges, counts)
}

fn bounds(r: Option<&FeatureRange>, lo: f64, hi: f64) -> Value {
    match r {
        Some(r) => json!([r.lower, r.upper]),
        None => json!([lo, hi]),
    }
}

/// Per rule feature: histogram of the training values, the instance value
/// and the reduced and unreduced bounds; per categorical group the current
/// value and listed alternatives.
pub fn plot_data(rule: &ExplanationRule, model: &ForestModel, ctx: PlotContext<'_>) -> Value {
    let mut features = Map::new();
    for r in rule.ranges() {
        let spec = &model.features()[r.feature];
        let values: Vec<f64> = ctx.rows.map(|rows| rows.iter().map(|row| row[r.feature]).collect()).unwrap_or_default();
        let (edges, counts) = histogram(&values, spec.domain_min, spec.domain_max);
        let original = ctx.baseline.map(|b| bounds(b.range_for(r.feature), spec.domain_min, spec.domain_max));
        features.insert(
            spec.name.clone(),
            json!({
                "histogram": {"edges": edges, "counts": counts},
                "instance_value": rule.instance.as_ref().map(|x| x[r.feature]),
                "reduced": [r.lower, r.upper],
                "original": original,
            }),
        );
    }
    let mut categoricals = Map::new();
    for g in model.groups() {
        let current = rule.instance.as_ref().and_then(|x| {
            g.members
                .iter()
                .find(|&&m| x[m] == 1.0)
                .and_then(|&m| model.features()[m].member_value.clone())
        });
        let in_rule = rule.equalities().any(|e| e.group == g.name);
        let alternatives = rule.alternatives.get(&g.name).cloned().unwrap_or_default();
        if !in_rule && alternatives.is_empty() {
            continue;
        }
        categoricals.insert(
            g.name.clone(),
            json!({"current": current, "in_rule": in_rule, "alternatives": alternatives}),
        );
    }
    json!({"features": features, "categoricals": categoricals})
}
