//! Rule metrics, reduction ratios and the sensitivity sweep.

use std::io::Write;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::explain::{explain_prepared, Consequent, ExplanationRule, RuleCondition};
use crate::model::{ForestModel, Task};
use crate::quorum::{default_allowed_error, ErrorBudget};
use crate::reduce::{Method, Miner, Prepared, ReductionOptions};
use crate::trainer::{train_dataset, Targets, TrainConfig};

pub fn rule_length(rule: &ExplanationRule) -> usize {
    rule.len()
}

/// Whether `row` meets every condition of the rule. An equality holds when
/// the group's member column for that value is set.
pub fn satisfies(rule: &ExplanationRule, model: &ForestModel, row: &[f64]) -> Result<bool> {
    if row.len() != model.n_features() {
        return Err(Error::DimensionMismatch {
            expected: model.n_features(),
            got: row.len(),
        });
    }
    for c in &rule.conditions {
        let ok = match c {
            RuleCondition::Range(r) => {
                let v = *row
                    .get(r.feature)
                    .ok_or_else(|| Error::SchemaMismatch(format!("rule names feature {}", r.feature)))?;
                r.contains(v)
            }
            RuleCondition::Equality(e) => {
                let member = model
                    .features()
                    .iter()
                    .find(|f| f.group.as_deref() == Some(e.group.as_str()) && f.member_value.as_deref() == Some(e.value.as_str()))
                    .ok_or_else(|| Error::SchemaMismatch(format!("no column for {}={}", e.group, e.value)))?;
                row[member.id] > 0.5
            }
        };
        if !ok {
            return Ok(false);
        }
    }
    Ok(true)
}

fn covered(rule: &ExplanationRule, model: &ForestModel, rows: &[Vec<f64>]) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        if satisfies(rule, model, r)? {
            out.push(i);
        }
    }
    Ok(out)
}

/// Fraction of rows meeting every condition.
pub fn coverage(rule: &ExplanationRule, model: &ForestModel, rows: &[Vec<f64>]) -> Result<f64> {
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(covered(rule, model, rows)?.len() as f64 / rows.len() as f64)
}

/// What the rule consequent is compared against on covered rows.
#[derive(Debug, Clone, Copy)]
pub enum PrecisionMode<'a> {
    /// The model's own prediction.
    Fidelity,
    /// Dataset targets, aligned with the rows.
    GroundTruth(Targets<'a>),
}

/// Classification: share of covered rows whose prediction (or target)
/// equals the consequent. Regression: mean absolute difference to the
/// consequent value.
pub fn precision(rule: &ExplanationRule, model: &ForestModel, rows: &[Vec<f64>], mode: PrecisionMode<'_>) -> Result<f64> {
    let idx = covered(rule, model, rows)?;
    if idx.is_empty() {
        return Err(Error::ZeroCoverage);
    }
    let n = idx.len() as f64;
    match &rule.consequent {
        Consequent::Class { label, index } => {
            let want = match index {
                Some(i) => *i,
                None => model
                    .classes()
                    .iter()
                    .position(|c| c == label)
                    .ok_or_else(|| Error::SchemaMismatch(format!("unknown class {label:?}")))?,
            };
            let mut hits = 0usize;
            for &i in &idx {
                let got = match mode {
                    PrecisionMode::Fidelity => model.predict(&rows[i])?.class(),
                    PrecisionMode::GroundTruth(Targets::Classes { y, .. }) => y.get(i).copied(),
                    PrecisionMode::GroundTruth(Targets::Values(_)) => {
                        return Err(Error::WrongTask {
                            expected: "classification".into(),
                            got: "regression".into(),
                        })
                    }
                };
                hits += usize::from(got == Some(want));
            }
            Ok(hits as f64 / n)
        }
        Consequent::Value { value, .. } => {
            let mut sum = 0.0;
            for &i in &idx {
                let got = match mode {
                    PrecisionMode::Fidelity => model.predict(&rows[i])?.value().unwrap_or(f64::NAN),
                    PrecisionMode::GroundTruth(Targets::Values(v)) => v.get(i).copied().unwrap_or(f64::NAN),
                    PrecisionMode::GroundTruth(Targets::Classes { .. }) => {
                        return Err(Error::WrongTask {
                            expected: "regression".into(),
                            got: "classification".into(),
                        })
                    }
                };
                sum += (got - value).abs();
            }
            Ok(sum / n)
        }
    }
}

fn ratio(kept: usize, baseline: usize) -> f64 {
    if baseline == 0 {
        return 0.0;
    }
    (1.0 - kept as f64 / baseline as f64).clamp(0.0, 1.0)
}

/// Share of the unreduced rule's features the reduced rule drops.
pub fn feature_reduction(reduced: &ExplanationRule, baseline: &ExplanationRule) -> f64 {
    ratio(reduced.len(), baseline.len())
}

/// Share of the unreduced rule's paths the reduced rule drops.
pub fn path_reduction(reduced_paths: usize, baseline_paths: usize) -> f64 {
    ratio(reduced_paths, baseline_paths)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InstanceMetrics {
    pub rule_length: usize,
    pub coverage: f64,
    pub precision: f64,
    pub feature_reduction: f64,
    pub path_reduction: f64,
}

/// Explains `x` with `method` and without reduction, then scores the
/// reduced rule on `rows` (fidelity precision).
pub fn evaluate_instance(
    model: &ForestModel,
    prepared: &Prepared,
    x: &[f64],
    rows: &[Vec<f64>],
    method: &Method,
    options: &ReductionOptions,
) -> Result<InstanceMetrics> {
    let zeros = vec![0.0; model.n_features()];
    let baseline = explain_prepared(model, x, &zeros, prepared, &Method::NoReduction, options)?;
    let reduced = explain_prepared(model, x, &zeros, prepared, method, options)?;
    Ok(InstanceMetrics {
        rule_length: rule_length(&reduced.rule),
        coverage: coverage(&reduced.rule, model, rows)?,
        precision: precision(&reduced.rule, model, rows, PrecisionMode::Fidelity)?,
        feature_reduction: feature_reduction(&reduced.rule, &baseline.rule),
        path_reduction: path_reduction(reduced.outcome.retained_paths.len(), baseline.outcome.retained_paths.len()),
    })
}

/// Population mean and standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub dataset: String,
    pub task: Task,
    pub n_estimators: Vec<usize>,
    pub max_depth: Vec<Option<usize>>,
    pub methods: Vec<Method>,
    pub miner: Miner,
    pub min_support: Vec<f64>,
    pub k: Vec<usize>,
    /// Regression budgets as multiples of the model's held-out MAE.
    pub allowed_error_scale: Vec<f64>,
    pub seeds: Vec<u64>,
    pub instances: usize,
    pub holdout: f64,
}

impl SweepConfig {
    pub fn new(dataset: impl Into<String>, task: Task) -> Self {
        SweepConfig {
            dataset: dataset.into(),
            task,
            n_estimators: vec![10],
            max_depth: vec![Some(5)],
            methods: Method::all_for(task),
            miner: Miner::Apriori,
            min_support: vec![0.1],
            k: vec![5],
            allowed_error_scale: vec![1.0],
            seeds: vec![42],
            instances: 10,
            holdout: 0.2,
        }
    }

    fn validate(&self) -> Result<()> {
        let empty = [
            ("n_estimators", self.n_estimators.is_empty()),
            ("max_depth", self.max_depth.is_empty()),
            ("methods", self.methods.is_empty()),
            ("min_support", self.min_support.is_empty()),
            ("k", self.k.is_empty()),
            ("allowed_error_scale", self.allowed_error_scale.is_empty()),
            ("seeds", self.seeds.is_empty()),
        ];
        if let Some((name, _)) = empty.iter().find(|(_, e)| *e) {
            return Err(Error::InvalidConfig(format!("sweep grid {name} is empty")));
        }
        if self.instances == 0 {
            return Err(Error::InvalidConfig("sweep needs at least one instance".into()));
        }
        if !(self.holdout > 0.0 && self.holdout < 1.0) {
            return Err(Error::InvalidConfig("holdout must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// One CSV row; the field order is the column order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub dataset: String,
    pub task: String,
    pub n_estimators: usize,
    pub max_depth: Option<usize>,
    pub method: String,
    pub miner: String,
    pub min_support: f64,
    pub k: usize,
    pub allowed_error: Option<f64>,
    pub seed: u64,
    pub instances: usize,
    pub rule_length_mean: f64,
    pub rule_length_std: f64,
    pub coverage_mean: f64,
    pub coverage_std: f64,
    pub precision_mean: f64,
    pub precision_std: f64,
    pub fr_mean: f64,
    pub fr_std: f64,
    pub pr_mean: f64,
    pub pr_std: f64,
}

struct LfCell<'a> {
    method: &'a Method,
    min_support: f64,
    k: usize,
    scale: f64,
}

/// Trains one forest per (estimators, depth, seed), explains a seeded sample
/// of held-out rows under every reducer setting and aggregates the metrics.
/// Reducer settings that do not fit the task are skipped.
pub fn sensitivity_sweep(data: &Dataset, config: &SweepConfig) -> Result<Vec<SweepRow>> {
    config.validate()?;
    let mut lf = Vec::new();
    for method in &config.methods {
        if let Err(e) = method.check_task(config.task) {
            log::warn!("skipping method {method}: {e}");
            continue;
        }
        for &min_support in &config.min_support {
            for &k in &config.k {
                let scales: &[f64] = if config.task == Task::Regression { &config.allowed_error_scale } else { &[f64::NAN] };
                for &scale in scales {
                    lf.push(LfCell { method, min_support, k, scale });
                }
            }
        }
    }
    let mut rf = Vec::new();
    for &n in &config.n_estimators {
        for &depth in &config.max_depth {
            for &seed in &config.seeds {
                rf.push((n, depth, seed));
            }
        }
    }
    let blocks: Vec<Vec<SweepRow>> = rf
        .par_iter()
        .map(|&(n, depth, seed)| sweep_forest(data, config, &lf, n, depth, seed))
        .collect::<Result<_>>()?;
    Ok(blocks.into_iter().flatten().collect())
}

fn sweep_forest(
    data: &Dataset,
    config: &SweepConfig,
    lf: &[LfCell<'_>],
    n_estimators: usize,
    max_depth: Option<usize>,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    let (train, held) = data.split(config.holdout, seed);
    let train_config = TrainConfig {
        n_estimators,
        max_depth,
        seed,
        ..TrainConfig::default()
    };
    let model = train_dataset(&train, config.task, &train_config)?;
    let rows = held.project(model.features())?;
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mae = if config.task == Task::Regression {
        Some(default_allowed_error(&model, &rows, &held.numeric_targets()?)?.allowed_error)
    } else {
        None
    };
    let count = config.instances.min(rows.len());
    let mut picked: Vec<usize> = sample(&mut ChaCha8Rng::seed_from_u64(seed), rows.len(), count).into_vec();
    picked.sort_unstable();

    let mut out = Vec::new();
    for cell in lf {
        let allowed = mae.map(|m| m * cell.scale);
        let options = ReductionOptions {
            ar: crate::reduce::ArOptions {
                miner: config.miner,
                min_support: cell.min_support,
                ..Default::default()
            },
            cluster: crate::reduce::ClusterOptions { k: cell.k },
            seed,
        };
        let mut metrics = Vec::new();
        for &i in &picked {
            let budget = allowed.map(ErrorBudget::user).transpose()?;
            let prepared = match Prepared::new(&model, &rows[i], budget) {
                Ok(p) => p,
                Err(Error::Tie { .. }) => {
                    log::info!("row {i}: tied vote, not explained");
                    continue;
                }
                Err(e) => return Err(e),
            };
            metrics.push(evaluate_instance(&model, &prepared, &rows[i], &rows, cell.method, &options)?);
        }
        let col = |f: fn(&InstanceMetrics) -> f64| mean_std(&metrics.iter().map(f).collect::<Vec<_>>());
        let (rule_length_mean, rule_length_std) = col(|m| m.rule_length as f64);
        let (coverage_mean, coverage_std) = col(|m| m.coverage);
        let (precision_mean, precision_std) = col(|m| m.precision);
        let (fr_mean, fr_std) = col(|m| m.feature_reduction);
        let (pr_mean, pr_std) = col(|m| m.path_reduction);
        out.push(SweepRow {
            dataset: config.dataset.clone(),
            task: config.task.to_string(),
            n_estimators,
            max_depth,
            method: cell.method.to_string(),
            miner: config.miner.to_string(),
            min_support: cell.min_support,
            k: cell.k,
            allowed_error: allowed,
            seed,
            instances: metrics.len(),
            rule_length_mean,
            rule_length_std,
            coverage_mean,
            coverage_std,
            precision_mean,
            precision_std,
            fr_mean,
            fr_std,
            pr_mean,
            pr_std,
        });
    }
    Ok(out)
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explain::{BoundOrigin, CategoricalEquality, FeatureRange};
    use crate::model::tests::stump;
    use crate::model::{FeatureSpec, LeafValue};
    use std::collections::BTreeMap;

    fn model() -> ForestModel {
        let d = |p: f64| LeafValue::Distribution(vec![1.0 - p, p]);
        ForestModel::new(
            Task::Binary,
            vec!["no".into(), "yes".into()],
            vec![
                FeatureSpec::numeric(0, "a", 0.0, 10.0),
                FeatureSpec::one_hot(1, "c=x", "c", "x"),
                FeatureSpec::one_hot(2, "c=y", "c", "y"),
            ],
            vec![stump(0, 5.0, d(0.0), d(1.0))],
        )
        .unwrap()
    }

    fn range(lower: f64, upper: f64) -> RuleCondition {
        RuleCondition::Range(FeatureRange {
            feature: 0,
            name: None,
            lower,
            upper,
            lower_inclusive: false,
            upper_inclusive: true,
            lower_origin: BoundOrigin::PathBound,
            upper_origin: BoundOrigin::PathBound,
        })
    }

    fn rule(conditions: Vec<RuleCondition>, label: &str) -> ExplanationRule {
        ExplanationRule {
            id: None,
            conditions,
            alternatives: BTreeMap::new(),
            consequent: Consequent::Class { label: label.into(), index: None },
            instance: None,
            trace: None,
        }
    }

    fn rows() -> Vec<Vec<f64>> {
        (0..10).map(|i| vec![i as f64, f64::from(u8::from(i % 2 == 0)), f64::from(u8::from(i % 2 == 1))]).collect()
    }

    #[test]
    fn counting() {
        let m = model();
        let eq = RuleCondition::Equality(CategoricalEquality { group: "c".into(), value: "x".into() });
        let r = rule(vec![range(3.0, 7.0), eq], "yes");
        assert_eq!(rule_length(&r), 2);
        // a in (3,7] and even: 4, 6.
        assert_eq!(coverage(&r, &m, &rows()).unwrap(), 0.2);
        assert_eq!(precision(&r, &m, &rows(), PrecisionMode::Fidelity).unwrap(), 0.5);
        assert_eq!(coverage(&rule(vec![], "yes"), &m, &rows()).unwrap(), 1.0);
        let none = rule(vec![range(20.0, 30.0)], "yes");
        assert!(matches!(precision(&none, &m, &rows(), PrecisionMode::Fidelity), Err(Error::ZeroCoverage)));
        let y: Vec<usize> = (0..10).map(|i| usize::from(i >= 4)).collect();
        let gt = PrecisionMode::GroundTruth(Targets::Classes { y: &y, n_classes: 2 });
        assert_eq!(precision(&r, &m, &rows(), gt).unwrap(), 1.0);
    }

    #[test]
    fn ratios_clamp() {
        let three = rule(vec![range(0.0, 1.0), range(0.0, 1.0), range(0.0, 1.0)], "no");
        let one = rule(vec![range(0.0, 1.0)], "no");
        assert!((feature_reduction(&one, &three) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(feature_reduction(&three, &one), 0.0);
        assert_eq!(path_reduction(51, 99), 1.0 - 51.0 / 99.0);
        assert_eq!(path_reduction(3, 0), 0.0);
    }
}
