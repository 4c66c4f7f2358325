//! Bagged CART trainer.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::model::{FeatureSpec, ForestModel, LeafValue, Node, Task, Tree};

const IMPROVEMENT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaxFeatures {
    Sqrt,
    Log2,
    Fraction(f64),
    All,
}

impl MaxFeatures {
    /// Number of features examined per split out of `n`.
    pub fn count(self, n: usize) -> usize {
        let m = match self {
            MaxFeatures::Sqrt => (n as f64).sqrt().floor() as usize,
            MaxFeatures::Log2 => (n as f64).log2().floor() as usize,
            MaxFeatures::Fraction(f) => (f * n as f64).floor() as usize,
            MaxFeatures::All => n,
        };
        m.clamp(1, n.max(1))
    }
}

impl fmt::Display for MaxFeatures {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MaxFeatures::Sqrt => f.write_str("sqrt"),
            MaxFeatures::Log2 => f.write_str("log2"),
            MaxFeatures::Fraction(v) => write!(f, "{v}"),
            MaxFeatures::All => f.write_str("all"),
        }
    }
}

impl FromStr for MaxFeatures {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sqrt" => Ok(MaxFeatures::Sqrt),
            "log2" => Ok(MaxFeatures::Log2),
            "all" | "none" => Ok(MaxFeatures::All),
            other => other
                .parse::<f64>()
                .ok()
                .filter(|v| *v > 0.0 && *v <= 1.0)
                .map(MaxFeatures::Fraction)
                .ok_or_else(|| {
                    Error::InvalidConfig(format!(
                        "max_features must be sqrt, log2, all or a fraction in (0, 1], got {other:?}"
                    ))
                }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub n_estimators: usize,
    pub max_depth: Option<usize>,
    pub max_features: MaxFeatures,
    pub min_samples_leaf: usize,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            n_estimators: 100,
            max_depth: None,
            max_features: MaxFeatures::Sqrt,
            min_samples_leaf: 1,
            bootstrap: true,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_estimators == 0 {
            return Err(Error::InvalidConfig("n_estimators must be at least 1".into()));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::InvalidConfig("min_samples_leaf must be at least 1".into()));
        }
        if let MaxFeatures::Fraction(f) = self.max_features {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "max_features fraction must lie in (0, 1], got {f}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Targets<'a> {
    Classes { y: &'a [usize], n_classes: usize },
    Values(&'a [f64]),
}

/// Trains a forest on `rows` whose columns follow `features`.
pub fn train(
    features: Vec<FeatureSpec>,
    classes: Vec<String>,
    rows: &[Vec<f64>],
    targets: Targets<'_>,
    task: Task,
    config: &TrainConfig,
) -> Result<ForestModel> {
    config.validate()?;
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n_features = features.len();
    if rows.iter().any(|r| r.len() != n_features) {
        return Err(Error::InvalidData("row length differs from feature count".into()));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidData("non-finite feature value".into()));
    }
    match (task, targets) {
        (Task::Regression, Targets::Values(y)) => {
            if y.len() != rows.len() {
                return Err(Error::InvalidData("target length differs from row count".into()));
            }
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidData("non-finite target".into()));
            }
            if rows.len() < 2 {
                return Err(Error::InvalidData("regression needs at least 2 rows".into()));
            }
        }
        (Task::Binary | Task::Multiclass, Targets::Classes { y, n_classes }) => {
            if y.len() != rows.len() {
                return Err(Error::InvalidData("target length differs from row count".into()));
            }
            if n_classes != classes.len() || y.iter().any(|&c| c >= n_classes) {
                return Err(Error::InvalidData("class index out of range".into()));
            }
            if y.iter().all(|&c| c == y[0]) {
                return Err(Error::InvalidData("classification target is constant".into()));
            }
        }
        _ => {
            return Err(Error::WrongTask {
                expected: task.to_string(),
                got: "mismatched target type".into(),
            })
        }
    }
    let builder = Builder {
        rows,
        targets,
        config,
        m: config.max_features.count(n_features),
    };
    let trees = (0..config.n_estimators)
        .into_par_iter()
        .map(|t| builder.grow(config.seed.wrapping_add(t as u64)))
        .collect::<Result<Vec<Tree>>>()?;
    ForestModel::new(task, classes, features, trees)
}

/// Trains on a dataset with a target column; feature specs and class labels
/// are derived from the data.
pub fn train_dataset(data: &Dataset, task: Task, config: &TrainConfig) -> Result<ForestModel> {
    let features = data.feature_specs()?;
    if task == Task::Regression {
        let y = data.numeric_targets()?;
        train(features, Vec::new(), &data.rows, Targets::Values(&y), task, config)
    } else {
        let classes = data.class_labels()?;
        let expected_binary = classes.len() == 2;
        if (task == Task::Binary) != expected_binary {
            return Err(Error::InvalidData(format!(
                "{task} task but the target has {} classes",
                classes.len()
            )));
        }
        let y = data.class_targets(&classes)?;
        let n_classes = classes.len();
        train(features, classes, &data.rows, Targets::Classes { y: &y, n_classes }, task, config)
    }
}

struct Builder<'a> {
    rows: &'a [Vec<f64>],
    targets: Targets<'a>,
    config: &'a TrainConfig,
    m: usize,
}

struct Split {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl Builder<'_> {
    fn grow(&self, seed: u64) -> Result<Tree> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.rows.len();
        let samples: Vec<usize> = if self.config.bootstrap {
            (0..n).map(|_| rng.gen_range(0..n)).collect()
        } else {
            (0..n).collect()
        };
        let mut nodes = Vec::new();
        self.build(samples, 0, &mut rng, &mut nodes);
        Tree::new(nodes)
    }

    fn build(&self, samples: Vec<usize>, depth: usize, rng: &mut ChaCha8Rng, nodes: &mut Vec<Node>) -> usize {
        let index = nodes.len();
        nodes.push(Node::Leaf(self.leaf(&samples)));
        let depth_ok = self.config.max_depth.map_or(true, |d| depth < d);
        if !depth_ok || samples.len() < 2 * self.config.min_samples_leaf || self.is_pure(&samples) {
            return index;
        }
        let Some(split) = self.best_split(&samples, rng) else {
            return index;
        };
        let (left, right): (Vec<usize>, Vec<usize>) = samples
            .iter()
            .partition(|&&s| self.rows[s][split.feature] <= split.threshold);
        let l = self.build(left, depth + 1, rng, nodes);
        let r = self.build(right, depth + 1, rng, nodes);
        nodes[index] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: l,
            right: r,
        };
        index
    }

    fn leaf(&self, samples: &[usize]) -> LeafValue {
        match self.targets {
            Targets::Classes { y, n_classes } => {
                let mut counts = vec![0.0; n_classes];
                for &s in samples {
                    counts[y[s]] += 1.0;
                }
                let n = samples.len() as f64;
                LeafValue::Distribution(counts.into_iter().map(|c| c / n).collect())
            }
            Targets::Values(y) => {
                LeafValue::Scalar(samples.iter().map(|&s| y[s]).sum::<f64>() / samples.len() as f64)
            }
        }
    }

    fn is_pure(&self, samples: &[usize]) -> bool {
        match self.targets {
            Targets::Classes { y, .. } => samples.iter().all(|&s| y[s] == y[samples[0]]),
            Targets::Values(y) => samples.iter().all(|&s| y[s] == y[samples[0]]),
        }
    }

    /// Examines features in random order until `m` non-constant ones are seen,
    /// then picks the best split among them (lowest feature id, then lowest
    /// threshold, on equal impurity).
    fn best_split(&self, samples: &[usize], rng: &mut ChaCha8Rng) -> Option<Split> {
        let n_features = self.rows[0].len();
        let mut order: Vec<usize> = (0..n_features).collect();
        order.shuffle(rng);
        let mut chosen = Vec::with_capacity(self.m);
        for f in order {
            if chosen.len() == self.m {
                break;
            }
            let first = self.rows[samples[0]][f];
            if samples.iter().any(|&s| self.rows[s][f] != first) {
                chosen.push(f);
            }
        }
        chosen.sort_unstable();
        let mut best: Option<Split> = None;
        for f in chosen {
            if let Some(s) = self.best_split_on(samples, f) {
                let better = match &best {
                    None => true,
                    Some(b) => s.score < b.score - IMPROVEMENT_EPS * b.score.abs().max(1.0),
                };
                if better {
                    best = Some(s);
                }
            }
        }
        best
    }

    fn best_split_on(&self, samples: &[usize], f: usize) -> Option<Split> {
        let mut sorted: Vec<usize> = samples.to_vec();
        sorted.sort_by(|&a, &b| self.rows[a][f].total_cmp(&self.rows[b][f]));
        let n = sorted.len();
        let min_leaf = self.config.min_samples_leaf;
        let mut best: Option<Split> = None;
        let mut consider = |i: usize, score: f64| {
            // Split between sorted[i - 1] and sorted[i].
            let a = self.rows[sorted[i - 1]][f];
            let b = self.rows[sorted[i]][f];
            if a == b || i < min_leaf || n - i < min_leaf {
                return;
            }
            let mut threshold = a + (b - a) / 2.0;
            if !(threshold >= a && threshold < b) {
                threshold = a;
            }
            let better = match &best {
                None => true,
                Some(s) => score < s.score - IMPROVEMENT_EPS * s.score.abs().max(1.0),
            };
            if better {
                best = Some(Split {
                    feature: f,
                    threshold,
                    score,
                });
            }
        };
        match self.targets {
            Targets::Classes { y, n_classes } => {
                let mut left = vec![0usize; n_classes];
                let mut right = vec![0usize; n_classes];
                for &s in &sorted {
                    right[y[s]] += 1;
                }
                for i in 1..n {
                    let c = y[sorted[i - 1]];
                    left[c] += 1;
                    right[c] -= 1;
                    consider(i, gini_weighted(&left, i) + gini_weighted(&right, n - i));
                }
            }
            Targets::Values(y) => {
                let total: f64 = sorted.iter().map(|&s| y[s]).sum();
                let total_sq: f64 = sorted.iter().map(|&s| y[s] * y[s]).sum();
                let (mut sum_l, mut sq_l) = (0.0, 0.0);
                for i in 1..n {
                    let v = y[sorted[i - 1]];
                    sum_l += v;
                    sq_l += v * v;
                    let nl = i as f64;
                    let nr = (n - i) as f64;
                    let sum_r = total - sum_l;
                    let sq_r = total_sq - sq_l;
                    let sse = (sq_l - sum_l * sum_l / nl) + (sq_r - sum_r * sum_r / nr);
                    consider(i, sse);
                }
            }
        }
        best
    }
}

/// `n * gini` for a node with the given class counts.
fn gini_weighted(counts: &[usize], n: usize) -> f64 {
    let n = n as f64;
    n - counts.iter().map(|&c| (c * c) as f64).sum::<f64>() / n
}
