//! Permutation feature importance.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{ForestModel, Prediction};
use crate::trainer::Targets;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImportanceOptions {
    pub repeats: usize,
    pub seed: u64,
}

impl Default for ImportanceOptions {
    fn default() -> Self {
        ImportanceOptions { repeats: 5, seed: 42 }
    }
}

/// F1 per class weighted by the class support in `truth`.
pub fn weighted_f1(truth: &[usize], predicted: &[usize], n_classes: usize) -> f64 {
    let mut tp = vec![0usize; n_classes];
    let mut fp = vec![0usize; n_classes];
    let mut support = vec![0usize; n_classes];
    for (&t, &p) in truth.iter().zip(predicted) {
        support[t] += 1;
        if t == p {
            tp[t] += 1;
        } else {
            fp[p] += 1;
        }
    }
    let n: usize = support.iter().sum();
    if n == 0 {
        return 0.0;
    }
    (0..n_classes)
        .map(|c| {
            let denom = 2 * tp[c] + fp[c] + (support[c] - tp[c]);
            let f1 = if denom == 0 { 0.0 } else { 2.0 * tp[c] as f64 / denom as f64 };
            f1 * support[c] as f64 / n as f64
        })
        .sum()
}

pub fn mean_absolute_error(truth: &[f64], predicted: &[f64]) -> f64 {
    truth.iter().zip(predicted).map(|(a, b)| (a - b).abs()).sum::<f64>() / truth.len() as f64
}

/// Higher is better for both tasks.
fn score(model: &ForestModel, rows: &[Vec<f64>], targets: &Targets<'_>) -> f64 {
    match targets {
        Targets::Classes { y, n_classes } => {
            let pred: Vec<usize> = rows
                .iter()
                .map(|r| match model.predict_unchecked(r) {
                    Prediction::Class { index, .. } => index,
                    Prediction::Value(_) => 0,
                })
                .collect();
            weighted_f1(y, &pred, *n_classes)
        }
        Targets::Values(v) => {
            let pred: Vec<f64> = rows.iter().map(|r| model.predict_unchecked(r).value().unwrap_or(0.0)).collect();
            -mean_absolute_error(v, &pred)
        }
    }
}

/// Mean drop in weighted F1 (classification) or mean increase in MAE
/// (regression) when one column is shuffled, per feature.
pub fn permutation_importance(
    model: &ForestModel,
    rows: &[Vec<f64>],
    targets: Targets<'_>,
    options: &ImportanceOptions,
) -> Result<Vec<f64>> {
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if options.repeats == 0 {
        return Err(Error::InvalidConfig("importance repeats must be at least 1".into()));
    }
    let n = match &targets {
        Targets::Classes { y, .. } => y.len(),
        Targets::Values(v) => v.len(),
    };
    if n != rows.len() {
        return Err(Error::DimensionMismatch {
            expected: rows.len(),
            got: n,
        });
    }
    for r in rows {
        model.check_instance(r)?;
    }
    let baseline = score(model, rows, &targets);
    let repeats = options.repeats;
    Ok((0..model.n_features())
        .into_par_iter()
        .map(|f| {
            let mut drop = 0.0;
            for r in 0..repeats {
                let seed = options.seed.wrapping_add((f * repeats + r) as u64);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut column: Vec<f64> = rows.iter().map(|row| row[f]).collect();
                column.shuffle(&mut rng);
                let shuffled: Vec<Vec<f64>> = rows
                    .iter()
                    .zip(&column)
                    .map(|(row, &v)| {
                        let mut row = row.clone();
                        row[f] = v;
                        row
                    })
                    .collect();
                drop += baseline - score(model, &shuffled, &targets);
            }
            drop / repeats as f64
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::stump;
    use crate::model::{FeatureSpec, LeafValue, Task};

    #[test]
    fn f1_known_values() {
        assert_eq!(weighted_f1(&[0, 1, 1, 0], &[0, 1, 1, 0], 2), 1.0);
        // class 0: p=1/2 r=1/2; class 1: p=1/2 r=1/2.
        assert!((weighted_f1(&[0, 0, 1, 1], &[0, 1, 0, 1], 2) - 0.5).abs() < 1e-12);
        assert_eq!(weighted_f1(&[0, 0], &[1, 1], 2), 0.0);
    }

    #[test]
    fn only_used_feature_matters() {
        let features = vec![FeatureSpec::numeric(0, "a", 0.0, 1.0), FeatureSpec::numeric(1, "b", 0.0, 1.0)];
        let model = ForestModel::new(
            Task::Binary,
            vec!["n".into(), "y".into()],
            features,
            vec![stump(0, 0.5, LeafValue::Distribution(vec![1.0, 0.0]), LeafValue::Distribution(vec![0.0, 1.0]))],
        )
        .unwrap();
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![(i as f64 + 0.5) / 40.0, (i % 3) as f64 / 3.0]).collect();
        let y: Vec<usize> = rows.iter().map(|r| usize::from(r[0] > 0.5)).collect();
        let imp = permutation_importance(&model, &rows, Targets::Classes { y: &y, n_classes: 2 }, &ImportanceOptions::default())
            .unwrap();
        assert!(imp[0] > 0.2, "{imp:?}");
        assert_eq!(imp[1], 0.0);
        let again = permutation_importance(&model, &rows, Targets::Classes { y: &y, n_classes: 2 }, &ImportanceOptions::default())
            .unwrap();
        assert_eq!(imp, again);
    }
}
