//! Range-overlap similarity between decision paths.

use rayon::prelude::*;

use crate::model::{path_interval, DecisionPath, FeatureSpec};

/// Per feature: 1 when neither path tests it, 0 when only one does, and the
/// overlap-over-span ratio of the two ranges when both do. Open range sides
/// are closed with the feature's domain bounds. The sum is divided by the
/// number of features.
pub fn path_similarity(a: &DecisionPath, b: &DecisionPath, features: &[FeatureSpec]) -> f64 {
    if features.is_empty() {
        return 1.0;
    }
    let closed = |p: &DecisionPath, f: &FeatureSpec| {
        path_interval(p, f.id).map(|iv| {
            let lo = if iv.lower.is_finite() { iv.lower } else { f.domain_min };
            let hi = if iv.upper.is_finite() { iv.upper } else { f.domain_max };
            (lo, hi)
        })
    };
    let mut sum = 0.0;
    for f in features {
        match (closed(a, f), closed(b, f)) {
            (None, None) => sum += 1.0,
            (Some(x), Some(y)) => {
                if x == y {
                    sum += 1.0;
                    continue;
                }
                let inter = x.1.min(y.1) - x.0.max(y.0);
                let union = x.1.max(y.1) - x.0.min(y.0);
                if inter > 0.0 && union != 0.0 {
                    sum += inter / union;
                }
            }
            _ => {}
        }
    }
    sum / features.len() as f64
}

/// Symmetric matrix of `1 - path_similarity` values.
#[derive(Debug, Clone, PartialEq)]
pub struct DissimilarityMatrix {
    n: usize,
    values: Vec<f64>,
}

impl DissimilarityMatrix {
    pub fn from_paths(paths: &[DecisionPath], features: &[FeatureSpec]) -> Self {
        let n = paths.len();
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if i == j {
                            0.0
                        } else {
                            // Evaluate in a fixed argument order so d(i, j) == d(j, i) bit for bit.
                            let (x, y) = if i < j { (i, j) } else { (j, i) };
                            (1.0 - path_similarity(&paths[x], &paths[y], features)).clamp(0.0, 1.0)
                        }
                    })
                    .collect()
            })
            .collect();
        DissimilarityMatrix {
            n,
            values: rows.into_iter().flatten().collect(),
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }
}

impl kmedoids::arrayadapter::ArrayAdapter<f64> for DissimilarityMatrix {
    fn len(&self) -> usize {
        self.n
    }

    fn is_square(&self) -> bool {
        true
    }

    fn get(&self, x: usize, y: usize) -> f64 {
        self.at(x, y)
    }
}
