//! Reduction through distribution-based selection (regression only).

use std::fmt;
use std::str::FromStr;

use super::{selected, ReductionOutcome};
use crate::error::{Error, Result};
use crate::model::DecisionPath;
use crate::quorum::Constraint;

/// Divisors of the band half-width.
pub const S_GRID: [f64; 15] = [0.1, 0.2, 0.5, 1.0, 2.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 20.0, 50.0, 100.0];

/// Band half-width in standard deviations before division by `s`.
pub const BAND_WIDTH: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DsVariant {
    /// Keep trees whose prediction falls inside the band.
    Inner,
    /// Keep trees whose prediction falls outside the band.
    Outer,
}

impl fmt::Display for DsVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DsVariant::Inner => "DSi",
            DsVariant::Outer => "DSo",
        })
    }
}

impl FromStr for DsVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dsi" => Ok(DsVariant::Inner),
            "dso" => Ok(DsVariant::Outer),
            other => Err(Error::InvalidMethod(other.into())),
        }
    }
}

/// Mean and population standard deviation.
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// For every `s` in [`S_GRID`] keeps the trees inside (or outside) the band
/// `mean ± 3σ/s` of the per-tree predictions and returns the smallest
/// non-empty candidate within the error budget; the first `s` wins ties.
/// Without any qualifying candidate all paths are kept.
pub fn reduce_distribution(paths: &[DecisionPath], constraint: &Constraint, variant: DsVariant) -> Result<ReductionOutcome> {
    if !constraint.is_regression() {
        return Err(Error::MethodTaskMismatch {
            method: variant.to_string(),
            task: "classification".into(),
        });
    }
    let preds: Vec<f64> = paths
        .iter()
        .map(|p| {
            p.value_vote()
                .ok_or_else(|| Error::Internal("regression path without a scalar vote".into()))
        })
        .collect::<Result<_>>()?;
    let (mean, sd) = mean_sd(&preds);
    let mut best: Option<(f64, Vec<bool>)> = None;
    if sd > 0.0 {
        for s in S_GRID {
            let half = BAND_WIDTH * sd / s;
            let (lo, hi) = (mean - half, mean + half);
            let keep: Vec<bool> = preds
                .iter()
                .map(|&p| {
                    let inside = !(p < lo || p > hi);
                    match variant {
                        DsVariant::Inner => inside,
                        DsVariant::Outer => !inside,
                    }
                })
                .collect();
            let chosen = selected(paths, &keep);
            if chosen.is_empty() || !constraint.accepts(&chosen) {
                continue;
            }
            if best.as_ref().map_or(true, |(_, b)| chosen.len() < b.iter().filter(|k| **k).count()) {
                best = Some((s, keep));
            }
        }
    }
    Ok(match best {
        Some((s, keep)) => ReductionOutcome::from_mask(
            paths,
            &keep,
            constraint,
            vec![format!("distribution({variant}, s={s}, c={BAND_WIDTH})")],
        ),
        None => ReductionOutcome::whole(
            paths,
            constraint,
            vec![format!("distribution({variant}): no band within budget, all paths kept")],
        ),
    })
}
