//! Reduction through association rules mined from path feature sets.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use super::itemsets::{apriori, association_rules, fpgrowth};
use super::ReductionOutcome;
use crate::error::{Error, Result};
use crate::model::DecisionPath;
use crate::quorum::Constraint;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Miner {
    Apriori,
    FpGrowth,
}

impl fmt::Display for Miner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Miner::Apriori => "apriori",
            Miner::FpGrowth => "fpgrowth",
        })
    }
}

impl FromStr for Miner {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "apriori" => Ok(Miner::Apriori),
            "fpgrowth" | "fp-growth" => Ok(Miner::FpGrowth),
            other => Err(Error::InvalidConfig(format!("unknown miner {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArOptions {
    pub miner: Miner,
    pub min_support: f64,
    pub max_len: usize,
}

impl Default for ArOptions {
    fn default() -> Self {
        ArOptions {
            miner: Miner::Apriori,
            min_support: 0.1,
            max_len: 4,
        }
    }
}

/// Feature order produced by the mined rules: antecedent features in
/// ascending rule confidence, each feature listed once.
pub fn antecedent_features(paths: &[DecisionPath], options: &ArOptions) -> Result<Vec<usize>> {
    let transactions: Vec<BTreeSet<usize>> = paths.iter().map(DecisionPath::features).collect();
    let freq = match options.miner {
        Miner::Apriori => apriori(&transactions, options.min_support, options.max_len)?,
        Miner::FpGrowth => fpgrowth(&transactions, options.min_support, options.max_len)?,
    };
    let mut order = Vec::new();
    for rule in association_rules(&freq) {
        for f in rule.antecedent {
            if !order.contains(&f) {
                order.push(f);
            }
        }
    }
    Ok(order)
}

/// Grows a feature set F' one antecedent feature at a time and keeps the
/// paths whose features all lie in F', stopping as soon as the constraint
/// accepts them. Falls back to the whole pool when the features run out.
pub fn reduce_association_rules(
    paths: &[DecisionPath],
    constraint: &Constraint,
    options: &ArOptions,
) -> Result<ReductionOutcome> {
    let order = antecedent_features(paths, options)?;
    let label = format!(
        "association_rules({}, min_support={}, max_len={})",
        options.miner, options.min_support, options.max_len
    );
    let feature_sets: Vec<BTreeSet<usize>> = paths.iter().map(DecisionPath::features).collect();
    let mut allowed = BTreeSet::new();
    for f in order {
        allowed.insert(f);
        let keep: Vec<bool> = feature_sets.iter().map(|s| s.is_subset(&allowed)).collect();
        let chosen: Vec<&DecisionPath> = super::selected(paths, &keep);
        if !chosen.is_empty() && constraint.accepts(&chosen) {
            let trace = vec![format!("{label}: {} features", allowed.len())];
            return Ok(ReductionOutcome::from_mask(paths, &keep, constraint, trace));
        }
    }
    Ok(ReductionOutcome::whole(
        paths,
        constraint,
        vec![format!("{label}: antecedents exhausted, all paths kept")],
    ))
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::{class_path, value_path};
    use super::*;
    use crate::model::TreeStats;
    use crate::quorum::{requirement_binary, ErrorBudget, ErrorModel, VoteTally};

    fn binary_constraint(paths: &[DecisionPath], counts: [usize; 2]) -> Constraint {
        let tally = VoteTally::from_counts(counts.to_vec()).unwrap();
        Constraint::classification(requirement_binary(&tally).unwrap(), paths)
    }

    #[test]
    fn identical_feature_sets() {
        let paths: Vec<DecisionPath> = (0..10).map(|t| class_path(t, 0, 2, &[(0, true, 0.5), (2, false, 0.1)])).collect();
        let c = binary_constraint(&paths, [10, 0]);
        let out = reduce_association_rules(&paths, &c, &ArOptions::default()).unwrap();
        assert_eq!(out.retained_paths.len(), 10);
        assert_eq!(out.retained_features, BTreeSet::from([0, 2]));
    }

    /// 60 paths over {0, 1} and 40 over {0, 2, 3}; every path votes class 0.
    fn two_cluster_pool() -> Vec<DecisionPath> {
        (0..100)
            .map(|t| {
                if t < 60 {
                    class_path(t, 0, 2, &[(0, true, 0.5), (1, false, 0.2)])
                } else {
                    class_path(t, 0, 2, &[(0, true, 0.7), (2, true, 0.3), (3, false, 0.9)])
                }
            })
            .collect()
    }

    #[test]
    fn keeps_larger_cluster() {
        let paths = two_cluster_pool();
        let c = binary_constraint(&paths, [100, 0]);
        for miner in [Miner::Apriori, Miner::FpGrowth] {
            let opts = ArOptions { miner, ..ArOptions::default() };
            assert_eq!(antecedent_features(&paths, &opts).unwrap()[..2], [0, 1]);
            let out = reduce_association_rules(&paths, &c, &opts).unwrap();
            assert_eq!(out.retained_paths.len(), 60);
            assert_eq!(out.retained_features, BTreeSet::from([0, 1]));
        }
    }

    #[test]
    fn regression_budget_stops_early() {
        // Excluding any one tree moves the mean by at most 1/4.
        let paths: Vec<DecisionPath> = (0..4).map(|t| value_path(t, 1.0, if t < 3 { &[0] } else { &[0, 1] })).collect();
        let stats = vec![TreeStats { min_pred: 0.0, max_pred: 2.0 }; 4];
        let em = ErrorModel::from_parts(vec![1.0; 4], stats);
        let c = Constraint::regression(em.clone(), ErrorBudget::user(0.25).unwrap());
        let out = reduce_association_rules(&paths, &c, &ArOptions { min_support: 0.2, ..ArOptions::default() }).unwrap();
        assert_eq!(out.retained_paths.len(), 3);
        assert_eq!(out.achieved_local_error, Some(0.25));
        let tight = Constraint::regression(em, ErrorBudget::user(0.1).unwrap());
        let out = reduce_association_rules(&paths, &tight, &ArOptions { min_support: 0.2, ..ArOptions::default() }).unwrap();
        assert_eq!(out.retained_paths.len(), 4);
    }
}
