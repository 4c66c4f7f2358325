//! Path reduction strategies and their composition.
//!
//! Every reducer maps a pool of decision paths to a retained subset that the
//! [`Constraint`] accepts. Whenever a reducer cannot reach an accepted subset
//! inside its pool it returns the pool unchanged; the pipeline then tops the
//! selection up from the whole forest.

pub mod association;
pub mod clustering;
pub mod distribution;
pub mod itemsets;
pub mod pipeline;
pub mod random;
pub mod similarity;

use std::collections::BTreeSet;

use serde::Serialize;

use crate::model::DecisionPath;
use crate::quorum::Constraint;

pub use association::{reduce_association_rules, ArOptions, Miner};
pub use clustering::{reduce_clustering, ClusterOptions};
pub use distribution::{reduce_distribution, DsVariant, S_GRID};
pub use pipeline::{run_pipeline, Method, Prepared, ReductionOptions, Stage};
pub use random::reduce_random;
pub use similarity::{path_similarity, DissimilarityMatrix};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReductionOutcome {
    /// Retained paths ordered by tree index.
    pub retained_paths: Vec<DecisionPath>,
    pub retained_features: BTreeSet<usize>,
    pub achieved_local_error: Option<f64>,
    pub method_trace: Vec<String>,
}

impl ReductionOutcome {
    /// Outcome holding the flagged members of `pool`.
    pub fn from_mask(pool: &[DecisionPath], keep: &[bool], constraint: &Constraint, method_trace: Vec<String>) -> Self {
        let mut retained_paths: Vec<DecisionPath> = pool
            .iter()
            .zip(keep)
            .filter(|(_, k)| **k)
            .map(|(p, _)| p.clone())
            .collect();
        retained_paths.sort_by_key(|p| p.tree_index);
        let refs: Vec<&DecisionPath> = retained_paths.iter().collect();
        let achieved_local_error = constraint.local_error(&refs);
        ReductionOutcome {
            retained_features: feature_union(&refs),
            retained_paths,
            achieved_local_error,
            method_trace,
        }
    }

    pub fn whole(pool: &[DecisionPath], constraint: &Constraint, method_trace: Vec<String>) -> Self {
        ReductionOutcome::from_mask(pool, &vec![true; pool.len()], constraint, method_trace)
    }

    pub fn retained_trees(&self) -> Vec<usize> {
        self.retained_paths.iter().map(|p| p.tree_index).collect()
    }

    pub fn refs(&self) -> Vec<&DecisionPath> {
        self.retained_paths.iter().collect()
    }
}

pub fn feature_union(paths: &[&DecisionPath]) -> BTreeSet<usize> {
    paths.iter().flat_map(|p| p.conditions.iter().map(|c| c.feature)).collect()
}

pub(crate) fn selected<'a>(pool: &'a [DecisionPath], keep: &[bool]) -> Vec<&'a DecisionPath> {
    pool.iter().zip(keep).filter(|(_, k)| **k).map(|(p, _)| p).collect()
}

/// Adds paths from `pool` to the selection until the constraint accepts it
/// or the pool is exhausted. Returns the number of paths added.
///
/// Candidates are ranked by the number of features they would add; ties go
/// to paths that strengthen the predicted class (classification) or lower
/// the error bound most (regression), then to the lowest tree index.
pub(crate) fn repair(pool: &[DecisionPath], keep: &mut [bool], constraint: &Constraint) -> usize {
    let mut added = 0;
    loop {
        let current = selected(pool, keep);
        if constraint.accepts(&current) || current.len() == pool.len() {
            return added;
        }
        let features = feature_union(&current);
        let new_features = |p: &DecisionPath| p.features().difference(&features).count();
        let candidates: Vec<usize> = (0..pool.len()).filter(|&i| !keep[i]).collect();
        let best = match constraint {
            Constraint::Classification { requirement, .. } => {
                let m = requirement.class;
                let mut counts = vec![0usize; requirement.mandatory.len()];
                for p in &current {
                    if let Some(c) = p.class_vote() {
                        counts[c] += 1;
                    }
                }
                let deficit = (0..counts.len()).find(|&c| {
                    counts[c] < requirement.mandatory[c]
                        && candidates.iter().any(|&i| pool[i].class_vote() == Some(c))
                });
                let lead = |p: &DecisionPath| {
                    let d = p.leaf.distribution().unwrap_or(&[]);
                    let rival = d
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != m)
                        .map(|(_, v)| *v)
                        .fold(0.0, f64::max);
                    p.leaf.class_probability(m) - rival
                };
                candidates
                    .iter()
                    .copied()
                    .filter(|&i| deficit.map_or(true, |c| pool[i].class_vote() == Some(c)))
                    .min_by(|&a, &b| {
                        let (pa, pb) = (&pool[a], &pool[b]);
                        let votes_m = |p: &DecisionPath| usize::from(p.class_vote() != Some(m));
                        votes_m(pa)
                            .cmp(&votes_m(pb))
                            .then(new_features(pa).cmp(&new_features(pb)))
                            .then(lead(pb).total_cmp(&lead(pa)))
                            .then(pa.tree_index.cmp(&pb.tree_index))
                    })
            }
            Constraint::Regression { errors, .. } => {
                let error_with = |i: usize| {
                    let mut with = current.clone();
                    with.push(&pool[i]);
                    errors.error_for(with.iter().copied())
                };
                candidates.iter().copied().min_by(|&a, &b| {
                    new_features(&pool[a])
                        .cmp(&new_features(&pool[b]))
                        .then(error_with(a).total_cmp(&error_with(b)))
                        .then(pool[a].tree_index.cmp(&pool[b].tree_index))
                })
            }
        };
        match best {
            Some(i) => {
                keep[i] = true;
                added += 1;
            }
            None => return added,
        }
    }
}
