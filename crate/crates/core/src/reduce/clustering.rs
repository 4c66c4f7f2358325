//! Reduction through k-medoids clustering of paths.

use super::similarity::DissimilarityMatrix;
use super::{selected, ReductionOutcome};
use crate::error::{Error, Result};
use crate::model::{DecisionPath, FeatureSpec};
use crate::quorum::Constraint;

const PAM_MAX_ITER: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClusterOptions {
    pub k: usize,
}

impl Default for ClusterOptions {
    fn default() -> Self {
        ClusterOptions { k: 5 }
    }
}

/// PAM (BUILD then SWAP) on a precomputed matrix. Returns the total cost,
/// the cluster label of every point and the medoid indices.
pub fn pam(matrix: &DissimilarityMatrix, k: usize) -> (f64, Vec<usize>, Vec<usize>) {
    let (loss, labels, medoids, _, _): (f64, _, _, _, _) = kmedoids::pam(matrix, k, PAM_MAX_ITER);
    (loss, labels, medoids)
}

/// Groups of pool indices, largest first; equal sizes ordered by their
/// smallest member.
pub fn clusters(labels: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut groups = vec![Vec::new(); k];
    for (i, &l) in labels.iter().enumerate() {
        groups[l].push(i);
    }
    groups.retain(|g| !g.is_empty());
    groups.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    groups
}

/// Accumulates whole clusters, biggest first, until the constraint accepts
/// the union.
pub fn reduce_clustering(
    paths: &[DecisionPath],
    constraint: &Constraint,
    features: &[FeatureSpec],
    options: &ClusterOptions,
) -> Result<ReductionOutcome> {
    if constraint.is_regression() {
        return Err(Error::MethodTaskMismatch {
            method: "2".into(),
            task: "regression".into(),
        });
    }
    if options.k == 0 {
        return Err(Error::InvalidConfig("cluster count must be at least 1".into()));
    }
    if options.k > paths.len() {
        return Err(Error::TooManyClusters {
            k: options.k,
            paths: paths.len(),
        });
    }
    let matrix = DissimilarityMatrix::from_paths(paths, features);
    let (_, labels, _) = pam(&matrix, options.k);
    let groups = clusters(&labels, options.k);
    let mut keep = vec![false; paths.len()];
    for (used, group) in groups.iter().enumerate() {
        for &i in group {
            keep[i] = true;
        }
        if constraint.accepts(&selected(paths, &keep)) {
            let trace = vec![format!("clustering(k={}): {} of {} clusters", options.k, used + 1, groups.len())];
            return Ok(ReductionOutcome::from_mask(paths, &keep, constraint, trace));
        }
    }
    Ok(ReductionOutcome::whole(
        paths,
        constraint,
        vec![format!("clustering(k={}): all clusters kept", options.k)],
    ))
}
