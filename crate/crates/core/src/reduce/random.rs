//! Reduction through random selection.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{repair, selected, ReductionOutcome};
use crate::model::DecisionPath;
use crate::quorum::Constraint;

/// Classification: samples exactly the required number of paths per
/// mandatory class plus `free_pick` paths from the other classes, then tops
/// up if the soft-vote check fails. Regression: drops random paths while the
/// error bound stays within budget; the path whose removal breaks the budget
/// is put back.
pub fn reduce_random(paths: &[DecisionPath], constraint: &Constraint, seed: u64) -> ReductionOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let label = format!("random(seed={seed})");
    match constraint {
        Constraint::Classification { requirement, .. } => {
            let mut keep = vec![false; paths.len()];
            let mut free = Vec::new();
            for (class, &need) in requirement.mandatory.iter().enumerate() {
                let members: Vec<usize> = (0..paths.len()).filter(|&i| paths[i].class_vote() == Some(class)).collect();
                if need == 0 {
                    free.extend(members);
                    continue;
                }
                pick(&mut rng, &members, need, &mut keep);
            }
            free.sort_unstable();
            pick(&mut rng, &free, requirement.free_pick, &mut keep);
            let added = repair(paths, &mut keep, constraint);
            let mut trace = vec![label];
            if added > 0 {
                trace.push(format!("repair(+{added})"));
            }
            ReductionOutcome::from_mask(paths, &keep, constraint, trace)
        }
        Constraint::Regression { .. } => {
            let mut keep = vec![true; paths.len()];
            let mut remaining: Vec<usize> = (0..paths.len()).collect();
            while remaining.len() > 1 {
                let j = rng.gen_range(0..remaining.len());
                let removed = remaining.remove(j);
                keep[removed] = false;
                if !constraint.accepts(&selected(paths, &keep)) {
                    keep[removed] = true;
                    break;
                }
            }
            ReductionOutcome::from_mask(paths, &keep, constraint, vec![label])
        }
    }
}

fn pick(rng: &mut ChaCha8Rng, from: &[usize], count: usize, keep: &mut [bool]) {
    if count >= from.len() {
        for &i in from {
            keep[i] = true;
        }
        return;
    }
    for i in sample(rng, from.len(), count) {
        keep[from[i]] = true;
    }
}
