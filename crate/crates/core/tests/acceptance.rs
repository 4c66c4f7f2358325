//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

mod common;

use std::collections::BTreeSet;
use std::fmt::Display;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use conclusive_forest::audit::{audit, Verdict};
use conclusive_forest::eval::{coverage, evaluate_instance, path_reduction, precision, rule_length, PrecisionMode};
use conclusive_forest::explain::{
    explain, BoundOrigin, CategoricalEquality, Consequent, ExplanationRule, FeatureRange, RuleCondition,
};
use conclusive_forest::model::{FeatureSpec, ForestModel, LeafValue, Prediction, Task};
use conclusive_forest::quorum::{
    default_allowed_error, local_error, requirement_binary, requirement_multiclass, ErrorBudget, Rationale,
    RetentionRequirement, VoteTally,
};
use conclusive_forest::reduce::itemsets::{apriori, fpgrowth};
use conclusive_forest::reduce::pipeline::run_stages;
use conclusive_forest::reduce::{Method, Prepared, ReductionOptions};
use conclusive_forest::synth::{banknote_like, glass_like, wine_like, BANKNOTE_ROWS, GLASS_ROWS, WINE_ROWS};
use conclusive_forest::trainer::{train_dataset, TrainConfig};
use conclusive_forest::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn s<E: Display>(e: E) -> String {
    e.to_string()
}

/// Instances explained per forest.
const INSTANCES_PER_FOREST: usize = 50;
/// Points per feature in the dense audit oracle.
const GRID_POINTS: usize = 10_000;
/// Round-off allowance when comparing an enumerated mean shift with the
/// closed-form bound; both are sums of the same f64 differences.
const SHIFT_ROUNDOFF: f64 = 1e-12;

fn main() -> ExitCode {
    let criteria: [(u32, &str, fn() -> Check); 9] = [
        (1, "pipeline rules pass the audit", criterion_1),
        (2, "retained votes cannot be overtaken", criterion_2),
        (3, "regression error bound holds", criterion_3),
        (4, "random selection keeps exactly the quorum", criterion_4),
        (5, "reduction grows with the error budget", criterion_5),
        (6, "metrics match hand-computed fixtures", criterion_6),
        (7, "apriori and fp-growth agree", criterion_7),
        (8, "audit agrees with a dense grid", criterion_8),
        (9, "banknote rule omits a feature and stays conclusive", criterion_9),
    ];
    let mut failed = 0;
    for (n, name, check) in criteria {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|m| m.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS criterion {n} ({name}): {detail} [{secs:.1}s]"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {n} ({name}): {why} [{secs:.1}s]");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn zeros(model: &ForestModel) -> Vec<f64> {
    vec![0.0; model.n_features()]
}

fn criterion_1() -> Check {
    let cases = [
        ("banknote", Task::Binary, banknote_like(BANKNOTE_ROWS, 101)),
        ("glass", Task::Multiclass, glass_like(GLASS_ROWS, 102)),
        ("wine", Task::Regression, wine_like(WINE_ROWS, 103)),
    ];
    let mut audited = 0;
    let mut skipped_ties = 0;
    let mut failures = Vec::new();
    for (name, task, data) in &cases {
        for seed in [1u64, 2, 3] {
            let (train, held) = data.split(0.2, seed);
            let config = TrainConfig {
                n_estimators: 50,
                max_depth: Some(8),
                seed,
                ..TrainConfig::default()
            };
            let model = train_dataset(&train, *task, &config).map_err(s)?;
            let held_rows = held.project(model.features()).map_err(s)?;
            let budget = if *task == Task::Regression {
                Some(default_allowed_error(&model, &held_rows, &held.numeric_targets().map_err(s)?).map_err(s)?)
            } else {
                None
            };
            let rows: Vec<Vec<f64>> = held_rows
                .into_iter()
                .chain(train.project(model.features()).map_err(s)?)
                .collect();
            let methods = Method::all_for(*task);
            let options = ReductionOptions {
                seed,
                ..ReductionOptions::default()
            };
            let mut explained = 0;
            for x in &rows {
                if explained == INSTANCES_PER_FOREST {
                    break;
                }
                let method = &methods[explained % methods.len()];
                let e = match explain(&model, x, &zeros(&model), method, &options, budget) {
                    Ok(e) => e,
                    Err(Error::Tie { .. }) => {
                        skipped_ties += 1;
                        continue;
                    }
                    Err(e) => return Err(format!("{name} seed {seed}: {e}")),
                };
                explained += 1;
                let report = audit(&model, x, &e.rule).map_err(s)?;
                audited += 1;
                if report.verdict != Verdict::Conclusive {
                    failures.push(format!("{name} seed {seed} method {method}: {:?}", report.violations.first()));
                }
            }
            if explained < INSTANCES_PER_FOREST {
                return Err(format!("{name} seed {seed}: only {explained} instances explained"));
            }
        }
    }
    if failures.is_empty() {
        Ok(format!("{audited}/{audited} rules conclusive ({skipped_ties} tied rows skipped)"))
    } else {
        Err(format!("{} of {audited} rules violated, first: {}", failures.len(), failures[0]))
    }
}

/// Calls `f` on every vector of `parts` non-negative integers summing to `total`.
fn compositions(total: usize, parts: usize, f: &mut dyn FnMut(&[usize])) {
    fn rec(left: usize, parts: usize, acc: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if acc.len() + 1 == parts {
            acc.push(left);
            f(acc);
            acc.pop();
            return;
        }
        for v in 0..=left {
            acc.push(v);
            rec(left - v, parts, acc, f);
            acc.pop();
        }
    }
    rec(total, parts, &mut Vec::with_capacity(parts), f);
}

/// Whether class `m` strictly beats every other class once `discarded`
/// votes are handed out adversarially on top of the retained votes `r`.
fn survives_concentrated(m: usize, r: &[usize], discarded: usize) -> bool {
    (0..r.len()).all(|j| j == m || r[m] > r[j] + discarded)
}

/// Retained-vote vectors allowed by `req`: each class between its mandatory
/// count and its tally, at least `minimum_paths` in total.
fn retained_vectors(req: &RetentionRequirement, counts: &[usize], f: &mut dyn FnMut(&[usize])) {
    fn rec(i: usize, req: &RetentionRequirement, counts: &[usize], acc: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if i == counts.len() {
            if acc.iter().sum::<usize>() >= req.minimum_paths {
                f(acc);
            }
            return;
        }
        for v in req.mandatory[i]..=counts[i] {
            acc.push(v);
            rec(i + 1, req, counts, acc, f);
            acc.pop();
        }
    }
    rec(0, req, counts, &mut Vec::new(), f);
}

fn criterion_2() -> Check {
    let mut tallies = 0u64;
    let mut brute = 0u64;
    let mut failure: Option<String> = None;
    for classes in 2..=5usize {
        for total in 1..=60usize {
            compositions(total, classes, &mut |counts| {
                if failure.is_some() {
                    return;
                }
                let Ok(tally) = VoteTally::from_counts(counts.to_vec()) else {
                    return;
                };
                let mut reqs = vec![requirement_multiclass(&tally)];
                if classes == 2 {
                    reqs.push(requirement_binary(&tally));
                }
                for req in reqs {
                    let req = match req {
                        Ok(r) => r,
                        Err(e) => {
                            failure = Some(format!("{counts:?}: {e}"));
                            return;
                        }
                    };
                    tallies += 1;
                    let m = tally.majority;
                    if req.class != m || req.mandatory.iter().sum::<usize>() + req.free_pick != req.minimum_paths {
                        failure = Some(format!("{counts:?}: inconsistent requirement {req:?}"));
                        return;
                    }
                    let spare: usize = (0..classes).filter(|&c| req.mandatory[c] == 0).map(|c| counts[c]).sum();
                    if spare < req.free_pick || req.minimum_paths > total {
                        failure = Some(format!("{counts:?}: requirement cannot be met {req:?}"));
                        return;
                    }
                    // Free picks are placed on the rival they help most.
                    let discarded = total - req.minimum_paths;
                    for j in (0..classes).filter(|&j| j != m) {
                        let mut r = req.mandatory.clone();
                        if req.mandatory[j] == 0 {
                            r[j] += req.free_pick.min(counts[j]);
                        }
                        if !survives_concentrated(m, &r, discarded) {
                            failure = Some(format!("{counts:?}: class {j} overtakes {m} with retained {r:?}"));
                            return;
                        }
                    }
                    if req.rationale == Rationale::Quorum && 2 * req.minimum_paths <= total {
                        failure = Some(format!("{counts:?}: quorum below half"));
                        return;
                    }
                    // Small forests: every admissible retained set and every
                    // redistribution of the discarded votes.
                    if total <= 8 && classes <= 4 {
                        retained_vectors(&req, counts, &mut |r| {
                            let discarded = total - r.iter().sum::<usize>();
                            compositions(discarded, classes, &mut |extra| {
                                brute += 1;
                                let votes: Vec<usize> = r.iter().zip(extra).map(|(a, b)| a + b).collect();
                                if (0..classes).any(|j| j != m && votes[j] >= votes[m]) && failure.is_none() {
                                    failure = Some(format!("{counts:?}: final votes {votes:?} unseat class {m}"));
                                }
                            });
                        });
                    }
                }
            });
        }
    }
    match failure {
        None => Ok(format!("{tallies} requirements, {brute} brute-force reassignments, no counterexample")),
        Some(f) => Err(f),
    }
}

fn criterion_3() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut combos = 0u64;
    let mut tight = 0;
    for triple in 0..1000 {
        let n_trees = rng.gen_range(1..=20);
        let model = common::random_forest(&mut rng, Task::Regression, 2, n_trees, 2);
        let x = common::lattice_point(&mut rng, 2);
        let excluded_count = rng.gen_range(0..=n_trees.min(7));
        let mut order: Vec<usize> = (0..n_trees).collect();
        for i in 0..excluded_count {
            let j = rng.gen_range(i..n_trees);
            order.swap(i, j);
        }
        let excluded: Vec<usize> = order[..excluded_count].to_vec();
        let retained: Vec<usize> = order[excluded_count..].to_vec();
        let bound = local_error(&model, &x, &retained).map_err(s)?;
        let preds = model.tree_predictions(&x).map_err(s)?;
        let leaves: Vec<Vec<f64>> = excluded
            .iter()
            .map(|&t| model.trees()[t].leaves().filter_map(|l| l.scalar()).collect())
            .collect();
        // Mixed-radix walk over every leaf choice of the excluded trees.
        let mut digits = vec![0usize; excluded.len()];
        let mut worst: f64 = 0.0;
        loop {
            combos += 1;
            let shift: f64 = excluded
                .iter()
                .zip(&digits)
                .enumerate()
                .map(|(i, (&t, &d))| leaves[i][d] - preds[t])
                .sum::<f64>()
                / n_trees as f64;
            worst = worst.max(shift.abs());
            let mut i = 0;
            while i < digits.len() {
                digits[i] += 1;
                if digits[i] < leaves[i].len() {
                    break;
                }
                digits[i] = 0;
                i += 1;
            }
            if i == digits.len() {
                break;
            }
        }
        if worst > bound + SHIFT_ROUNDOFF * bound.max(1.0) {
            return Err(format!("triple {triple}: shift {worst} exceeds local_error {bound}"));
        }
        if (worst - bound).abs() <= SHIFT_ROUNDOFF * bound.max(1.0) {
            tight += 1;
        }
    }
    Ok(format!("1000 triples, {combos} leaf assignments, bound attained in {tight}"))
}

fn criterion_4() -> Check {
    let data = banknote_like(BANKNOTE_ROWS, 104);
    let config = TrainConfig {
        n_estimators: 100,
        max_depth: None,
        seed: 4,
        ..TrainConfig::default()
    };
    let model = train_dataset(&data, Task::Binary, &config).map_err(s)?;
    let rows = data.project(model.features()).map_err(s)?;
    let random: Method = "3".parse().map_err(s)?;
    let combined: Method = "12".parse().map_err(s)?;
    let mut fixtures = 0;
    let (mut fr_random, mut fr_combined, mut runs) = (0.0, 0.0, 0);
    let mut pr_seen = BTreeSet::new();
    for x in &rows {
        if fixtures == 5 {
            break;
        }
        let prepared = Prepared::new(&model, x, None).map_err(s)?;
        let tally = prepared.tally.as_ref().ok_or("classification tally missing")?;
        let cm = tally.counts[tally.majority];
        if cm < 99 {
            continue;
        }
        fixtures += 1;
        for seed in 0..10u64 {
            let options = ReductionOptions {
                seed,
                ..ReductionOptions::default()
            };
            let baseline = run_stages(&model, &prepared, &Method::NoReduction, &options).map_err(s)?;
            let reduced = run_stages(&model, &prepared, &random, &options).map_err(s)?;
            if baseline.retained_paths.len() != cm {
                return Err(format!("baseline keeps {} paths, majority has {cm}", baseline.retained_paths.len()));
            }
            if reduced.retained_paths.len() != 51 {
                return Err(format!("method 3 kept {} paths (seed {seed})", reduced.retained_paths.len()));
            }
            let pr = path_reduction(reduced.retained_paths.len(), baseline.retained_paths.len());
            if pr != 1.0 - 51.0 / cm as f64 {
                return Err(format!("PR {pr} differs from 1 - 51/{cm}"));
            }
            pr_seen.insert(format!("{pr:.4}"));
            let zero = zeros(&model);
            let fr = |m: &Method| -> Result<f64, String> {
                let base = explain(&model, x, &zero, &Method::NoReduction, &options, None).map_err(s)?;
                let red = explain(&model, x, &zero, m, &options, None).map_err(s)?;
                Ok(conclusive_forest::eval::feature_reduction(&red.rule, &base.rule))
            };
            fr_random += fr(&random)?;
            fr_combined += fr(&combined)?;
            runs += 1;
        }
    }
    if fixtures == 0 {
        return Err("no instance with at least 99 majority paths".into());
    }
    let (a, b) = (fr_combined / runs as f64, fr_random / runs as f64);
    if a < b {
        return Err(format!("mean FR with 12 ({a:.4}) below FR with 3 ({b:.4})"));
    }
    Ok(format!(
        "{fixtures} instances x 10 seeds kept exactly 51 paths, PR in {{{}}}; mean FR 12 = {a:.4} >= 3 = {b:.4}",
        pr_seen.into_iter().collect::<Vec<_>>().join(", ")
    ))
}

fn criterion_5() -> Check {
    let data = wine_like(2000, 105);
    let (train, held) = data.split(0.2, 5);
    let config = TrainConfig {
        n_estimators: 40,
        max_depth: Some(6),
        seed: 5,
        ..TrainConfig::default()
    };
    let model = train_dataset(&train, Task::Regression, &config).map_err(s)?;
    let rows = held.project(model.features()).map_err(s)?;
    let mae = default_allowed_error(&model, &rows, &held.numeric_targets().map_err(s)?)
        .map_err(s)?
        .allowed_error;
    let grid = [0.1, 0.2, 0.5, 1.0];
    let mut checks = 0;
    let mut rising = 0;
    for code in ["1", "3"] {
        let method: Method = code.parse().map_err(s)?;
        for seed in [1u64, 2, 3] {
            let options = ReductionOptions {
                seed,
                ..ReductionOptions::default()
            };
            for (i, x) in rows.iter().take(20).enumerate() {
                let mut last = (f64::NEG_INFINITY, f64::NEG_INFINITY);
                for scale in grid {
                    let budget = ErrorBudget::user(scale * mae).map_err(s)?;
                    let prepared = Prepared::new(&model, x, Some(budget)).map_err(s)?;
                    let m = evaluate_instance(&model, &prepared, x, &rows, &method, &options).map_err(s)?;
                    let now = (m.feature_reduction, m.path_reduction);
                    if now.0 < last.0 || now.1 < last.1 {
                        return Err(format!(
                            "method {code} seed {seed} row {i}: (FR, PR) fell from {last:?} to {now:?} at {scale} x MAE"
                        ));
                    }
                    if now.1 > last.1 && last.1 > f64::NEG_INFINITY {
                        rising += 1;
                    }
                    last = now;
                    checks += 1;
                }
            }
        }
    }
    Ok(format!("{checks} budget steps on methods 1 and 3, MAE {mae:.4}, PR rose {rising} times, no decrease"))
}

fn range(feature: usize, lower: f64, upper: f64, lower_inclusive: bool) -> RuleCondition {
    RuleCondition::Range(FeatureRange {
        feature,
        name: None,
        lower,
        upper,
        lower_inclusive,
        upper_inclusive: true,
        lower_origin: BoundOrigin::PathBound,
        upper_origin: BoundOrigin::PathBound,
    })
}

fn color(value: &str) -> RuleCondition {
    RuleCondition::Equality(CategoricalEquality {
        group: "color".into(),
        value: value.into(),
    })
}

fn class_rule(conditions: Vec<RuleCondition>, label: &str) -> ExplanationRule {
    ExplanationRule {
        id: None,
        conditions,
        alternatives: Default::default(),
        consequent: Consequent::Class {
            label: label.into(),
            index: None,
        },
        instance: None,
        trace: None,
    }
}

fn criterion_6() -> Check {
    let features = vec![
        FeatureSpec::numeric(0, "a", 0.0, 10.0),
        FeatureSpec::numeric(1, "b", 0.0, 10.0),
        FeatureSpec::one_hot(2, "color=red", "color", "red"),
        FeatureSpec::one_hot(3, "color=green", "color", "green"),
        FeatureSpec::one_hot(4, "color=blue", "color", "blue"),
    ];
    let dist = |p: f64| LeafValue::Distribution(vec![1.0 - p, p]);
    // Predicts "yes" exactly when a > 5.
    let classifier = ForestModel::new(
        Task::Binary,
        vec!["no".into(), "yes".into()],
        features.clone(),
        vec![common::stump(0, 5.0, dist(0.0), dist(1.0))],
    )
    .map_err(s)?;
    let regressor = ForestModel::new(
        Task::Regression,
        vec![],
        features,
        vec![common::stump(0, 5.0, LeafValue::Scalar(1.0), LeafValue::Scalar(3.0))],
    )
    .map_err(s)?;
    // Row i: a = i, b = 3i mod 10, color cycles red, green, blue.
    let rows: Vec<Vec<f64>> = (0..10)
        .map(|i| {
            let mut r = vec![i as f64, ((3 * i) % 10) as f64, 0.0, 0.0, 0.0];
            r[2 + i % 3] = 1.0;
            r
        })
        .collect();
    let fixtures: Vec<(&str, &ForestModel, ExplanationRule, usize, f64, Option<f64>)> = vec![
        ("empty rule", &classifier, class_rule(vec![], "yes"), 0, 1.0, Some(0.4)),
        ("a above split", &classifier, class_rule(vec![range(0, 5.0, 10.0, false)], "yes"), 1, 0.4, Some(1.0)),
        ("open lower end", &classifier, class_rule(vec![range(0, 2.0, 7.0, false)], "yes"), 1, 0.5, Some(0.4)),
        ("closed lower end", &classifier, class_rule(vec![range(0, 2.0, 7.0, true)], "yes"), 1, 0.6, Some(2.0 / 6.0)),
        ("equality only", &classifier, class_rule(vec![color("red")], "no"), 1, 0.4, Some(0.5)),
        (
            "equality and range",
            &classifier,
            class_rule(vec![color("red"), range(0, 5.0, 10.0, false)], "yes"),
            2,
            0.2,
            Some(1.0),
        ),
        (
            "range on b and equality",
            &classifier,
            class_rule(vec![range(1, 0.0, 5.0, false), color("green")], "no"),
            2,
            0.3,
            Some(2.0 / 3.0),
        ),
        (
            "two ranges",
            &classifier,
            class_rule(vec![range(0, 3.0, 9.0, false), range(1, 1.0, 7.0, false)], "yes"),
            2,
            0.4,
            Some(0.5),
        ),
        ("one mismatch of four", &classifier, class_rule(vec![range(0, 5.0, 8.0, true)], "yes"), 1, 0.4, Some(0.75)),
        ("nothing covered", &classifier, class_rule(vec![range(0, 20.0, 30.0, false)], "yes"), 1, 0.0, None),
        (
            "regression mae",
            &regressor,
            ExplanationRule {
                consequent: Consequent::Value {
                    value: 3.0,
                    error: 0.0,
                    allowed_error: None,
                },
                ..class_rule(vec![range(0, 4.0, 7.0, false)], "")
            },
            1,
            0.3,
            Some(2.0 / 3.0),
        ),
    ];
    for (name, model, rule, len, cov, prec) in &fixtures {
        let got_len = rule_length(rule);
        let got_cov = coverage(rule, model, &rows).map_err(s)?;
        let got_prec = precision(rule, model, &rows, PrecisionMode::Fidelity);
        let prec_ok = match (prec, &got_prec) {
            (Some(p), Ok(g)) => p == g,
            (None, Err(Error::ZeroCoverage)) => true,
            _ => false,
        };
        if got_len != *len || got_cov != *cov || !prec_ok {
            return Err(format!(
                "{name}: got ({got_len}, {got_cov}, {got_prec:?}), expected ({len}, {cov}, {prec:?})"
            ));
        }
    }
    Ok(format!("{} fixtures exact", fixtures.len()))
}

fn criterion_7() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut families = 0;
    let mut largest = 0;
    for fixture in 0..100 {
        let items = rng.gen_range(1..=20);
        let n = rng.gen_range(1..=200);
        let density = rng.gen_range(0.05..0.35);
        let transactions: Vec<BTreeSet<usize>> = (0..n)
            .map(|_| (0..items).filter(|_| rng.gen_bool(density)).collect())
            .collect();
        for min_support in [0.05, 0.1, 0.3] {
            let a = apriori(&transactions, min_support, usize::MAX).map_err(s)?;
            let b = fpgrowth(&transactions, min_support, usize::MAX).map_err(s)?;
            if a.sets != b.sets || a.min_count != b.min_count {
                return Err(format!(
                    "fixture {fixture} at {min_support}: {} vs {} itemsets",
                    a.sets.len(),
                    b.sets.len()
                ));
            }
            largest = largest.max(a.sets.len());
            families += 1;
        }
    }
    Ok(format!("{families} families identical, largest has {largest} itemsets"))
}

/// Ranges a rule allows for every numeric feature (domain for omitted ones).
fn allowed(model: &ForestModel, x: &[f64], rule: &ExplanationRule, f: usize) -> FeatureRange {
    rule.range_for(f).cloned().unwrap_or(FeatureRange {
        feature: f,
        name: None,
        lower: model.features()[f].domain_min.min(x[f]),
        upper: model.features()[f].domain_max.max(x[f]),
        lower_inclusive: true,
        upper_inclusive: true,
        lower_origin: BoundOrigin::DomainBound,
        upper_origin: BoundOrigin::DomainBound,
    })
}

fn grid_holds(model: &ForestModel, rule: &ExplanationRule, p: &Prediction) -> bool {
    match (&rule.consequent, p) {
        (Consequent::Class { label, .. }, Prediction::Class { index, .. }) => &model.classes()[*index] == label,
        (Consequent::Value { value, error, allowed_error }, Prediction::Value(v)) => {
            (v - value).abs() <= allowed_error.unwrap_or(*error) + 1e-9 * value.abs().max(1.0)
        }
        _ => false,
    }
}

/// Dense one-feature-at-a-time sweep: true when no grid point changes the outcome.
fn grid_conclusive(model: &ForestModel, x: &[f64], rule: &ExplanationRule) -> bool {
    for f in 0..model.n_features() {
        let r = allowed(model, x, rule, f);
        let mut probe = x.to_vec();
        let step = (r.upper - r.lower) / (GRID_POINTS - 1) as f64;
        let points = (0..GRID_POINTS).map(|i| r.lower + step * i as f64).chain([r.upper]);
        for v in points.filter(|&v| r.contains(v)) {
            probe[f] = v;
            if !grid_holds(model, rule, &model.predict(&probe).expect("valid probe")) {
                return false;
            }
        }
    }
    true
}

fn random_rule<R: Rng>(rng: &mut R, model: &ForestModel, x: &[f64]) -> ExplanationRule {
    let mut conditions = Vec::new();
    for (f, &v) in x.iter().enumerate() {
        if rng.gen_bool(0.4) {
            continue;
        }
        let below: Vec<f64> = (0..=20).map(|k| k as f64 * 0.05).filter(|&b| b <= v).collect();
        let above: Vec<f64> = (0..=20).map(|k| k as f64 * 0.05).filter(|&b| b >= v).collect();
        let lower = below[rng.gen_range(0..below.len())];
        let upper = above[rng.gen_range(0..above.len())];
        conditions.push(range(f, lower, upper, lower == v || rng.gen_bool(0.5)));
    }
    let p = model.predict(x).expect("valid instance");
    let consequent = match p {
        Prediction::Class { .. } => Consequent::Class {
            label: model.describe(&p),
            index: None,
        },
        Prediction::Value(v) => Consequent::Value {
            value: v,
            error: rng.gen_range(0..8) as f64 * 0.25,
            allowed_error: None,
        },
    };
    ExplanationRule {
        id: None,
        conditions,
        alternatives: Default::default(),
        consequent,
        instance: None,
        trace: None,
    }
}

fn criterion_8() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let tasks = [Task::Binary, Task::Multiclass, Task::Regression];
    let (mut compared, mut conclusive, mut violated) = (0, 0, 0);
    for m in 0..60 {
        let task = tasks[m % 3];
        let n_features = rng.gen_range(1..=3);
        let n_trees = rng.gen_range(1..=5);
        let model = common::random_forest(&mut rng, task, n_features, n_trees, 3);
        for _ in 0..6 {
            let x = common::lattice_point(&mut rng, n_features);
            let rule = if rng.gen_bool(0.5) {
                let methods = Method::all_for(task);
                let method = &methods[rng.gen_range(0..methods.len())];
                let budget = (task == Task::Regression)
                    .then(|| ErrorBudget::user(rng.gen_range(0..8) as f64 * 0.25))
                    .transpose()
                    .map_err(s)?;
                let options = ReductionOptions {
                    seed: rng.gen(),
                    ..ReductionOptions::default()
                };
                match explain(&model, &x, &zeros(&model), method, &options, budget) {
                    Ok(e) => e.rule,
                    Err(Error::Tie { .. }) => continue,
                    Err(e) => return Err(format!("model {m}: {e}")),
                }
            } else {
                random_rule(&mut rng, &model, &x)
            };
            let verdict = audit(&model, &x, &rule).map_err(s)?.verdict;
            let oracle = grid_conclusive(&model, &x, &rule);
            if (verdict == Verdict::Conclusive) != oracle {
                return Err(format!("model {m}, x {x:?}: audit {verdict:?}, grid conclusive = {oracle}, rule {rule:?}"));
            }
            compared += 1;
            if oracle {
                conclusive += 1;
            } else {
                violated += 1;
            }
        }
    }
    Ok(format!("60 models, {compared} verdicts agree ({conclusive} conclusive, {violated} violated)"))
}

fn criterion_9() -> Check {
    let data = banknote_like(BANKNOTE_ROWS, 109);
    let config = TrainConfig {
        n_estimators: 50,
        max_depth: Some(4),
        seed: 9,
        ..TrainConfig::default()
    };
    let model = train_dataset(&data, Task::Binary, &config).map_err(s)?;
    let rows = data.project(model.features()).map_err(s)?;
    let all: BTreeSet<usize> = (0..model.n_features()).collect();
    for (i, x) in rows.iter().enumerate().take(300) {
        for method in Method::all_for(Task::Binary) {
            let e = match explain(&model, x, &zeros(&model), &method, &ReductionOptions::default(), None) {
                Ok(e) => e,
                Err(Error::Tie { .. }) => continue,
                Err(e) => return Err(s(e)),
            };
            let used: BTreeSet<usize> = e.rule.features(&model).into_iter().collect();
            if used.len() < all.len() && audit(&model, x, &e.rule).map_err(s)?.verdict == Verdict::Conclusive {
                let omitted: Vec<&str> = all.difference(&used).map(|&f| model.features()[f].name.as_str()).collect();
                return Ok(format!(
                    "row {i}, method {method}: {} conditions, omits {omitted:?}, omitted features probed without a change",
                    e.rule.len()
                ));
            }
        }
    }
    Err("no explained row omitted a feature".into())
}
