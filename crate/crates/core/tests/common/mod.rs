#![allow(dead_code)]

use conclusive_forest::model::{FeatureSpec, ForestModel, LeafValue, Node, Task, Tree};
use rand::Rng;

/// Thresholds on a 0.05 lattice inside (0, 1).
pub fn lattice_threshold<R: Rng>(rng: &mut R) -> f64 {
    rng.gen_range(1..20) as f64 * 0.05
}

pub fn random_distribution<R: Rng>(rng: &mut R, n: usize) -> LeafValue {
    if rng.gen_bool(0.5) {
        let mut d = vec![0.0; n];
        d[rng.gen_range(0..n)] = 1.0;
        return LeafValue::Distribution(d);
    }
    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(1..8) as f64).collect();
    let s: f64 = w.iter().sum();
    LeafValue::Distribution(w.into_iter().map(|v| v / s).collect())
}

fn grow<R: Rng>(
    rng: &mut R,
    nodes: &mut Vec<Node>,
    depth: usize,
    max_depth: usize,
    n_features: usize,
    leaf: &mut dyn FnMut(&mut R) -> LeafValue,
) -> usize {
    let idx = nodes.len();
    if depth == max_depth || (depth > 0 && rng.gen_bool(0.3)) {
        nodes.push(Node::Leaf(leaf(rng)));
        return idx;
    }
    nodes.push(Node::Leaf(LeafValue::Scalar(0.0)));
    let feature = rng.gen_range(0..n_features);
    let threshold = lattice_threshold(rng);
    let left = grow(rng, nodes, depth + 1, max_depth, n_features, leaf);
    let right = grow(rng, nodes, depth + 1, max_depth, n_features, leaf);
    nodes[idx] = Node::Split { feature, threshold, left, right };
    idx
}

pub fn random_tree<R: Rng>(
    rng: &mut R,
    n_features: usize,
    max_depth: usize,
    leaf: &mut dyn FnMut(&mut R) -> LeafValue,
) -> Tree {
    let mut nodes = Vec::new();
    grow(rng, &mut nodes, 0, max_depth, n_features, leaf);
    Tree::new(nodes).expect("generated tree is valid")
}

pub fn unit_features(n: usize) -> Vec<FeatureSpec> {
    (0..n).map(|i| FeatureSpec::numeric(i, format!("x{i}"), 0.0, 1.0)).collect()
}

/// Forest over `[0, 1]^n_features` with lattice thresholds.
pub fn random_forest<R: Rng>(rng: &mut R, task: Task, n_features: usize, n_trees: usize, max_depth: usize) -> ForestModel {
    let n_classes = match task {
        Task::Binary => 2,
        Task::Multiclass => 3,
        Task::Regression => 0,
    };
    let mut leaf = |r: &mut R| {
        if task == Task::Regression {
            LeafValue::Scalar(r.gen_range(-20..=20) as f64 * 0.25)
        } else {
            random_distribution(r, n_classes)
        }
    };
    let trees = (0..n_trees).map(|_| random_tree(rng, n_features, max_depth, &mut leaf)).collect();
    let classes = (0..n_classes).map(|c| format!("c{c}")).collect();
    ForestModel::new(task, classes, unit_features(n_features), trees).expect("generated forest is valid")
}

/// A point either on the threshold lattice or halfway between two lattice points.
pub fn lattice_point<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let k = rng.gen_range(0..20) as f64;
            if rng.gen_bool(0.3) {
                k * 0.05
            } else {
                k * 0.05 + 0.025
            }
        })
        .collect()
}

pub fn stump(feature: usize, threshold: f64, left: LeafValue, right: LeafValue) -> Tree {
    Tree::new(vec![
        Node::Split { feature, threshold, left: 1, right: 2 },
        Node::Leaf(left),
        Node::Leaf(right),
    ])
    .expect("stump is valid")
}
