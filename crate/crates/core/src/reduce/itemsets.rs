//! Frequent itemset mining: Apriori and FP-growth.
//!
//! Both miners report every itemset of length at most `max_len` whose
//! transaction count reaches [`min_count`], keyed by the sorted item list.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::error::{Error, Result};

pub type Itemset = Vec<usize>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequentItemsets {
    pub n_transactions: usize,
    pub min_count: usize,
    /// Sorted itemset -> number of transactions containing it.
    pub sets: BTreeMap<Itemset, usize>,
}

impl FrequentItemsets {
    pub fn support(&self, set: &[usize]) -> Option<usize> {
        self.sets.get(set).copied()
    }
}

/// Smallest transaction count that reaches `min_support * n`.
pub fn min_count(min_support: f64, n: usize) -> usize {
    let c = (min_support * n as f64 - 1e-9).ceil();
    (c.max(1.0)) as usize
}

fn check(transactions: &[BTreeSet<usize>], min_support: f64, max_len: usize) -> Result<usize> {
    if transactions.is_empty() {
        return Err(Error::EmptyTransactions);
    }
    if !(min_support > 0.0 && min_support <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "min_support must lie in (0, 1], got {min_support}"
        )));
    }
    if max_len == 0 {
        return Err(Error::InvalidConfig("max_len must be at least 1".into()));
    }
    Ok(min_count(min_support, transactions.len()))
}

fn is_subset(small: &[usize], big: &[usize]) -> bool {
    let mut it = big.iter();
    small.iter().all(|s| it.any(|b| b == s))
}

/// Level-wise candidate generation with subset pruning.
pub fn apriori(transactions: &[BTreeSet<usize>], min_support: f64, max_len: usize) -> Result<FrequentItemsets> {
    let minc = check(transactions, min_support, max_len)?;
    let tx: Vec<Vec<usize>> = transactions.iter().map(|t| t.iter().copied().collect()).collect();
    let mut sets = BTreeMap::new();

    let mut singles: BTreeMap<usize, usize> = BTreeMap::new();
    for t in &tx {
        for &i in t {
            *singles.entry(i).or_default() += 1;
        }
    }
    let mut level: Vec<Itemset> = singles
        .into_iter()
        .filter(|(_, c)| *c >= minc)
        .map(|(i, c)| {
            sets.insert(vec![i], c);
            vec![i]
        })
        .collect();

    let mut k = 1;
    while !level.is_empty() && k < max_len {
        let frequent: BTreeSet<&Itemset> = level.iter().collect();
        let mut candidates = Vec::new();
        for (a_idx, a) in level.iter().enumerate() {
            for b in &level[a_idx + 1..] {
                if a[..k - 1] != b[..k - 1] {
                    break;
                }
                let mut c = a.clone();
                c.push(b[k - 1]);
                let all_frequent = (0..c.len()).all(|skip| {
                    let sub: Itemset = c
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| *i != skip)
                        .map(|(_, v)| *v)
                        .collect();
                    frequent.contains(&sub)
                });
                if all_frequent {
                    candidates.push(c);
                }
            }
        }
        let mut next = Vec::new();
        for c in candidates {
            let count = tx.iter().filter(|t| is_subset(&c, t)).count();
            if count >= minc {
                sets.insert(c.clone(), count);
                next.push(c);
            }
        }
        level = next;
        k += 1;
    }
    Ok(FrequentItemsets {
        n_transactions: transactions.len(),
        min_count: minc,
        sets,
    })
}

struct FpNode {
    item: usize,
    count: usize,
    parent: Option<usize>,
    children: Vec<usize>,
}

struct FpTree {
    nodes: Vec<FpNode>,
    /// Item -> nodes carrying it.
    header: BTreeMap<usize, Vec<usize>>,
    /// Frequent items from least to most frequent.
    order: Vec<usize>,
}

impl FpTree {
    fn build(weighted: &[(Vec<usize>, usize)], minc: usize) -> FpTree {
        let mut counts: HashMap<usize, usize> = HashMap::new();
        for (t, w) in weighted {
            for &i in t {
                *counts.entry(i).or_default() += w;
            }
        }
        let mut frequent: Vec<(usize, usize)> = counts.into_iter().filter(|(_, c)| *c >= minc).collect();
        // Most frequent first, ties by item id.
        frequent.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        let rank: HashMap<usize, usize> = frequent.iter().enumerate().map(|(r, (i, _))| (*i, r)).collect();
        let mut tree = FpTree {
            nodes: vec![FpNode {
                item: usize::MAX,
                count: 0,
                parent: None,
                children: Vec::new(),
            }],
            header: BTreeMap::new(),
            order: frequent.iter().rev().map(|(i, _)| *i).collect(),
        };
        for (t, w) in weighted {
            let mut items: Vec<usize> = t.iter().copied().filter(|i| rank.contains_key(i)).collect();
            items.sort_by_key(|i| rank[i]);
            let mut cur = 0;
            for item in items {
                let existing = tree.nodes[cur].children.iter().copied().find(|&c| tree.nodes[c].item == item);
                cur = match existing {
                    Some(c) => c,
                    None => {
                        let id = tree.nodes.len();
                        tree.nodes.push(FpNode {
                            item,
                            count: 0,
                            parent: Some(cur),
                            children: Vec::new(),
                        });
                        tree.nodes[cur].children.push(id);
                        tree.header.entry(item).or_default().push(id);
                        id
                    }
                };
                tree.nodes[cur].count += w;
            }
        }
        tree
    }
}

fn fp_mine(tree: &FpTree, suffix: &[usize], minc: usize, max_len: usize, out: &mut BTreeMap<Itemset, usize>) {
    for &item in &tree.order {
        let nodes = &tree.header[&item];
        let support: usize = nodes.iter().map(|&n| tree.nodes[n].count).sum();
        if support < minc {
            continue;
        }
        let mut set: Itemset = suffix.to_vec();
        set.push(item);
        set.sort_unstable();
        out.insert(set.clone(), support);
        if set.len() >= max_len {
            continue;
        }
        let mut base = Vec::new();
        for &n in nodes {
            let mut prefix = Vec::new();
            let mut p = tree.nodes[n].parent;
            while let Some(i) = p {
                if i == 0 {
                    break;
                }
                prefix.push(tree.nodes[i].item);
                p = tree.nodes[i].parent;
            }
            if !prefix.is_empty() {
                base.push((prefix, tree.nodes[n].count));
            }
        }
        if base.is_empty() {
            continue;
        }
        let cond = FpTree::build(&base, minc);
        if !cond.order.is_empty() {
            fp_mine(&cond, &set, minc, max_len, out);
        }
    }
}

/// Pattern growth over a prefix tree, without candidate generation.
pub fn fpgrowth(transactions: &[BTreeSet<usize>], min_support: f64, max_len: usize) -> Result<FrequentItemsets> {
    let minc = check(transactions, min_support, max_len)?;
    let weighted: Vec<(Vec<usize>, usize)> = transactions.iter().map(|t| (t.iter().copied().collect(), 1)).collect();
    let tree = FpTree::build(&weighted, minc);
    let mut sets = BTreeMap::new();
    fp_mine(&tree, &[], minc, max_len, &mut sets);
    Ok(FrequentItemsets {
        n_transactions: transactions.len(),
        min_count: minc,
        sets,
    })
}

/// Rule `antecedent => consequent` drawn from one frequent itemset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssociationRule {
    pub antecedent: Itemset,
    pub consequent: Itemset,
    /// Count of the whole itemset.
    pub support: usize,
    /// Count of the antecedent alone.
    pub antecedent_support: usize,
}

impl AssociationRule {
    pub fn confidence(&self) -> f64 {
        self.support as f64 / self.antecedent_support as f64
    }
}

/// All rules from itemsets of length >= 2, ordered by ascending confidence,
/// then descending support, shorter antecedent, and lexicographic item ids.
pub fn association_rules(freq: &FrequentItemsets) -> Vec<AssociationRule> {
    let mut rules = Vec::new();
    for (set, &support) in &freq.sets {
        if set.len() < 2 {
            continue;
        }
        let n = set.len();
        for mask in 1..(1u64 << n) - 1 {
            let (mut ante, mut cons) = (Vec::new(), Vec::new());
            for (i, &item) in set.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    ante.push(item);
                } else {
                    cons.push(item);
                }
            }
            let antecedent_support = freq.sets[&ante];
            rules.push(AssociationRule {
                antecedent: ante,
                consequent: cons,
                support,
                antecedent_support,
            });
        }
    }
    rules.sort_by(|a, b| {
        // a.support / a.ante  vs  b.support / b.ante, compared exactly.
        (a.support * b.antecedent_support)
            .cmp(&(b.support * a.antecedent_support))
            .then(b.support.cmp(&a.support))
            .then(a.antecedent.len().cmp(&b.antecedent.len()))
            .then(a.antecedent.cmp(&b.antecedent))
            .then(a.consequent.cmp(&b.consequent))
    });
    rules
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tx(sets: &[&[usize]]) -> Vec<BTreeSet<usize>> {
        sets.iter().map(|s| s.iter().copied().collect()).collect()
    }

    /// Enumerates every subset of the item universe.
    fn brute_force(transactions: &[BTreeSet<usize>], min_support: f64, max_len: usize) -> BTreeMap<Itemset, usize> {
        let items: Vec<usize> = transactions.iter().flatten().copied().collect::<BTreeSet<_>>().into_iter().collect();
        let minc = min_count(min_support, transactions.len());
        let mut out = BTreeMap::new();
        for mask in 1u64..(1 << items.len()) {
            let set: Itemset = (0..items.len()).filter(|i| mask & (1 << i) != 0).map(|i| items[i]).collect();
            if set.len() > max_len {
                continue;
            }
            let count = transactions.iter().filter(|t| set.iter().all(|i| t.contains(i))).count();
            if count >= minc {
                out.insert(set, count);
            }
        }
        out
    }

    #[test]
    fn textbook_example() {
        let t = tx(&[&[1, 2, 5], &[2, 4], &[2, 3], &[1, 2, 4], &[1, 3], &[2, 3], &[1, 3], &[1, 2, 3, 5], &[1, 2, 3]]);
        let a = apriori(&t, 2.0 / 9.0, 4).unwrap();
        let f = fpgrowth(&t, 2.0 / 9.0, 4).unwrap();
        assert_eq!(a, f);
        assert_eq!(a.support(&[1, 2, 3]), Some(2));
        assert_eq!(a.support(&[1, 2, 5]), Some(2));
        assert_eq!(a.support(&[2, 4]), Some(2));
        assert_eq!(a.support(&[3, 5]), None);
        assert_eq!(a.sets.len(), 13);
    }

    #[test]
    fn min_count_rounds_up() {
        assert_eq!(min_count(0.1, 100), 10);
        assert_eq!(min_count(0.1, 95), 10);
        assert_eq!(min_count(0.3, 10), 3);
        assert_eq!(min_count(0.01, 5), 1);
    }

    #[test]
    fn rule_order_is_total() {
        let t = tx(&[&[0, 1], &[0, 1], &[0], &[0, 2], &[1, 2]]);
        let f = apriori(&t, 0.2, 3).unwrap();
        let rules = association_rules(&f);
        // Confidences: 0=>2 1/4, 1=>2 1/3, 0=>1 2/4, 2=>0 1/2, 2=>1 1/2, 1=>0 2/3.
        let order: Vec<(Itemset, Itemset)> = rules.iter().map(|r| (r.antecedent.clone(), r.consequent.clone())).collect();
        let expected: Vec<(Itemset, Itemset)> = [(0, 2), (1, 2), (0, 1), (2, 0), (2, 1), (1, 0)]
            .iter()
            .map(|&(a, c)| (vec![a], vec![c]))
            .collect();
        assert_eq!(order, expected);
        assert!(rules.windows(2).all(|w| w[0].confidence() <= w[1].confidence()));
    }

    #[test]
    fn errors() {
        assert!(matches!(apriori(&[], 0.1, 4), Err(Error::EmptyTransactions)));
        assert!(fpgrowth(&tx(&[&[1]]), 0.0, 4).is_err());
    }

    proptest! {
        #[test]
        fn miners_match_brute_force(
            t in prop::collection::vec(prop::collection::btree_set(0usize..8, 0..6), 1..40),
            s in prop::sample::select(vec![0.05, 0.1, 0.3, 0.5]),
            max_len in 1usize..5,
        ) {
            let a = apriori(&t, s, max_len).unwrap();
            let f = fpgrowth(&t, s, max_len).unwrap();
            let b = brute_force(&t, s, max_len);
            prop_assert_eq!(&a.sets, &b);
            prop_assert_eq!(&f.sets, &b);
        }
    }
}
