//! Seeded random and exhaustive formula generation for oracle tests.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::formula::{Atom, Formula, Literal};
use crate::multiformula::Multiformula;
use crate::sequent::Label;

/// Both polarities of each atom.
pub fn literal_leaves(atoms: &[&str]) -> Vec<Formula> {
    atoms
        .iter()
        .flat_map(|a| {
            let atom = Atom::new(a).expect("valid atom");
            [
                Formula::Lit(Literal::pos(atom.clone())),
                Formula::Lit(Literal::neg(atom)),
            ]
        })
        .collect()
}

/// A random formula with at most `max_connectives` connectives. The count is
/// drawn uniformly, then split at random between subtrees. Constants appear
/// as leaves with small probability.
pub fn random_formula(rng: &mut impl Rng, leaves: &[Formula], max_connectives: usize) -> Formula {
    let k = rng.gen_range(0..=max_connectives);
    formula_with(rng, leaves, k)
}

/// A random formula with exactly `k` connectives.
pub fn formula_with(rng: &mut impl Rng, leaves: &[Formula], k: usize) -> Formula {
    if k == 0 {
        return if rng.gen_bool(0.06) {
            if rng.gen_bool(0.5) {
                Formula::Top
            } else {
                Formula::Bottom
            }
        } else {
            leaves.choose(rng).expect("nonempty leaves").clone()
        };
    }
    match rng.gen_range(0..4) {
        0 => Formula::boxed(formula_with(rng, leaves, k - 1)),
        1 => Formula::dia(formula_with(rng, leaves, k - 1)),
        op => {
            let left = rng.gen_range(0..k);
            let a = formula_with(rng, leaves, left);
            let b = formula_with(rng, leaves, k - 1 - left);
            if op == 2 {
                Formula::and(a, b)
            } else {
                Formula::or(a, b)
            }
        }
    }
}

/// A random formula whose syntax tree has height at most `height`.
pub fn formula_of_height(rng: &mut impl Rng, leaves: &[Formula], height: usize) -> Formula {
    if height == 0 || rng.gen_bool(0.3) {
        return formula_with(rng, leaves, 0);
    }
    match rng.gen_range(0..4) {
        0 => Formula::boxed(formula_of_height(rng, leaves, height - 1)),
        1 => Formula::dia(formula_of_height(rng, leaves, height - 1)),
        2 => Formula::and(
            formula_of_height(rng, leaves, height - 1),
            formula_of_height(rng, leaves, height - 1),
        ),
        _ => Formula::or(
            formula_of_height(rng, leaves, height - 1),
            formula_of_height(rng, leaves, height - 1),
        ),
    }
}

/// Every formula with at most `max_connectives` connectives over `leaves`,
/// `T` and `F`, listing only one operand order of each `&`/`|`.
/// Grouped by connective count.
pub fn enumerate_formulas(leaves: &[Formula], max_connectives: usize) -> Vec<Vec<Formula>> {
    let mut base: Vec<Formula> = leaves.to_vec();
    for c in [Formula::Top, Formula::Bottom] {
        if !base.contains(&c) {
            base.push(c);
        }
    }
    let mut by_size: Vec<Vec<Formula>> = vec![base];
    for k in 1..=max_connectives {
        let mut level = Vec::new();
        for a in &by_size[k - 1] {
            level.push(Formula::boxed(a.clone()));
            level.push(Formula::dia(a.clone()));
        }
        for i in 0..k {
            let j = k - 1 - i;
            if i > j {
                break;
            }
            for (x, a) in by_size[i].iter().enumerate() {
                let start = if i == j { x } else { 0 };
                for b in &by_size[j][start..] {
                    level.push(Formula::and(a.clone(), b.clone()));
                    level.push(Formula::or(a.clone(), b.clone()));
                }
            }
        }
        by_size.push(level);
    }
    by_size
}

/// Random multiformula over `labels` whose cells have height at most
/// `height` and whose connective tree has at most `max_ops` nodes.
pub fn random_multiformula(
    rng: &mut impl Rng,
    labels: &[Label],
    leaves: &[Formula],
    height: usize,
    max_ops: usize,
) -> Multiformula {
    let ops = rng.gen_range(0..=max_ops);
    multi_with(rng, labels, leaves, height, ops)
}

fn multi_with(
    rng: &mut impl Rng,
    labels: &[Label],
    leaves: &[Formula],
    height: usize,
    ops: usize,
) -> Multiformula {
    if ops == 0 {
        let l = *labels.choose(rng).expect("nonempty labels");
        return Multiformula::Labeled(l, formula_of_height(rng, leaves, height));
    }
    let left = rng.gen_range(0..ops);
    let a = multi_with(rng, labels, leaves, height, left);
    let b = multi_with(rng, labels, leaves, height, ops - 1 - left);
    if rng.gen_bool(0.5) {
        Multiformula::All(vec![a, b])
    } else {
        Multiformula::Any(vec![a, b])
    }
}

/// Removes structural duplicates, keeping first occurrences.
pub fn dedup(formulas: Vec<Formula>) -> Vec<Formula> {
    let mut seen = HashSet::new();
    formulas.into_iter().filter(|f| seen.insert(f.clone())).collect()
}
