//! Semantic checks: bisimulations, world copying and the end-to-end
//! interpolant checker.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use thiserror::Error;

use crate::formula::{Atom, Formula, Literal};
use crate::generate::{enumerate_formulas, random_formula};
use crate::kripke::{sample_models, FrameClass, KripkeModel, ModelError};
use crate::prover::is_valid;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VerifyError {
    #[error("unknown world '{0}'")]
    UnknownWorld(String),
    #[error("world '{0}' is not in the cluster")]
    NotInCluster(String),
    #[error("cannot copy away from the root when the root lies in the cluster")]
    RootInCluster,
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum BisimMode {
    /// Agreement on every atom.
    Full,
    /// Agreement off the atom of `ℓ`; `ℓ` may only be lost from the first
    /// model to the second.
    Literal(Literal),
}

impl fmt::Display for BisimMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BisimMode::Full => f.write_str("full"),
            BisimMode::Literal(l) => write!(f, "literal({l})"),
        }
    }
}

/// Pairs `(w, w')` with `w` in the first model and `w'` in the second.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BisimWitness {
    pub pairs: BTreeSet<(String, String)>,
    pub mode: BisimMode,
}

impl BisimWitness {
    pub fn contains(&self, w: &str, w2: &str) -> bool {
        self.pairs.contains(&(w.to_string(), w2.to_string()))
    }

    /// The converse relation. A witness for `M' ≤_ℓ M` reversed is one for
    /// `M ≤_ℓ̄ M'`.
    pub fn reversed(&self) -> BisimWitness {
        BisimWitness {
            pairs: self.pairs.iter().map(|(a, b)| (b.clone(), a.clone())).collect(),
            mode: match &self.mode {
                BisimMode::Full => BisimMode::Full,
                BisimMode::Literal(l) => BisimMode::Literal(l.negate()),
            },
        }
    }
}

fn all_atoms(m: &KripkeModel, m2: &KripkeModel) -> BTreeSet<Atom> {
    m.atoms().chain(m2.atoms()).cloned().collect()
}

fn literals_ok(
    m: &KripkeModel,
    w: usize,
    m2: &KripkeModel,
    w2: usize,
    atoms: &BTreeSet<Atom>,
    mode: &BisimMode,
) -> bool {
    atoms.iter().all(|a| {
        let (x, y) = (m.holds(a, w), m2.holds(a, w2));
        match mode {
            BisimMode::Literal(l) if l.atom == *a => {
                // M', w' ⊨ ℓ implies M, w ⊨ ℓ
                let lit = |v: bool| v == l.positive;
                !lit(y) || lit(x)
            }
            _ => x == y,
        }
    })
}

/// Greatest relation inside `z` closed under forth and back.
fn refine(m: &KripkeModel, m2: &KripkeModel, z: &mut [Vec<bool>]) {
    loop {
        let mut changed = false;
        for w in 0..m.len() {
            for w2 in 0..m2.len() {
                if !z[w][w2] {
                    continue;
                }
                let forth = m.successors(w).all(|v| m2.successors(w2).any(|v2| z[v][v2]));
                let back = m2.successors(w2).all(|v2| m.successors(w).any(|v| z[v][v2]));
                if !(forth && back) {
                    z[w][w2] = false;
                    changed = true;
                }
            }
        }
        if !changed {
            return;
        }
    }
}

/// Whether `z` is a bisimulation of its mode between `m` and `m2`.
pub fn check_bisim(m: &KripkeModel, m2: &KripkeModel, z: &BisimWitness) -> Result<bool, VerifyError> {
    if z.pairs.is_empty() {
        return Ok(false);
    }
    let mut rel = vec![vec![false; m2.len()]; m.len()];
    for (a, b) in &z.pairs {
        let w = m.world_index(a).map_err(|_| VerifyError::UnknownWorld(a.clone()))?;
        let w2 = m2.world_index(b).map_err(|_| VerifyError::UnknownWorld(b.clone()))?;
        rel[w][w2] = true;
    }
    let atoms = all_atoms(m, m2);
    for w in 0..m.len() {
        for w2 in 0..m2.len() {
            if !rel[w][w2] {
                continue;
            }
            if !literals_ok(m, w, m2, w2, &atoms, &z.mode) {
                return Ok(false);
            }
            let forth = m.successors(w).all(|v| m2.successors(w2).any(|v2| rel[v][v2]));
            let back = m2.successors(w2).all(|v2| m.successors(w).any(|v| rel[v][v2]));
            if !(forth && back) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// The largest bisimulation of the given mode, if it relates `w` to `w2`.
pub fn find_bisim(
    m: &KripkeModel,
    w: &str,
    m2: &KripkeModel,
    w2: &str,
    mode: BisimMode,
) -> Option<BisimWitness> {
    let (wi, wi2) = (m.world_index(w).ok()?, m2.world_index(w2).ok()?);
    let atoms = all_atoms(m, m2);
    let mut z: Vec<Vec<bool>> = (0..m.len())
        .map(|a| {
            (0..m2.len())
                .map(|b| literals_ok(m, a, m2, b, &atoms, &mode))
                .collect()
        })
        .collect();
    refine(m, m2, &mut z);
    if !z[wi][wi2] {
        return None;
    }
    let pairs = (0..m.len())
        .flat_map(|a| (0..m2.len()).map(move |b| (a, b)))
        .filter(|&(a, b)| z[a][b])
        .map(|(a, b)| (m.world_name(a).to_string(), m2.world_name(b).to_string()))
        .collect();
    Some(BisimWitness { pairs, mode })
}

/// Adds a copy `w_c` of the cluster world `w`: related to the whole
/// cluster in both directions, to itself, and seen by the root iff `w` is
/// (never, when `away_from_root`). Returns the model and the copy's name.
pub fn copy_world(
    m: &KripkeModel,
    w: &str,
    away_from_root: bool,
) -> Result<(KripkeModel, String), VerifyError> {
    let wi = m.world_index(w).map_err(|_| VerifyError::UnknownWorld(w.to_string()))?;
    let cluster = m.cluster();
    if !cluster.contains(&wi) {
        return Err(VerifyError::NotInCluster(w.to_string()));
    }
    let root = m.root_index();
    if away_from_root && cluster.contains(&root) {
        return Err(VerifyError::RootInCluster);
    }
    let mut name = format!("{w}_c");
    while m.world_index(&name).is_ok() {
        name.push('\'');
    }
    let mut out = m.clone();
    let c = out.add_world(name.clone(), wi);
    for &v in &cluster {
        out.set_edge(c, v, true);
        out.set_edge(v, c, true);
    }
    out.set_edge(c, c, true);
    if m.related(root, wi) && !away_from_root {
        out.set_edge(root, c, true);
    }
    assert!(out.is_l_frame(FrameClass::K5), "copying must yield a K5-model");
    Ok((out, name))
}

/// Identity on the original worlds plus `(w, w_c)`.
pub fn copy_witness(m: &KripkeModel, w: &str, copy: &str) -> BisimWitness {
    let mut pairs: BTreeSet<(String, String)> =
        m.worlds().iter().map(|x| (x.clone(), x.clone())).collect();
    pairs.insert((w.to_string(), copy.to_string()));
    BisimWitness {
        pairs,
        mode: BisimMode::Full,
    }
}

/// Sampling configuration for [`check_ulip`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UlipConfig {
    /// Exhaustive `ψ` up to this many connectives.
    pub psi_connectives: usize,
    pub random_psi: usize,
    /// Connective bound for the random `ψ`.
    pub random_connectives: usize,
    /// Models used to discard `ψ` quickly.
    pub samples: usize,
    pub max_cluster: usize,
    pub seed: u64,
    /// Name of the atom added to the literals of `φ`.
    pub extra_atom: String,
}

impl Default for UlipConfig {
    fn default() -> Self {
        UlipConfig {
            psi_connectives: 3,
            random_psi: 200,
            random_connectives: 6,
            samples: 300,
            max_cluster: 3,
            seed: 0,
            extra_atom: "r".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UlipReport {
    /// `Lit(R) ⊆ Lit(φ) \ {ℓ}`.
    pub clause_i: bool,
    /// `R → φ` is valid.
    pub clause_ii: bool,
    pub checked: usize,
    /// Each `ψ` with `ψ → φ` valid but `ψ → R` not.
    pub failures: Vec<Formula>,
}

impl UlipReport {
    pub fn passed(&self) -> bool {
        self.clause_i && self.clause_ii && self.failures.is_empty()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "clause_i": self.clause_i,
            "clause_ii": self.clause_ii,
            "clause_iii": {
                "checked": self.checked,
                "failures": self.failures.iter().map(ToString::to_string).collect::<Vec<_>>(),
            },
        })
    }
}

/// Truth of formulas at every world of a fixed list of small models, one
/// `u64` per model.
struct TruthTable {
    models: Vec<KripkeModel>,
    succ: Vec<Vec<u64>>,
    full: Vec<u64>,
}

impl TruthTable {
    fn new(models: Vec<KripkeModel>) -> Self {
        assert!(models.iter().all(|m| m.len() <= 64));
        let succ = models
            .iter()
            .map(|m| {
                (0..m.len())
                    .map(|w| m.successors(w).fold(0u64, |acc, v| acc | 1 << v))
                    .collect()
            })
            .collect();
        let full = models
            .iter()
            .map(|m| if m.len() == 64 { u64::MAX } else { (1u64 << m.len()) - 1 })
            .collect();
        TruthTable { models, succ, full }
    }

    fn eval(&self, phi: &Formula, cache: &mut HashMap<Formula, Vec<u64>>) -> Vec<u64> {
        if let Some(v) = cache.get(phi) {
            return v.clone();
        }
        let out: Vec<u64> = match phi {
            Formula::Top => self.full.clone(),
            Formula::Bottom => vec![0; self.models.len()],
            Formula::Lit(l) => self
                .models
                .iter()
                .enumerate()
                .map(|(i, m)| {
                    let pos = (0..m.len())
                        .filter(|&w| m.holds(&l.atom, w))
                        .fold(0u64, |acc, w| acc | 1 << w);
                    if l.positive {
                        pos
                    } else {
                        !pos & self.full[i]
                    }
                })
                .collect(),
            Formula::And(a, b) | Formula::Or(a, b) => {
                let (x, y) = (self.eval(a, cache), self.eval(b, cache));
                let and = matches!(phi, Formula::And(..));
                x.iter()
                    .zip(&y)
                    .map(|(p, q)| if and { p & q } else { p | q })
                    .collect()
            }
            Formula::Box(a) | Formula::Dia(a) => {
                let x = self.eval(a, cache);
                let is_box = matches!(phi, Formula::Box(_));
                self.succ
                    .iter()
                    .zip(&x)
                    .map(|(succ, &t)| {
                        succ.iter().enumerate().fold(0u64, |acc, (w, &s)| {
                            let holds = if is_box { s & !t == 0 } else { s & t != 0 };
                            if holds {
                                acc | 1 << w
                            } else {
                                acc
                            }
                        })
                    })
                    .collect()
            }
        };
        cache.insert(phi.clone(), out.clone());
        out
    }
}

/// Pool of test formulas `ψ`: every formula over both polarities of the
/// atoms of `φ` plus a fresh atom, minus `excluded`, up to the configured
/// size, and seeded random ones.
pub fn psi_pool(phi: &Formula, excluded: &[Literal], cfg: &UlipConfig) -> Vec<Formula> {
    let mut atoms: BTreeSet<Atom> = phi.atoms();
    atoms.extend(excluded.iter().map(|l| l.atom.clone()));
    let mut extra = cfg.extra_atom.clone();
    while atoms.iter().any(|a| a.as_str() == extra) {
        extra.push('x');
    }
    atoms.insert(Atom::new(&extra).expect("valid extra atom"));
    let leaves: Vec<Formula> = atoms
        .iter()
        .flat_map(|a| [Literal::pos(a.clone()), Literal::neg(a.clone())])
        .filter(|l| !excluded.contains(l))
        .map(Formula::Lit)
        .collect();
    let mut pool: Vec<Formula> = enumerate_formulas(&leaves, cfg.psi_connectives).concat();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..cfg.random_psi {
        pool.push(random_formula(&mut rng, &leaves, cfg.random_connectives));
    }
    pool
}

/// Checks the three interpolant clauses for `R` as `∀ℓ φ` over K5.
pub fn check_ulip(phi: &Formula, lit: &Literal, r: &Formula, cfg: &UlipConfig) -> UlipReport {
    let allowed: BTreeSet<Literal> = phi.literals().into_iter().filter(|l| l != lit).collect();
    let clause_i = r.literals().is_subset(&allowed);
    check_entailments(phi, &[lit.clone()], r, clause_i, cfg)
}

/// The same clauses for `R` as `∀p φ`, where `ψ` and `R` avoid the atom in
/// both polarities.
pub fn check_uip(phi: &Formula, atom: &Atom, r: &Formula, cfg: &UlipConfig) -> UlipReport {
    let clause_i = r.atoms().iter().all(|a| a != atom && phi.atoms().contains(a));
    let excluded = [Literal::pos(atom.clone()), Literal::neg(atom.clone())];
    check_entailments(phi, &excluded, r, clause_i, cfg)
}

fn check_entailments(
    phi: &Formula,
    excluded: &[Literal],
    r: &Formula,
    clause_i: bool,
    cfg: &UlipConfig,
) -> UlipReport {
    let clause_ii = is_valid(&Formula::implies(r, phi.clone()), FrameClass::K5);
    let pool = psi_pool(phi, excluded, cfg);
    let atoms: BTreeSet<Atom> = pool
        .iter()
        .flat_map(Formula::atoms)
        .chain(phi.atoms())
        .chain(r.atoms())
        .collect();
    let models = sample_models(FrameClass::K5, cfg.max_cluster, &atoms, cfg.seed, cfg.samples)
        .expect("K5 admits every shape");
    let table = TruthTable::new(models);
    let mut cache = HashMap::new();
    let phi_t = table.eval(phi, &mut cache);
    let r_t = table.eval(r, &mut cache);
    // ψ refuted as a premise of φ on the samples needs no prover call
    let candidates: Vec<(&Formula, bool)> = pool
        .iter()
        .filter_map(|psi| {
            let t = table.eval(psi, &mut cache);
            let implies = |target: &[u64]| t.iter().zip(target).all(|(a, b)| a & !b == 0);
            implies(&phi_t).then(|| (psi, implies(&r_t)))
        })
        .collect();
    let fails = |(psi, r_on_samples): &(&Formula, bool)| -> Option<Formula> {
        if *r_on_samples && is_valid(&Formula::implies(psi, r.clone()), FrameClass::K5) {
            return None;
        }
        is_valid(&Formula::implies(psi, phi.clone()), FrameClass::K5).then(|| (*psi).clone())
    };
    #[cfg(feature = "parallel")]
    let failures: Vec<Formula> = {
        use rayon::prelude::*;
        candidates.par_iter().filter_map(fails).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let failures: Vec<Formula> = candidates.iter().filter_map(fails).collect();
    UlipReport {
        clause_i,
        clause_ii,
        checked: pool.len(),
        failures,
    }
}
