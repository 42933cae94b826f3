//! Multiformulas: labeled formulas combined with `⩚`/`⩛`, their semantics
//! under label interpretations, and per-label normal forms.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::OnceLock;

use thiserror::Error;

use crate::formula::Formula;
use crate::kripke::KripkeModel;
use crate::sequent::Label;

pub const DEFAULT_NODE_CAP: usize = 1_000_000;

/// Normal-form size cap, overridable with `K5KIT_NODE_CAP`.
pub fn node_cap() -> usize {
    static CAP: OnceLock<usize> = OnceLock::new();
    *CAP.get_or_init(|| {
        std::env::var("K5KIT_NODE_CAP")
            .ok()
            .and_then(|v| v.trim().parse().ok())
            .unwrap_or(DEFAULT_NODE_CAP)
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MultiError {
    #[error("label @{0} has no world under the interpretation")]
    MissingLabel(Label),
    #[error("normal form exceeds the node cap of {cap} (set K5KIT_NODE_CAP to raise it)")]
    CapExceeded { cap: usize },
    #[error("interpretation maps @{label} to unknown world '{world}'")]
    UnknownWorld { label: Label, world: String },
    #[error("interpretation violates clause {clause}: {detail}")]
    Clause { clause: u8, detail: String },
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Multiformula {
    Labeled(Label, Formula),
    /// `⩚`
    All(Vec<Multiformula>),
    /// `⩛`
    Any(Vec<Multiformula>),
}

impl Multiformula {
    pub fn labeled(label: Label, phi: Formula) -> Self {
        Multiformula::Labeled(label, phi)
    }

    pub fn top(anchor: Label) -> Self {
        Multiformula::Labeled(anchor, Formula::Top)
    }

    pub fn bottom(anchor: Label) -> Self {
        Multiformula::Labeled(anchor, Formula::Bottom)
    }

    /// Flattened `⩚`; a single operand stands alone and none gives `anchor:⊤`.
    pub fn all(items: impl IntoIterator<Item = Multiformula>, anchor: Label) -> Self {
        Self::join(items, anchor, true, false)
    }

    /// Flattened `⩛`; none gives `anchor:⊥`.
    pub fn any(items: impl IntoIterator<Item = Multiformula>, anchor: Label) -> Self {
        Self::join(items, anchor, false, false)
    }

    /// `⩚` dropping `σ:⊤` operands and collapsing to `σ:⊥` when one occurs.
    pub fn all_pruned(items: impl IntoIterator<Item = Multiformula>, anchor: Label) -> Self {
        Self::join(items, anchor, true, true)
    }

    /// `⩛` dropping `σ:⊥` operands and collapsing to `σ:⊤` when one occurs.
    pub fn any_pruned(items: impl IntoIterator<Item = Multiformula>, anchor: Label) -> Self {
        Self::join(items, anchor, false, true)
    }

    fn join(
        items: impl IntoIterator<Item = Multiformula>,
        anchor: Label,
        conj: bool,
        prune: bool,
    ) -> Self {
        let (unit, zero) = if conj {
            (Formula::Top, Formula::Bottom)
        } else {
            (Formula::Bottom, Formula::Top)
        };
        let mut out: Vec<Multiformula> = Vec::new();
        for item in items {
            let parts = match item {
                Multiformula::All(xs) if conj => xs,
                Multiformula::Any(xs) if !conj => xs,
                other => vec![other],
            };
            for part in parts {
                if prune {
                    if let Multiformula::Labeled(l, phi) = &part {
                        if *phi == unit {
                            continue;
                        }
                        if *phi == zero {
                            return Multiformula::Labeled(*l, zero);
                        }
                    }
                }
                if !out.contains(&part) {
                    out.push(part);
                }
            }
        }
        match out.len() {
            0 => Multiformula::Labeled(anchor, unit),
            1 => out.pop().expect("one operand"),
            _ if conj => Multiformula::All(out),
            _ => Multiformula::Any(out),
        }
    }

    pub fn labels(&self) -> BTreeSet<Label> {
        let mut out = BTreeSet::new();
        self.collect_labels(&mut out);
        out
    }

    fn collect_labels(&self, out: &mut BTreeSet<Label>) {
        match self {
            Multiformula::Labeled(l, _) => {
                out.insert(*l);
            }
            Multiformula::All(xs) | Multiformula::Any(xs) => {
                xs.iter().for_each(|x| x.collect_labels(out))
            }
        }
    }

    /// Union of the literal sets of all labeled formulas.
    pub fn literals(&self) -> BTreeSet<crate::formula::Literal> {
        let mut out = BTreeSet::new();
        self.visit(&mut |_, phi| phi.collect_literals(&mut out));
        out
    }

    fn visit(&self, f: &mut impl FnMut(Label, &Formula)) {
        match self {
            Multiformula::Labeled(l, phi) => f(*l, phi),
            Multiformula::All(xs) | Multiformula::Any(xs) => xs.iter().for_each(|x| x.visit(f)),
        }
    }

    /// Node count, counting formula nodes.
    pub fn size(&self) -> usize {
        match self {
            Multiformula::Labeled(_, phi) => phi.size(),
            Multiformula::All(xs) | Multiformula::Any(xs) => {
                1 + xs.iter().map(Multiformula::size).sum::<usize>()
            }
        }
    }

    pub fn map_labels(&self, f: &impl Fn(Label) -> Label) -> Multiformula {
        match self {
            Multiformula::Labeled(l, phi) => Multiformula::Labeled(f(*l), phi.clone()),
            Multiformula::All(xs) => Multiformula::All(xs.iter().map(|x| x.map_labels(f)).collect()),
            Multiformula::Any(xs) => Multiformula::Any(xs.iter().map(|x| x.map_labels(f)).collect()),
        }
    }

    /// Same multiformula up to the order of `⩚`/`⩛` operands.
    pub fn equal_modulo_order(&self, other: &Multiformula) -> bool {
        self.canonical() == other.canonical()
    }

    fn canonical(&self) -> Multiformula {
        match self {
            Multiformula::Labeled(..) => self.clone(),
            Multiformula::All(xs) | Multiformula::Any(xs) => {
                let mut ys: Vec<Multiformula> = xs.iter().map(Multiformula::canonical).collect();
                ys.sort();
                ys.dedup();
                if matches!(self, Multiformula::All(_)) {
                    Multiformula::All(ys)
                } else {
                    Multiformula::Any(ys)
                }
            }
        }
    }

    /// Rendering with the mathematical connectives `⩚`/`⩛`.
    pub fn to_unicode(&self) -> String {
        self.render("⩚", "⩛")
    }

    fn render(&self, and: &str, or: &str) -> String {
        match self {
            Multiformula::Labeled(l, phi) => format!("@{l} : {phi}"),
            Multiformula::All(xs) | Multiformula::Any(xs) => {
                let sep = if matches!(self, Multiformula::All(_)) {
                    and
                } else {
                    or
                };
                xs.iter()
                    .map(|x| match x {
                        Multiformula::Labeled(..) => x.render(and, or),
                        _ => format!("({})", x.render(and, or)),
                    })
                    .collect::<Vec<_>>()
                    .join(&format!(" {sep} "))
            }
        }
    }
}

impl fmt::Display for Multiformula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render("*m*", "+m+"))
    }
}

impl fmt::Debug for Multiformula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Maps labels to worlds of a model, respecting the root and the
/// root/cluster separation of `[ ]`- and `[[ ]]`-labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interpretation {
    map: BTreeMap<Label, String>,
}

impl Interpretation {
    pub fn new(model: &KripkeModel, map: BTreeMap<Label, String>) -> Result<Self, MultiError> {
        let interp = Interpretation { map };
        interp.validate(model)?;
        Ok(interp)
    }

    pub fn get(&self, label: Label) -> Option<&str> {
        self.map.get(&label).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Label, &str)> {
        self.map.iter().map(|(l, w)| (*l, w.as_str()))
    }

    pub fn labels(&self) -> impl Iterator<Item = Label> + '_ {
        self.map.keys().copied()
    }

    pub fn world_index(&self, model: &KripkeModel, label: Label) -> Result<usize, MultiError> {
        let w = self.get(label).ok_or(MultiError::MissingLabel(label))?;
        model.world_index(w).map_err(|_| MultiError::UnknownWorld {
            label,
            world: w.to_string(),
        })
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::Value::Object(
            self.map
                .iter()
                .map(|(l, w)| (l.to_string(), serde_json::Value::String(w.clone())))
                .collect(),
        )
    }

    fn validate(&self, model: &KripkeModel) -> Result<(), MultiError> {
        let idx: BTreeMap<Label, usize> = self
            .map
            .keys()
            .map(|&l| self.world_index(model, l).map(|w| (l, w)))
            .collect::<Result<_, _>>()?;
        check_clauses(model, &idx)
    }

    /// Every interpretation of `labels` into `model`.
    pub fn enumerate(model: &KripkeModel, labels: &BTreeSet<Label>) -> Vec<Interpretation> {
        let labels: Vec<Label> = labels.iter().copied().collect();
        let mut out = Vec::new();
        let mut choice = vec![0usize; labels.len()];
        let n = model.len();
        loop {
            let idx: BTreeMap<Label, usize> = labels.iter().copied().zip(choice.iter().copied()).collect();
            if check_clauses(model, &idx).is_ok() {
                out.push(Interpretation {
                    map: idx
                        .iter()
                        .map(|(l, &w)| (*l, model.world_name(w).to_string()))
                        .collect(),
                });
            }
            // odometer increment
            let mut pos = 0;
            loop {
                if pos == choice.len() {
                    return out;
                }
                choice[pos] += 1;
                if choice[pos] < n {
                    break;
                }
                choice[pos] = 0;
                pos += 1;
            }
        }
    }
}

fn check_clauses(model: &KripkeModel, idx: &BTreeMap<Label, usize>) -> Result<(), MultiError> {
    let fail = |clause, detail: String| Err(MultiError::Clause { clause, detail });
    let trunk = idx.get(&Label::Trunk).copied();
    if let Some(t) = trunk {
        if t != model.root_index() {
            return fail(1, format!("@. must be the root, not {}", model.world_name(t)));
        }
    }
    for (&l, &w) in idx {
        if l.is_bracket() {
            if let Some(t) = trunk {
                if !model.related(t, w) {
                    return fail(2, format!("root does not see {} for @{l}", model.world_name(w)));
                }
            }
            for (&j, &v) in idx.iter().filter(|(j, _)| j.is_double()) {
                if !(model.related(w, v) && model.related(v, w)) {
                    return fail(3, format!("@{l} and @{j} are not mutually related"));
                }
            }
        }
        if l.is_double() {
            if let Some(t) = trunk {
                if model.related(t, w) {
                    return fail(4, format!("root sees {} for @{l}", model.world_name(w)));
                }
            }
        }
    }
    Ok(())
}

pub fn eval_multi(
    model: &KripkeModel,
    interp: &Interpretation,
    u: &Multiformula,
) -> Result<bool, MultiError> {
    Ok(match u {
        Multiformula::Labeled(l, phi) => model.eval_at(interp.world_index(model, *l)?, phi),
        Multiformula::All(xs) => {
            for x in xs {
                if !eval_multi(model, interp, x)? {
                    return Ok(false);
                }
            }
            true
        }
        Multiformula::Any(xs) => {
            for x in xs {
                if eval_multi(model, interp, x)? {
                    return Ok(true);
                }
            }
            false
        }
    })
}

/// One conjunct (resp. disjunct) of a normal form: a formula per label.
pub type Row = BTreeMap<Label, Formula>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct NfOptions {
    pub cap: usize,
    /// Drop unit operands inside rows and rows that are trivially absorbed.
    pub prune: bool,
}

impl Default for NfOptions {
    fn default() -> Self {
        NfOptions {
            cap: node_cap(),
            prune: false,
        }
    }
}

/// Rows of the SDNF (`dual = false`) or SCNF (`dual = true`) of `u` over
/// `scope`, which must contain `labels(u)`.
pub(crate) fn normal_rows(
    u: &Multiformula,
    scope: &BTreeSet<Label>,
    dual: bool,
    opts: NfOptions,
) -> Result<Vec<Row>, MultiError> {
    debug_assert!(u.labels().is_subset(scope));
    let raw = if opts.prune {
        reduced_rows(&merge_labels(u), dual, opts.cap)?
            .into_iter()
            .map(|r| r.into_iter().collect())
            .collect()
    } else {
        raw_rows(u, dual, opts.cap)?
    };
    let (unit, zero) = if dual {
        (Formula::Bottom, Formula::Top)
    } else {
        (Formula::Top, Formula::Bottom)
    };
    let mut rows: Vec<Row> = Vec::new();
    'rows: for entries in raw {
        let mut grouped: BTreeMap<Label, Vec<Formula>> = BTreeMap::new();
        for (l, phi) in entries {
            let parts = grouped.entry(l).or_default();
            if !parts.contains(&phi) {
                parts.push(phi);
            }
        }
        let mut row = Row::new();
        for &l in scope {
            let mut parts = grouped.remove(&l).unwrap_or_default();
            if opts.prune {
                if parts.contains(&zero) {
                    continue 'rows;
                }
                parts.retain(|p| *p != unit);
            }
            let merged = if dual {
                Formula::disj(parts)
            } else {
                Formula::conj(parts)
            };
            row.insert(l, merged);
        }
        if !rows.contains(&row) {
            rows.push(row);
        }
    }
    if opts.prune && rows.iter().any(|r| r.values().all(|phi| *phi == unit)) {
        // an all-unit row absorbs the rest
        rows = vec![scope.iter().map(|&l| (l, unit.clone())).collect()];
    }
    Ok(rows)
}

type Cells = BTreeSet<(Label, Formula)>;

/// Folds sibling cells with a common label into one cell:
/// `σ:φ ⩚ σ:ψ` becomes `σ:(φ ∧ ψ)` and `σ:φ ⩛ σ:ψ` becomes `σ:(φ ∨ ψ)`.
fn merge_labels(u: &Multiformula) -> Multiformula {
    match u {
        Multiformula::Labeled(..) => u.clone(),
        Multiformula::All(xs) | Multiformula::Any(xs) => {
            let conj = matches!(u, Multiformula::All(_));
            let mut cells: BTreeMap<Label, Vec<Formula>> = BTreeMap::new();
            let mut rest = Vec::new();
            for x in xs {
                match merge_labels(x) {
                    Multiformula::Labeled(l, phi) => {
                        let parts = cells.entry(l).or_default();
                        if !parts.contains(&phi) {
                            parts.push(phi);
                        }
                    }
                    other => rest.push(other),
                }
            }
            let mut items: Vec<Multiformula> = cells
                .into_iter()
                .map(|(l, parts)| {
                    let phi = if conj {
                        Formula::conj(parts)
                    } else {
                        Formula::disj(parts)
                    };
                    Multiformula::Labeled(l, phi)
                })
                .collect();
            items.extend(rest);
            if items.len() == 1 {
                items.pop().expect("one item")
            } else if conj {
                Multiformula::All(items)
            } else {
                Multiformula::Any(items)
            }
        }
    }
}

/// Keeps only rows that are not supersets of another row. A superset row
/// is implied by (conjunctive rows) or implies (disjunctive rows) its
/// subset, so dropping it preserves the normal form's meaning.
fn minimize(rows: Vec<Cells>) -> Vec<Cells> {
    let mut rows = rows;
    rows.sort_by_key(BTreeSet::len);
    let mut kept: Vec<Cells> = Vec::new();
    for r in rows {
        if !kept.iter().any(|k| k.is_subset(&r)) {
            kept.push(r);
        }
    }
    kept
}

/// Distribution with unit elimination, absorption and complementary
/// literals at one label. `zero` rows are dropped, `unit` cells vanish.
fn reduced_rows(u: &Multiformula, dual: bool, cap: usize) -> Result<Vec<Cells>, MultiError> {
    let (unit, zero) = if dual {
        (Formula::Bottom, Formula::Top)
    } else {
        (Formula::Top, Formula::Bottom)
    };
    match u {
        Multiformula::Labeled(l, phi) => Ok(if *phi == zero {
            Vec::new()
        } else if *phi == unit {
            vec![Cells::new()]
        } else {
            vec![[(*l, phi.clone())].into()]
        }),
        Multiformula::All(xs) | Multiformula::Any(xs) => {
            let product = matches!(u, Multiformula::All(_)) != dual;
            if !product {
                let mut out = Vec::new();
                for x in xs {
                    out.extend(reduced_rows(x, dual, cap)?);
                    if out.len() > cap {
                        return Err(MultiError::CapExceeded { cap });
                    }
                }
                return Ok(minimize(out));
            }
            let mut acc: Vec<Cells> = vec![Cells::new()];
            for x in xs {
                let part = reduced_rows(x, dual, cap)?;
                if acc.len().saturating_mul(part.len()) > cap {
                    return Err(MultiError::CapExceeded { cap });
                }
                let mut next = Vec::with_capacity(acc.len() * part.len());
                for a in &acc {
                    'pair: for p in &part {
                        let mut row = a.clone();
                        for (l, phi) in p {
                            if let Some(lit) = phi.as_literal() {
                                if row.contains(&(*l, Formula::Lit(lit.negate()))) {
                                    continue 'pair;
                                }
                            }
                            row.insert((*l, phi.clone()));
                        }
                        next.push(row);
                    }
                }
                acc = minimize(next);
            }
            Ok(acc)
        }
    }
}

/// One row of a normal form that separates only some labels: each
/// separated label carries a single formula, everything else stays in
/// `rest`, a multiformula free of the separated labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitRow {
    pub cells: Row,
    pub rest: Multiformula,
}

/// Up to this many distinct separated cells the expansion is used instead
/// of distribution.
const EXPANSION_LIMIT: usize = 12;

struct Partial {
    cells: Cells,
    rest: Multiformula,
}

struct Splitter<'a> {
    sep: &'a BTreeSet<Label>,
    dual: bool,
    anchor: Label,
    cap: usize,
}

impl Splitter<'_> {
    fn unit(&self) -> Formula {
        if self.dual {
            Formula::Bottom
        } else {
            Formula::Top
        }
    }

    fn zero(&self) -> Formula {
        if self.dual {
            Formula::Top
        } else {
            Formula::Bottom
        }
    }

    fn is(&self, u: &Multiformula, f: &Formula) -> bool {
        matches!(u, Multiformula::Labeled(_, phi) if phi == f)
    }

    /// Join inside a row (`⩚` for disjunctive forms).
    fn row_join(&self, a: Multiformula, b: Multiformula) -> Multiformula {
        if self.dual {
            Multiformula::any_pruned([a, b], self.anchor)
        } else {
            Multiformula::all_pruned([a, b], self.anchor)
        }
    }

    /// Join across rows (`⩛` for disjunctive forms).
    fn col_join(&self, a: Multiformula, b: Multiformula) -> Multiformula {
        if self.dual {
            Multiformula::all_pruned([a, b], self.anchor)
        } else {
            Multiformula::any_pruned([a, b], self.anchor)
        }
    }

    fn cell_formula(&self, formulas: Vec<Formula>) -> Formula {
        if self.dual {
            Formula::disj(formulas)
        } else {
            Formula::conj(formulas)
        }
    }

    fn unit_row(&self) -> Partial {
        Partial {
            cells: Cells::new(),
            rest: Multiformula::Labeled(self.anchor, self.unit()),
        }
    }

    /// Distinct cells at separated labels, in first-occurrence order.
    fn sep_cells(&self, u: &Multiformula, out: &mut Vec<(Label, Formula)>) {
        match u {
            Multiformula::Labeled(l, phi) => {
                let cell = (*l, phi.clone());
                if self.sep.contains(l) && !out.contains(&cell) {
                    out.push(cell);
                }
            }
            Multiformula::All(xs) | Multiformula::Any(xs) => {
                for x in xs {
                    self.sep_cells(x, out);
                }
            }
        }
    }

    /// `u` with the separated cells in `mask` set to the row unit and the
    /// others to the row zero.
    fn substitute(&self, u: &Multiformula, cells: &[(Label, Formula)], mask: u64) -> Multiformula {
        match u {
            Multiformula::Labeled(l, phi) => {
                match cells.iter().position(|(cl, cf)| cl == l && cf == phi) {
                    Some(i) if mask >> i & 1 == 1 => Multiformula::Labeled(self.anchor, self.unit()),
                    Some(_) => Multiformula::Labeled(self.anchor, self.zero()),
                    None => u.clone(),
                }
            }
            Multiformula::All(xs) => Multiformula::all_pruned(
                xs.iter().map(|x| self.substitute(x, cells, mask)),
                self.anchor,
            ),
            Multiformula::Any(xs) => Multiformula::any_pruned(
                xs.iter().map(|x| self.substitute(x, cells, mask)),
                self.anchor,
            ),
        }
    }

    /// Expansion over sets of separated cells: with `S` ranging over those
    /// sets, `u` is the join of `S ⩚ u[S := unit, rest := zero]`. Exact
    /// because `u` is a positive combination of its cells.
    fn expansion(&self, u: &Multiformula, cells: &[(Label, Formula)]) -> Result<Vec<Partial>, MultiError> {
        let m = cells.len();
        let mut masks: Vec<u64> = (0..1u64 << m).collect();
        masks.sort_by_key(|x| x.count_ones());
        let mut kept: Vec<(u64, Partial)> = Vec::new();
        for mask in masks {
            if kept
                .iter()
                .any(|(k, p)| k & mask == *k && self.is(&p.rest, &self.unit()))
            {
                continue;
            }
            let rest = self.substitute(u, cells, mask);
            if self.is(&rest, &self.zero()) {
                continue;
            }
            if kept.iter().any(|(k, p)| k & mask == *k && p.rest == rest) {
                continue;
            }
            let row_cells: Cells = (0..m)
                .filter(|i| mask >> i & 1 == 1)
                .map(|i| cells[i].clone())
                .collect();
            kept.push((
                mask,
                Partial {
                    cells: row_cells,
                    rest,
                },
            ));
            if kept.len() > self.cap {
                return Err(MultiError::CapExceeded { cap: self.cap });
            }
        }
        Ok(kept.into_iter().map(|(_, p)| p).collect())
    }

    fn top_rows(&self, u: &Multiformula) -> Result<Vec<Partial>, MultiError> {
        let mut cells = Vec::new();
        self.sep_cells(u, &mut cells);
        if cells.len() <= EXPANSION_LIMIT {
            self.expansion(u, &cells)
        } else {
            self.rows(u)
        }
    }

    fn rows(&self, u: &Multiformula) -> Result<Vec<Partial>, MultiError> {
        if u.labels().is_disjoint(self.sep) {
            return Ok(if self.is(u, &self.zero()) {
                Vec::new()
            } else if self.is(u, &self.unit()) {
                vec![self.unit_row()]
            } else {
                vec![Partial {
                    cells: Cells::new(),
                    rest: u.clone(),
                }]
            });
        }
        match u {
            Multiformula::Labeled(l, phi) => Ok(if *phi == self.zero() {
                Vec::new()
            } else if *phi == self.unit() {
                vec![self.unit_row()]
            } else {
                vec![Partial {
                    cells: [(*l, phi.clone())].into(),
                    rest: Multiformula::Labeled(self.anchor, self.unit()),
                }]
            }),
            Multiformula::All(xs) | Multiformula::Any(xs) => {
                let product = matches!(u, Multiformula::All(_)) != self.dual;
                if !product {
                    let mut out = Vec::new();
                    for x in xs {
                        out.extend(self.rows(x)?);
                    }
                    return self.normalize(out);
                }
                let mut acc = vec![self.unit_row()];
                for x in xs {
                    let part = self.rows(x)?;
                    if acc.len().saturating_mul(part.len()) > self.cap {
                        return Err(MultiError::CapExceeded { cap: self.cap });
                    }
                    let mut next = Vec::with_capacity(acc.len() * part.len());
                    for a in &acc {
                        'pair: for p in &part {
                            let mut cells = a.cells.clone();
                            for (l, phi) in &p.cells {
                                if let Some(lit) = phi.as_literal() {
                                    if cells.contains(&(*l, Formula::Lit(lit.negate()))) {
                                        continue 'pair;
                                    }
                                }
                                cells.insert((*l, phi.clone()));
                            }
                            let rest = self.row_join(a.rest.clone(), p.rest.clone());
                            if self.is(&rest, &self.zero()) {
                                continue;
                            }
                            next.push(Partial { cells, rest });
                        }
                    }
                    acc = self.normalize(next)?;
                }
                Ok(acc)
            }
        }
    }

    /// Merges rows with equal cells (or, with one separated label, equal
    /// rests) and drops rows subsumed by another.
    fn normalize(&self, rows: Vec<Partial>) -> Result<Vec<Partial>, MultiError> {
        let mut rows = rows;
        loop {
            let before = rows.len();
            let mut by_cells: Vec<Partial> = Vec::new();
            for r in rows {
                match by_cells.iter_mut().find(|k| k.cells == r.cells) {
                    Some(k) => k.rest = self.col_join(k.rest.clone(), r.rest),
                    None => by_cells.push(r),
                }
            }
            rows = by_cells;
            if self.sep.len() == 1 {
                let mut by_rest: Vec<Partial> = Vec::new();
                for r in rows {
                    match by_rest.iter_mut().find(|k| k.rest == r.rest) {
                        Some(k) => k.cells = self.merge_single(&k.cells, &r.cells),
                        None => by_rest.push(r),
                    }
                }
                rows = by_rest;
            }
            let unit = Multiformula::Labeled(self.anchor, self.unit());
            let mut kept: Vec<Partial> = Vec::new();
            rows.sort_by_key(|r| r.cells.len());
            for r in rows {
                let subsumed = kept.iter().any(|k| {
                    k.cells.is_subset(&r.cells) && (k.rest == r.rest || self.is(&k.rest, &self.unit()))
                });
                if !subsumed {
                    kept.push(r);
                }
            }
            if kept.iter().any(|k| k.cells.is_empty() && k.rest == unit) {
                kept = vec![self.unit_row()];
            }
            rows = kept;
            if rows.len() > self.cap {
                return Err(MultiError::CapExceeded { cap: self.cap });
            }
            if rows.len() == before {
                return Ok(rows);
            }
        }
    }

    /// Cells of two rows over the same single label joined across rows.
    fn merge_single(&self, a: &Cells, b: &Cells) -> Cells {
        if a.is_empty() || b.is_empty() {
            return Cells::new();
        }
        let l = a.iter().next().expect("nonempty").0;
        let fa = self.cell_formula(a.iter().map(|(_, f)| f.clone()).collect());
        let fb = self.cell_formula(b.iter().map(|(_, f)| f.clone()).collect());
        let joined = if self.dual {
            Formula::conj([fa, fb])
        } else {
            Formula::disj([fa, fb])
        };
        [(l, joined)].into()
    }
}

/// Normal form separating only the labels in `sep`; `dual` selects the
/// conjunctive form. Rows are disjuncts (conjuncts when `dual`).
pub fn split_rows(
    u: &Multiformula,
    sep: &BTreeSet<Label>,
    dual: bool,
    anchor: Label,
    cap: usize,
) -> Result<Vec<SplitRow>, MultiError> {
    let s = Splitter {
        sep,
        dual,
        anchor,
        cap,
    };
    let rows = s.top_rows(u)?;
    Ok(rows
        .into_iter()
        .map(|p| {
            let mut grouped: BTreeMap<Label, Vec<Formula>> = BTreeMap::new();
            for (l, phi) in p.cells {
                grouped.entry(l).or_default().push(phi);
            }
            let cells = sep
                .iter()
                .map(|&l| (l, s.cell_formula(grouped.remove(&l).unwrap_or_default())))
                .collect();
            SplitRow { cells, rest: p.rest }
        })
        .collect())
}

fn raw_rows(
    u: &Multiformula,
    dual: bool,
    cap: usize,
) -> Result<Vec<Vec<(Label, Formula)>>, MultiError> {
    match u {
        Multiformula::Labeled(l, phi) => Ok(vec![vec![(*l, phi.clone())]]),
        Multiformula::All(xs) | Multiformula::Any(xs) => {
            let product = matches!(u, Multiformula::All(_)) != dual;
            if !product {
                let mut out = Vec::new();
                for x in xs {
                    out.extend(raw_rows(x, dual, cap)?);
                    if out.len() > cap {
                        return Err(MultiError::CapExceeded { cap });
                    }
                }
                return Ok(out);
            }
            let mut acc: Vec<Vec<(Label, Formula)>> = vec![Vec::new()];
            for x in xs {
                let part = raw_rows(x, dual, cap)?;
                let entries: usize = acc.iter().map(Vec::len).sum::<usize>() * part.len()
                    + part.iter().map(Vec::len).sum::<usize>() * acc.len();
                if acc.len().saturating_mul(part.len()) > cap || entries > cap {
                    return Err(MultiError::CapExceeded { cap });
                }
                let mut next = Vec::with_capacity(acc.len() * part.len());
                for a in &acc {
                    for p in &part {
                        let mut row = a.clone();
                        row.extend(p.iter().cloned());
                        next.push(row);
                    }
                }
                acc = next;
            }
            Ok(acc)
        }
    }
}

fn anchor_of(scope: &BTreeSet<Label>) -> Label {
    scope.first().copied().unwrap_or(Label::Trunk)
}

pub(crate) fn rows_to_multi(rows: &[Row], scope: &BTreeSet<Label>, dual: bool) -> Multiformula {
    let anchor = anchor_of(scope);
    let rows = rows.iter().map(|r| {
        let cells = r.iter().map(|(l, phi)| Multiformula::Labeled(*l, phi.clone()));
        if dual {
            Multiformula::any(cells, anchor)
        } else {
            Multiformula::all(cells, anchor)
        }
    });
    if dual {
        Multiformula::all(rows, anchor)
    } else {
        Multiformula::any(rows, anchor)
    }
}

/// Disjunction of conjunctions in which every label of `u` occurs exactly
/// once per conjunct.
pub fn to_sdnf(u: &Multiformula) -> Result<Multiformula, MultiError> {
    to_sdnf_with(u, &u.labels())
}

/// As [`to_sdnf`], padding every label of `scope`.
pub fn to_sdnf_with(u: &Multiformula, scope: &BTreeSet<Label>) -> Result<Multiformula, MultiError> {
    let rows = normal_rows(u, scope, false, NfOptions::default())?;
    Ok(rows_to_multi(&rows, scope, false))
}

/// Conjunction of disjunctions in which every label of `u` occurs exactly
/// once per disjunct.
pub fn to_scnf(u: &Multiformula) -> Result<Multiformula, MultiError> {
    to_scnf_with(u, &u.labels())
}

pub fn to_scnf_with(u: &Multiformula, scope: &BTreeSet<Label>) -> Result<Multiformula, MultiError> {
    let rows = normal_rows(u, scope, true, NfOptions::default())?;
    Ok(rows_to_multi(&rows, scope, true))
}

/// Splits a normal form back into rows of labeled cells.
fn shape_rows(u: &Multiformula, dual: bool) -> Vec<Vec<&Multiformula>> {
    let outer = match (u, dual) {
        (Multiformula::Any(xs), false) | (Multiformula::All(xs), true) => xs.iter().collect(),
        _ => vec![u],
    };
    outer
        .into_iter()
        .map(|row| match (row, dual) {
            (Multiformula::All(xs), false) | (Multiformula::Any(xs), true) => xs.iter().collect(),
            _ => vec![row],
        })
        .collect()
}

fn has_shape(u: &Multiformula, scope: &BTreeSet<Label>, dual: bool) -> bool {
    shape_rows(u, dual).iter().all(|row| {
        let mut seen = Vec::new();
        for cell in row {
            match cell {
                Multiformula::Labeled(l, _) => seen.push(*l),
                _ => return false,
            }
        }
        seen.sort();
        seen.len() == scope.len() && seen.iter().eq(scope.iter())
    })
}

/// Every conjunct mentions each label of `scope` exactly once.
pub fn is_sdnf(u: &Multiformula, scope: &BTreeSet<Label>) -> bool {
    has_shape(u, scope, false)
}

/// Every disjunct mentions each label of `scope` exactly once.
pub fn is_scnf(u: &Multiformula, scope: &BTreeSet<Label>) -> bool {
    has_shape(u, scope, true)
}
