//! Uniform Lyndon interpolation for K5 by recursion over proof search,
//! extended with the rules `d_t'` and `dd`.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::formula::{Atom, Formula, Literal};
use crate::kripke::FrameClass;
use crate::multiformula::{
    node_cap, normal_rows, split_rows, MultiError, Multiformula, NfOptions, Row,
};
use crate::prover::is_valid;
use crate::sequent::{first_unsaturated, Label, LayeredSequent, Obligation, Scope};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InterpolationError {
    #[error("interpolation implemented for K5 only (requested {0})")]
    UnsupportedLogic(FrameClass),
    #[error("`{0}` is not a K5-sequent")]
    NotK5Sequent(String),
    #[error(transparent)]
    Multi(#[from] MultiError),
    #[error("invariant violated: {0}")]
    InvariantViolated(String),
    #[error("label @{0} cannot be erased: only @. may remain")]
    ForeignLabel(Label),
    #[error("interpolant check failed: {0}")]
    Postcondition(String),
}

/// Which branch of the recursion computed a call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Step {
    /// Closed: `σ:⊤`.
    Initial,
    /// `∨` or `∧`.
    Propositional,
    /// Box or diamond rows.
    Modal,
    /// Saturated, no diamonds: literal disjunction.
    Base,
    /// Saturated trunk-only sequent: rule `d_t'`.
    TrunkSerial,
    /// Saturated, `t = 1` and nothing new in the crown: literal disjunction.
    Insufficient,
    /// Rule `dd`.
    Doubled,
}

impl Step {
    pub fn id(self) -> &'static str {
        match self {
            Step::Initial => "1",
            Step::Propositional => "2",
            Step::Modal => "3",
            Step::Base => "4a",
            Step::TrunkSerial => "4b",
            Step::Insufficient => "4c",
            Step::Doubled => "4d",
        }
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// Arguments `(t, Σ_c, G)` of one recursive call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterpolantCall {
    pub t: bool,
    pub sigma_c: BTreeSet<Formula>,
    pub sequent: LayeredSequent,
}

impl InterpolantCall {
    /// The root call `(0, ∅, φ)`.
    pub fn root(phi: &Formula) -> Self {
        InterpolantCall {
            t: false,
            sigma_c: BTreeSet::new(),
            sequent: LayeredSequent::trunk([phi.clone()]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceNode {
    pub step: Step,
    pub t: bool,
    pub sigma_c: usize,
    pub sequent: LayeredSequent,
    pub sufficient: bool,
    pub result: Multiformula,
    pub children: Vec<TraceNode>,
}

impl TraceNode {
    /// One line per call in pre-order, indented by depth.
    pub fn render(&self) -> String {
        let mut out = String::new();
        self.write(0, &mut out);
        out
    }

    fn write(&self, depth: usize, out: &mut String) {
        out.push_str(&format!(
            "{}step={} t={} |Sigma_c|={} sequent={} status={}\n",
            "  ".repeat(depth),
            self.step,
            u8::from(self.t),
            self.sigma_c,
            self.sequent.render_verbose(),
            if self.sufficient {
                "sufficient"
            } else {
                "insufficient"
            }
        ));
        for c in &self.children {
            c.write(depth + 1, out);
        }
    }

    /// All nodes in pre-order.
    pub fn nodes(&self) -> Vec<&TraceNode> {
        let mut out = vec![self];
        for c in &self.children {
            out.extend(c.nodes());
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InterpolationOptions {
    /// Drop `σ:⊥` from `⩛` and `σ:⊤` from `⩚` (and the formula-level
    /// counterparts) while recursing. Off gives the construction verbatim.
    pub prune: bool,
    pub trace: bool,
    /// Report a violated termination invariant as an error.
    pub strict: bool,
    pub cap: usize,
}

impl Default for InterpolationOptions {
    fn default() -> Self {
        InterpolationOptions {
            prune: true,
            trace: false,
            strict: true,
            cap: node_cap(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interpolation {
    pub result: Multiformula,
    pub sufficient: bool,
    pub trace: Option<TraceNode>,
    pub calls: usize,
}

/// `G_c` and its box/diamond members `□◇G_c`.
pub fn crown_formulas(g: &LayeredSequent) -> (BTreeSet<Formula>, BTreeSet<Formula>) {
    let gc: BTreeSet<Formula> = g
        .labeled()
        .filter(|(l, _)| l.is_crown())
        .map(|(_, f)| f.clone())
        .collect();
    let modal = gc.iter().filter(|f| f.is_modal()).cloned().collect();
    (gc, modal)
}

fn anchor(g: &LayeredSequent) -> Label {
    g.labels().next().unwrap_or(Label::Trunk)
}

/// `⩛ σ:ℓ'` over the literals `ℓ' ≠ ℓ` occurring in `g`.
pub fn lit_dis(lit: &Literal, g: &LayeredSequent) -> Multiformula {
    let cells: Vec<Multiformula> = g
        .labeled()
        .filter(|(_, f)| f.as_literal().is_some_and(|l| l != lit))
        .map(|(l, f)| Multiformula::Labeled(l, f.clone()))
        .collect();
    Multiformula::any(cells, anchor(g))
}

struct Ctx<'a> {
    lit: &'a Literal,
    opts: InterpolationOptions,
    calls: usize,
}

/// Result of one call, with what the termination checks need to know
/// about the calls above it.
struct Outcome {
    mf: Multiformula,
    sufficient: bool,
    /// Steps where branches leave the chain of steps 2 and 3.
    frontier_23: u8,
    /// Branches leaving the chain of step-2 calls do so as the lemma says
    /// they must after `dd`.
    after_dd_ok: bool,
    trace: Option<TraceNode>,
}

impl Ctx<'_> {
    fn all(&self, items: impl IntoIterator<Item = Multiformula>, anchor: Label) -> Multiformula {
        if self.opts.prune {
            Multiformula::all_pruned(items, anchor)
        } else {
            Multiformula::all(items, anchor)
        }
    }

    fn any(&self, items: impl IntoIterator<Item = Multiformula>, anchor: Label) -> Multiformula {
        if self.opts.prune {
            Multiformula::any_pruned(items, anchor)
        } else {
            Multiformula::any(items, anchor)
        }
    }

    fn boxed(&self, a: Formula) -> Formula {
        if self.opts.prune && a == Formula::Top {
            Formula::Top
        } else {
            Formula::boxed(a)
        }
    }

    fn dia(&self, a: Formula) -> Formula {
        if self.opts.prune && a == Formula::Bottom {
            Formula::Bottom
        } else {
            Formula::dia(a)
        }
    }

    /// Rows of a normal form of `u` with the labels in `sep` separated.
    /// Literal mode takes the full normal form over `scope`; prune mode
    /// separates `sep` only and keeps the rest as one multiformula.
    fn split(
        &self,
        u: &Multiformula,
        sep: &BTreeSet<Label>,
        scope: &BTreeSet<Label>,
        dual: bool,
        anchor: Label,
    ) -> Result<Vec<(Row, Multiformula)>, InterpolationError> {
        if self.opts.prune {
            let rows = split_rows(u, sep, dual, anchor, self.opts.cap)?;
            return Ok(rows
                .into_iter()
                .map(|r| {
                    let cells = r
                        .cells
                        .into_iter()
                        .map(|(l, f)| (l, simplify_syntactic(&f)))
                        .collect();
                    (cells, r.rest)
                })
                .collect());
        }
        let opts = NfOptions {
            cap: self.opts.cap,
            prune: false,
        };
        let rows = normal_rows(u, scope, dual, opts)?;
        Ok(rows
            .into_iter()
            .map(|mut row| {
                let cells: Row = sep
                    .iter()
                    .map(|l| (*l, row.remove(l).expect("padded row")))
                    .collect();
                let rest: Vec<Multiformula> = row
                    .into_iter()
                    .map(|(l, f)| Multiformula::Labeled(l, f))
                    .collect();
                let rest = if dual {
                    Multiformula::any(rest, anchor)
                } else {
                    Multiformula::all(rest, anchor)
                };
                (cells, rest)
            })
            .collect())
    }

    fn violated(&self, msg: String) -> Result<(), InterpolationError> {
        if self.opts.strict {
            Err(InterpolationError::InvariantViolated(msg))
        } else {
            Ok(())
        }
    }

    fn run(&mut self, call: InterpolantCall) -> Result<Outcome, InterpolationError> {
        self.calls += 1;
        let InterpolantCall { t, sigma_c, sequent: g } = call;
        let anchor = anchor(&g);
        let mut children: Vec<Outcome> = Vec::new();
        let (step, mf) = 'step: {
            // Step 1
            if let Some(sigma) = g.is_closed() {
                break 'step (Step::Initial, Multiformula::top(sigma));
            }
            // Step 2
            if let Some(item) = first_unsaturated(&g, FrameClass::K5, Scope::Propositional) {
                let sigma = item.label;
                match &item.formula {
                    Formula::Or(a, b) => {
                        let mut h = g.clone();
                        h.insert(sigma, (**a).clone());
                        h.insert(sigma, (**b).clone());
                        let c = self.run(InterpolantCall { t, sigma_c: sigma_c.clone(), sequent: h })?;
                        let mf = c.mf.clone();
                        children.push(c);
                        break 'step (Step::Propositional, mf);
                    }
                    Formula::And(a, b) => {
                        let mut parts = Vec::new();
                        for part in [a, b] {
                            let mut h = g.clone();
                            h.insert(sigma, (**part).clone());
                            let c = self.run(InterpolantCall {
                                t,
                                sigma_c: sigma_c.clone(),
                                sequent: h,
                            })?;
                            parts.push(c.mf.clone());
                            children.push(c);
                        }
                        break 'step (Step::Propositional, self.all(parts, anchor));
                    }
                    _ => unreachable!("propositional scan yields only and/or"),
                }
            }
            // Step 3
            if let Some(item) = first_unsaturated(&g, FrameClass::K5, Scope::Modal) {
                let sigma = item.label;
                match (&item.formula, item.obligation) {
                    (Formula::Box(a), Obligation::BoxMissing) => {
                        let fresh = if sigma.is_trunk() {
                            g.fresh_bracket()
                        } else {
                            g.fresh_double()
                        };
                        let mut h = g.clone();
                        h.insert(fresh, (**a).clone());
                        let c = self.run(InterpolantCall { t, sigma_c: sigma_c.clone(), sequent: h })?;
                        let scope: BTreeSet<Label> = g.labels().chain([fresh]).collect();
                        let rows = self.split(&c.mf, &[fresh].into(), &scope, true, anchor)?;
                        children.push(c);
                        let conjuncts: Vec<Multiformula> = rows
                            .into_iter()
                            .map(|(mut cells, rest)| {
                                let delta = cells.remove(&fresh).expect("separated label");
                                let head = Multiformula::Labeled(sigma, self.boxed(delta));
                                self.any([head, rest], anchor)
                            })
                            .collect();
                        break 'step (Step::Modal, self.all(conjuncts, anchor));
                    }
                    (Formula::Dia(a), Obligation::DiaMissing(tau)) => {
                        let mut h = g.clone();
                        h.insert(tau, (**a).clone());
                        let c = self.run(InterpolantCall { t, sigma_c: sigma_c.clone(), sequent: h })?;
                        let mf = c.mf.clone();
                        children.push(c);
                        break 'step (Step::Modal, mf);
                    }
                    _ => unreachable!("K5 has no seriality obligations"),
                }
            }
            // Step 4
            let diamonds: Vec<Formula> = g
                .labeled()
                .filter_map(|(_, f)| match f {
                    Formula::Dia(a) => Some((**a).clone()),
                    _ => None,
                })
                .collect();
            if diamonds.is_empty() {
                break 'step (Step::Base, lit_dis(self.lit, &g));
            }
            if g.is_trunk_only() {
                if t {
                    self.violated(format!("d_t' with t = 1 on {}", g.render_verbose()))?;
                }
                let b1 = Label::Bracket(1);
                let h = g.clone().with(b1, diamonds);
                let c = self.run(InterpolantCall {
                    t: false,
                    sigma_c: sigma_c.clone(),
                    sequent: h,
                })?;
                if c.frontier_23 & !(Step::Initial.bit() | Step::Doubled.bit()) != 0 {
                    self.violated(format!(
                        "a branch above d_t' on {} stops outside steps 1 and 4d",
                        g.render_verbose()
                    ))?;
                }
                let scope: BTreeSet<Label> = [Label::Trunk, b1].into();
                let rows = self.split(&c.mf, &[b1].into(), &scope, false, anchor)?;
                children.push(c);
                let mut left = vec![Multiformula::Labeled(
                    Label::Trunk,
                    Formula::boxed(Formula::Bottom),
                )];
                for (mut cells, gamma) in rows {
                    let delta = cells.remove(&b1).expect("separated label");
                    left.push(self.all(
                        [Multiformula::Labeled(Label::Trunk, self.dia(delta)), gamma],
                        anchor,
                    ));
                }
                let right = self.any(
                    [
                        Multiformula::Labeled(Label::Trunk, Formula::dia(Formula::Top)),
                        lit_dis(self.lit, &g),
                    ],
                    anchor,
                );
                let mf = self.all([self.any(left, anchor), right], anchor);
                break 'step (Step::TrunkSerial, mf);
            }
            let (gc, boxdia) = crown_formulas(&g);
            if t && boxdia.is_subset(&sigma_c) {
                break 'step (Step::Insufficient, lit_dis(self.lit, &g));
            }
            // Step 4d: rule dd
            if !sigma_c.is_subset(&boxdia) {
                self.violated(format!(
                    "Sigma_c is not contained in the crown modal formulas at dd on {}",
                    g.render_verbose()
                ))?;
            }
            if t && boxdia == sigma_c {
                self.violated(format!("Sigma_c does not grow at dd on {}", g.render_verbose()))?;
            }
            let mut h = g.clone();
            let mut renamed: Vec<(Label, Label)> = Vec::new();
            if h.has_label(Label::BracketD) {
                let j = h.fresh_bracket();
                h.relabel(Label::BracketD, j);
                renamed.push((j, Label::BracketD));
            }
            if h.has_label(Label::DoubleD) {
                let k = h.fresh_double();
                h.relabel(Label::DoubleD, k);
                renamed.push((k, Label::DoubleD));
            }
            let b1 = h
                .labels()
                .find(|l| l.is_bracket())
                .expect("a K5 sequent with crown has a [ ]-component");
            let phi: Vec<Formula> = gc
                .iter()
                .filter_map(|f| match f {
                    Formula::Dia(a) => Some((**a).clone()),
                    _ => None,
                })
                .collect();
            // Θ and Φ in sequent order rather than set order
            let mut theta: Vec<Formula> = Vec::new();
            for d in &diamonds {
                if !theta.contains(d) {
                    theta.push(d.clone());
                }
            }
            let mut phi_ordered: Vec<Formula> = Vec::new();
            for (l, f) in h.labeled() {
                if let (true, Formula::Dia(a)) = (l.is_crown(), f) {
                    if !phi_ordered.contains(a) {
                        phi_ordered.push((**a).clone());
                    }
                }
            }
            debug_assert_eq!(phi_ordered.len(), phi.len());
            let h = h
                .with(Label::BracketD, theta)
                .with(Label::DoubleD, phi_ordered);
            let c = self.run(InterpolantCall {
                t: true,
                sigma_c: boxdia,
                sequent: h.clone(),
            })?;
            if !c.after_dd_ok {
                self.violated(format!(
                    "a branch above dd on {} does not reach a final, dd, sufficient modal or insufficient call",
                    g.render_verbose()
                ))?;
            }
            let scope: BTreeSet<Label> = h.labels().collect();
            let sep: BTreeSet<Label> = [Label::BracketD, Label::DoubleD].into();
            let rows = self.split(&c.mf, &sep, &scope, false, anchor)?;
            children.push(c);
            let back = |l: Label| {
                renamed
                    .iter()
                    .find(|(new, _)| *new == l)
                    .map_or(l, |(_, old)| *old)
            };
            let disjuncts: Vec<Multiformula> = rows
                .into_iter()
                .map(|(mut cells, rest)| {
                    let delta = cells.remove(&Label::BracketD).expect("separated label");
                    let delta2 = cells.remove(&Label::DoubleD).expect("separated label");
                    self.all(
                        [
                            Multiformula::Labeled(Label::Trunk, self.dia(delta)),
                            Multiformula::Labeled(back(b1), self.dia(delta2)),
                            rest.map_labels(&back),
                        ],
                        anchor,
                    )
                })
                .collect();
            (Step::Doubled, self.any(disjuncts, anchor))
        };

        let mf = match step {
            Step::Propositional | Step::Modal | Step::TrunkSerial | Step::Doubled
                if self.opts.prune =>
            {
                tidy(&mf)
            }
            _ => mf,
        };
        let sufficient = match step {
            Step::Insufficient => false,
            Step::Propositional | Step::Modal => children.iter().all(|c| c.sufficient),
            _ => true,
        };
        let frontier_23 = match step {
            Step::Propositional | Step::Modal => children.iter().fold(0, |m, c| m | c.frontier_23),
            s => s.bit(),
        };
        let after_dd_ok = match step {
            // a direct dd continuation is sufficient by definition; it
            // occurs when a new crown box is already satisfied
            Step::Initial | Step::Insufficient | Step::Doubled => true,
            Step::Propositional => children.iter().all(|c| c.after_dd_ok),
            Step::Modal => {
                sufficient && frontier_23 & !(Step::Initial.bit() | Step::Doubled.bit()) == 0
            }
            _ => false,
        };
        let trace = self.opts.trace.then(|| TraceNode {
            step,
            t,
            sigma_c: sigma_c.len(),
            sequent: g,
            sufficient,
            result: mf.clone(),
            children: children.iter_mut().filter_map(|c| c.trace.take()).collect(),
        });
        Ok(Outcome {
            mf,
            sufficient,
            frontier_23,
            after_dd_ok,
            trace,
        })
    }
}

fn join(items: Vec<Multiformula>, conj: bool) -> Multiformula {
    if conj {
        Multiformula::all_pruned(items, Label::Trunk)
    } else {
        Multiformula::any_pruned(items, Label::Trunk)
    }
}

fn operands(u: &Multiformula, conj: bool) -> Vec<Multiformula> {
    match (u, conj) {
        (Multiformula::All(xs), true) | (Multiformula::Any(xs), false) => xs.clone(),
        _ => vec![u.clone()],
    }
}

/// Cells simplified, same-label siblings folded into one cell and shared
/// operands factored out: `(x ⩛ a) ⩚ (x ⩛ b)` becomes `x ⩛ (a ⩚ b)`.
fn tidy(u: &Multiformula) -> Multiformula {
    match u {
        Multiformula::Labeled(l, phi) => Multiformula::Labeled(*l, simplify_syntactic(phi)),
        Multiformula::All(xs) | Multiformula::Any(xs) => {
            let conj = matches!(u, Multiformula::All(_));
            let joined = join(xs.iter().map(tidy).collect(), conj);
            let items = operands(&joined, conj);
            if items.len() < 2 {
                return joined;
            }
            factor_multi(absorb(merge_cells(items, conj), conj), conj)
        }
    }
}

/// Above this size operands are not compared for absorption.
const ABSORB_LIMIT: usize = 4000;

/// Drops operands implied by (for `⩚`) or implying (for `⩛`) a sibling.
fn absorb(mut items: Vec<Multiformula>, conj: bool) -> Vec<Multiformula> {
    items.sort();
    if items.iter().map(Multiformula::size).sum::<usize>() > ABSORB_LIMIT {
        return items;
    }
    let mut out = Vec::new();
    for (i, x) in items.iter().enumerate() {
        let redundant = items.iter().enumerate().any(|(j, y)| {
            j != i && {
                let (stronger, weaker) = if conj { (y, x) } else { (x, y) };
                m_entails(stronger, weaker) && (j < i || !m_entails(weaker, stronger))
            }
        });
        if !redundant {
            out.push(x.clone());
        }
    }
    out
}

/// Structural `a → b` for multiformulas under any interpretation.
fn m_entails(a: &Multiformula, b: &Multiformula) -> bool {
    use Multiformula::*;
    if a == b {
        return true;
    }
    match (a, b) {
        (Labeled(_, Formula::Bottom), _) | (_, Labeled(_, Formula::Top)) => true,
        (Any(xs), _) => xs.iter().all(|x| m_entails(x, b)),
        (_, All(ys)) => ys.iter().all(|y| m_entails(a, y)),
        _ => {
            if let Any(ys) = b {
                if ys.iter().any(|y| m_entails(a, y)) {
                    return true;
                }
            }
            if let All(xs) = a {
                if xs.iter().any(|x| m_entails(x, b)) {
                    return true;
                }
            }
            matches!((a, b), (Labeled(l, x), Labeled(m, y)) if l == m && entails(x, y))
        }
    }
}

fn merge_cells(items: Vec<Multiformula>, conj: bool) -> Vec<Multiformula> {
    let mut out: Vec<Multiformula> = Vec::new();
    for item in items {
        if let Multiformula::Labeled(l, phi) = &item {
            if let Some(Multiformula::Labeled(_, prev)) = out
                .iter_mut()
                .find(|o| matches!(o, Multiformula::Labeled(m, _) if m == l))
            {
                let both = if conj {
                    Formula::and(prev.clone(), phi.clone())
                } else {
                    Formula::or(prev.clone(), phi.clone())
                };
                *prev = simplify_syntactic(&both);
                continue;
            }
        }
        if !out.contains(&item) {
            out.push(item);
        }
    }
    out
}

fn factor_multi(items: Vec<Multiformula>, conj: bool) -> Multiformula {
    let mut items = items;
    loop {
        let parts: Vec<Vec<Multiformula>> = items.iter().map(|i| operands(i, !conj)).collect();
        let mut best: Option<(&Multiformula, usize)> = None;
        for p in parts.iter().filter(|p| p.len() > 1) {
            for x in p {
                let n = parts.iter().filter(|q| q.len() > 1 && q.contains(x)).count();
                if n >= 2 && best.is_none_or(|(_, m)| n > m) {
                    best = Some((x, n));
                }
            }
        }
        let Some((x, _)) = best else {
            return join(items, conj);
        };
        let x = x.clone();
        let mut rests = Vec::new();
        let mut others = Vec::new();
        for (item, p) in items.into_iter().zip(parts) {
            if p.len() > 1 && p.contains(&x) {
                rests.push(join(p.into_iter().filter(|y| *y != x).collect(), !conj));
            } else {
                others.push(item);
            }
        }
        let inner = tidy(&join(rests, conj));
        others.push(tidy(&join(vec![x, inner], !conj)));
        items = absorb(
            merge_cells(others.iter().flat_map(|o| operands(o, conj)).collect(), conj),
            conj,
        );
    }
}

/// `A_ℓ(t, Σ_c; G)`.
pub fn a_interpolant(
    lit: &Literal,
    call: InterpolantCall,
    opts: InterpolationOptions,
) -> Result<Interpolation, InterpolationError> {
    if !call.sequent.is_l_sequent(FrameClass::K5) {
        return Err(InterpolationError::NotK5Sequent(call.sequent.render_verbose()));
    }
    let mut ctx = Ctx {
        lit,
        opts,
        calls: 0,
    };
    let out = ctx.run(call)?;
    Ok(Interpolation {
        result: out.mf,
        sufficient: out.sufficient,
        trace: out.trace,
        calls: ctx.calls,
    })
}

/// Erases the trunk label: `⩚` becomes `∧` and `⩛` becomes `∨`.
pub fn extract_formula(u: &Multiformula) -> Result<Formula, InterpolationError> {
    Ok(match u {
        Multiformula::Labeled(Label::Trunk, phi) => phi.clone(),
        Multiformula::Labeled(l, _) => return Err(InterpolationError::ForeignLabel(*l)),
        Multiformula::All(xs) => {
            Formula::conj(xs.iter().map(extract_formula).collect::<Result<Vec<_>, _>>()?)
        }
        Multiformula::Any(xs) => {
            Formula::disj(xs.iter().map(extract_formula).collect::<Result<Vec<_>, _>>()?)
        }
    })
}

/// Formulas up to this many nodes also get the prover-checked pass.
pub const SEMANTIC_SIMPLIFY_LIMIT: usize = 60;

/// K5-equivalent, usually smaller formula: syntactic rewrites, then (for
/// small formulas) replacements accepted only if the prover confirms
/// equivalence.
pub fn simplify(phi: &Formula) -> Formula {
    let mut cur = simplify_syntactic(phi);
    if cur.size() > SEMANTIC_SIMPLIFY_LIMIT {
        return cur;
    }
    loop {
        let next = semantic_pass(&cur);
        if next == cur {
            return cur;
        }
        cur = simplify_syntactic(&next);
    }
}

fn equivalent_k5(a: &Formula, b: &Formula) -> bool {
    is_valid(&Formula::iff(a, b), FrameClass::K5)
}

/// Tries, in pre-order, to replace one subformula by `⊤`, `⊥` or one of
/// its operands; returns the first equivalent result, or `phi` itself.
fn semantic_pass(phi: &Formula) -> Formula {
    let n = phi.size();
    for pos in 0..n {
        let target = node_at(phi, pos);
        let mut candidates = vec![Formula::Top, Formula::Bottom];
        if let Formula::And(a, b) | Formula::Or(a, b) = &target {
            candidates.push((**a).clone());
            candidates.push((**b).clone());
        }
        for c in candidates {
            if c == target {
                continue;
            }
            let replaced = replace_at(phi, pos, &c);
            if replaced.size() < n && equivalent_k5(phi, &replaced) {
                return replaced;
            }
        }
    }
    phi.clone()
}

fn node_at(phi: &Formula, pos: usize) -> Formula {
    if pos == 0 {
        return phi.clone();
    }
    match phi {
        Formula::And(a, b) | Formula::Or(a, b) => {
            if pos <= a.size() {
                node_at(a, pos - 1)
            } else {
                node_at(b, pos - 1 - a.size())
            }
        }
        Formula::Box(a) | Formula::Dia(a) => node_at(a, pos - 1),
        _ => unreachable!("position beyond formula"),
    }
}

fn replace_at(phi: &Formula, pos: usize, with: &Formula) -> Formula {
    if pos == 0 {
        return with.clone();
    }
    match phi {
        Formula::And(a, b) | Formula::Or(a, b) => {
            let (na, nb) = if pos <= a.size() {
                (replace_at(a, pos - 1, with), (**b).clone())
            } else {
                ((**a).clone(), replace_at(b, pos - 1 - a.size(), with))
            };
            if matches!(phi, Formula::And(..)) {
                Formula::and(na, nb)
            } else {
                Formula::or(na, nb)
            }
        }
        Formula::Box(a) => Formula::boxed(replace_at(a, pos - 1, with)),
        Formula::Dia(a) => Formula::dia(replace_at(a, pos - 1, with)),
        _ => unreachable!("position beyond formula"),
    }
}

/// Flattening, units and zeros, idempotence, complementary literals,
/// `◇⊥ → ⊥`, `□⊤ → ⊤` and absorption.
pub fn simplify_syntactic(phi: &Formula) -> Formula {
    match phi {
        Formula::Top | Formula::Bottom | Formula::Lit(_) => phi.clone(),
        Formula::Box(a) => match simplify_syntactic(a) {
            Formula::Top => Formula::Top,
            s => Formula::boxed(s),
        },
        Formula::Dia(a) => match simplify_syntactic(a) {
            Formula::Bottom => Formula::Bottom,
            s => Formula::dia(s),
        },
        Formula::And(..) | Formula::Or(..) => {
            let conj = matches!(phi, Formula::And(..));
            let mut ops = Vec::new();
            flatten(phi, conj, &mut ops);
            let ops: Vec<Formula> = ops.iter().map(simplify_syntactic).collect();
            let mut flat = Vec::new();
            for o in &ops {
                flatten(o, conj, &mut flat);
            }
            build_nary(flat, conj)
        }
    }
}

fn flatten(phi: &Formula, conj: bool, out: &mut Vec<Formula>) {
    match (phi, conj) {
        (Formula::And(a, b), true) | (Formula::Or(a, b), false) => {
            flatten(a, conj, out);
            flatten(b, conj, out);
        }
        _ => out.push(phi.clone()),
    }
}

/// `(x ∨ a) ∧ (x ∨ b) = x ∨ (a ∧ b)`, and dually, for the most shared `x`.
fn factor(ops: Vec<Formula>, conj: bool) -> Vec<Formula> {
    let mut ops = ops;
    loop {
        let parts: Vec<Vec<Formula>> = ops
            .iter()
            .map(|o| {
                let mut p = Vec::new();
                flatten(o, !conj, &mut p);
                p
            })
            .collect();
        let mut best: Option<(&Formula, usize)> = None;
        for p in parts.iter().filter(|p| p.len() > 1) {
            for x in p {
                let n = parts.iter().filter(|q| q.len() > 1 && q.contains(x)).count();
                if n >= 2 && best.is_none_or(|(_, m)| n > m) {
                    best = Some((x, n));
                }
            }
        }
        let Some((x, _)) = best else {
            return ops;
        };
        let x = x.clone();
        let mut rest = Vec::new();
        let mut others = Vec::new();
        for (o, p) in ops.into_iter().zip(parts) {
            if p.len() > 1 && p.contains(&x) {
                let remaining: Vec<Formula> = p.into_iter().filter(|y| *y != x).collect();
                rest.push(if conj {
                    Formula::disj(remaining)
                } else {
                    Formula::conj(remaining)
                });
            } else {
                others.push(o);
            }
        }
        let inner = if conj {
            Formula::conj(rest)
        } else {
            Formula::disj(rest)
        };
        let combined = if conj {
            Formula::or(x, inner)
        } else {
            Formula::and(x, inner)
        };
        others.push(simplify_syntactic(&combined));
        ops = others;
    }
}

/// Cheap sound test for `a → b` by structure alone.
pub fn entails(a: &Formula, b: &Formula) -> bool {
    if a == b || *a == Formula::Bottom || *b == Formula::Top {
        return true;
    }
    if let Formula::Or(x, y) = a {
        return entails(x, b) && entails(y, b);
    }
    if let Formula::And(x, y) = b {
        return entails(a, x) && entails(a, y);
    }
    if let Formula::Or(x, y) = b {
        if entails(a, x) || entails(a, y) {
            return true;
        }
    }
    if let Formula::And(x, y) = a {
        if entails(x, b) || entails(y, b) {
            return true;
        }
    }
    match (a, b) {
        (Formula::Box(x), Formula::Box(y)) | (Formula::Dia(x), Formula::Dia(y)) => entails(x, y),
        _ => false,
    }
}

fn build_nary(ops: Vec<Formula>, conj: bool) -> Formula {
    let (unit, zero) = if conj {
        (Formula::Top, Formula::Bottom)
    } else {
        (Formula::Bottom, Formula::Top)
    };
    // □a ∧ □b = □(a ∧ b) and ◇a ∨ ◇b = ◇(a ∨ b)
    let mut merged: Vec<Formula> = Vec::new();
    let mut inner: Vec<Formula> = Vec::new();
    let mut slot = None;
    for o in ops {
        match (&o, conj) {
            (Formula::Box(x), true) | (Formula::Dia(x), false) => {
                slot.get_or_insert(merged.len());
                inner.push((**x).clone());
                if slot == Some(merged.len()) {
                    merged.push(Formula::Top);
                }
            }
            _ => merged.push(o),
        }
    }
    if let Some(i) = slot {
        let body = if inner.len() == 1 {
            inner.pop().expect("one operand")
        } else {
            let mut flat = Vec::new();
            for x in &inner {
                flatten(x, conj, &mut flat);
            }
            build_nary(flat, conj)
        };
        merged[i] = if conj {
            simplify_syntactic(&Formula::boxed(body))
        } else {
            simplify_syntactic(&Formula::dia(body))
        };
    }
    let mut kept: Vec<Formula> = Vec::new();
    for o in merged {
        if o == unit || kept.contains(&o) {
            continue;
        }
        if o == zero {
            return zero;
        }
        kept.push(o);
    }
    let kept = factor(kept, conj);
    // a ∧ b = ⊥ when a → ¬b, a ∨ b = ⊤ when ¬a → b
    for (i, x) in kept.iter().enumerate() {
        let nx = x.negate();
        for y in &kept[i + 1..] {
            let clash = if conj { entails(y, &nx) } else { entails(&nx, y) };
            if clash {
                return zero;
            }
        }
    }
    // drop operands implied by (for ∧) or implying (for ∨) another one
    let mut out: Vec<Formula> = Vec::new();
    for (i, x) in kept.iter().enumerate() {
        let redundant = kept.iter().enumerate().any(|(j, y)| {
            j != i && {
                let (stronger, weaker) = if conj { (y, x) } else { (x, y) };
                entails(stronger, weaker) && (!entails(weaker, stronger) || j < i)
            }
        });
        if !redundant {
            out.push(x.clone());
        }
    }
    out.sort();
    if conj {
        Formula::conj(out)
    } else {
        Formula::disj(out)
    }
}

/// `∀ℓ φ`: the K5 uniform Lyndon interpolant of `φ` with respect to `ℓ`.
pub fn uniform_lyndon_interpolant(phi: &Formula, lit: &Literal) -> Result<Formula, InterpolationError> {
    uniform_lyndon_interpolant_with(phi, lit, InterpolationOptions::default()).map(|(f, _)| f)
}

/// As [`uniform_lyndon_interpolant`], also returning the raw computation.
pub fn uniform_lyndon_interpolant_with(
    phi: &Formula,
    lit: &Literal,
    opts: InterpolationOptions,
) -> Result<(Formula, Interpolation), InterpolationError> {
    let run = a_interpolant(lit, InterpolantCall::root(phi), opts)?;
    let raw = extract_formula(&run.result)?;
    let r = simplify(&raw);
    let allowed: BTreeSet<Literal> = phi.literals().into_iter().filter(|l| l != lit).collect();
    if !r.literals().is_subset(&allowed) {
        return Err(InterpolationError::Postcondition(format!(
            "{r} uses literals outside {allowed:?}"
        )));
    }
    if !is_valid(&Formula::implies(&r, phi.clone()), FrameClass::K5) {
        return Err(InterpolationError::Postcondition(format!("{r} does not imply {phi}")));
    }
    Ok((r, run))
}

/// Logic-checked entry point.
pub fn uniform_lyndon_interpolant_in(
    logic: FrameClass,
    phi: &Formula,
    lit: &Literal,
) -> Result<Formula, InterpolationError> {
    if logic != FrameClass::K5 {
        return Err(InterpolationError::UnsupportedLogic(logic));
    }
    uniform_lyndon_interpolant(phi, lit)
}

/// `∀p φ = ∀p ∀p̄ φ`.
pub fn uniform_interpolant(phi: &Formula, atom: &Atom) -> Result<Formula, InterpolationError> {
    let first = uniform_lyndon_interpolant(phi, &Literal::neg(atom.clone()))?;
    uniform_lyndon_interpolant(&first, &Literal::pos(atom.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(s: &str) -> Formula {
        Formula::parse(s).unwrap()
    }

    fn p() -> Literal {
        Literal::parse("p").unwrap()
    }

    fn equiv(a: &Formula, b: &Formula) -> bool {
        equivalent_k5(a, b)
    }

    #[test]
    fn crown_formula_sets() {
        let g = LayeredSequent::trunk([f("p")]).with(Label::Bracket(1), [f("<>q"), f("r")]);
        let (gc, boxdia) = crown_formulas(&g);
        assert_eq!(gc, [f("<>q"), f("r")].into());
        assert_eq!(boxdia, [f("<>q")].into());
        let (gc, boxdia) = crown_formulas(&LayeredSequent::trunk([f("[]p")]));
        assert!(gc.is_empty() && boxdia.is_empty());
    }

    #[test]
    fn lit_dis_examples() {
        let g = LayeredSequent::trunk([f("~p")]).with(Label::Bracket(1), [f("q")]);
        assert_eq!(lit_dis(&p(), &g).to_string(), "@. : ~p +m+ @.1 : q");
        assert_eq!(
            lit_dis(&p(), &LayeredSequent::trunk([f("p")])),
            Multiformula::bottom(Label::Trunk)
        );
    }

    #[test]
    fn base_step() {
        let run = a_interpolant(
            &p(),
            InterpolantCall::root(&f("q")),
            InterpolationOptions {
                trace: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(run.result, Multiformula::labeled(Label::Trunk, f("q")));
        assert_eq!(run.trace.unwrap().step, Step::Base);
    }

    #[test]
    fn worked_example_leaf_and_result() {
        let phi = f("~p | <><>(p|q)");
        let opts = InterpolationOptions {
            trace: true,
            ..Default::default()
        };
        let run = a_interpolant(&p(), InterpolantCall::root(&phi), opts).unwrap();
        let trace = run.trace.as_ref().unwrap();
        let expected = Multiformula::any(
            [
                Multiformula::labeled(Label::Trunk, f("~p")),
                Multiformula::labeled(Label::Bracket(1), f("q")),
                Multiformula::labeled(Label::BracketD, f("q")),
                Multiformula::labeled(Label::DoubleD, f("q")),
            ],
            Label::Trunk,
        );
        assert!(trace
            .nodes()
            .iter()
            .any(|n| n.step == Step::Insufficient && n.result.equal_modulo_order(&expected)));
        let r = extract_formula(&run.result).unwrap();
        assert!(equiv(&r, &f("~p | <><>q")), "{r}");
        assert!(run.sufficient);
    }

    #[test]
    fn literal_mode_agrees() {
        let phi = f("~p | <><>(p|q)");
        let opts = InterpolationOptions {
            prune: false,
            ..Default::default()
        };
        let run = a_interpolant(&p(), InterpolantCall::root(&phi), opts).unwrap();
        let r = extract_formula(&run.result).unwrap();
        assert!(equiv(&r, &f("~p | <><>q")), "{r}");
    }

    #[test]
    fn uli_examples() {
        assert_eq!(uniform_lyndon_interpolant(&f("q"), &p()).unwrap(), f("q"));
        let r = uniform_lyndon_interpolant(&f("p"), &p()).unwrap();
        assert!(equiv(&r, &Formula::Bottom));
        let r = uniform_lyndon_interpolant(&f("~p | <><>(p|q)"), &p()).unwrap();
        assert!(equiv(&r, &f("~p | <><>q")));
    }

    #[test]
    fn uip_examples() {
        let pa = Atom::new("p").unwrap();
        assert_eq!(uniform_interpolant(&f("q"), &pa).unwrap(), f("q"));
        let r = uniform_interpolant(&f("~p | <><>(p|q)"), &pa).unwrap();
        assert!(!r.atoms().contains(&pa));
        assert!(is_valid(&Formula::implies(&r, f("~p | <><>(p|q)")), FrameClass::K5));
        let r = uniform_interpolant(&f("p"), &pa).unwrap();
        assert!(equiv(&r, &Formula::Bottom));
    }

    #[test]
    fn other_logics_are_rejected() {
        assert_eq!(
            uniform_lyndon_interpolant_in(FrameClass::S5, &f("p"), &p()),
            Err(InterpolationError::UnsupportedLogic(FrameClass::S5))
        );
    }

    #[test]
    fn extraction() {
        let u = Multiformula::all(
            [
                Multiformula::labeled(Label::Trunk, f("a")),
                Multiformula::labeled(Label::Trunk, f("b")),
            ],
            Label::Trunk,
        );
        assert_eq!(extract_formula(&u).unwrap(), f("a & b"));
        assert_eq!(
            extract_formula(&Multiformula::labeled(Label::Bracket(1), f("a"))),
            Err(InterpolationError::ForeignLabel(Label::Bracket(1)))
        );
    }

    #[test]
    fn syntactic_simplification() {
        assert_eq!(simplify_syntactic(&f("a & T")), f("a"));
        assert_eq!(simplify_syntactic(&f("<>F | b")), f("b"));
        assert_eq!(simplify_syntactic(&f("[]T & (a | a)")), f("a"));
        assert_eq!(simplify_syntactic(&f("a & ~a & b")), Formula::Bottom);
        assert_eq!(simplify_syntactic(&f("a & (a | b)")), f("a"));
        assert_eq!(simplify_syntactic(&f("(a | b) & a")), f("a"));
        assert_eq!(simplify_syntactic(&f("a | (b | c) | a")), f("a | b | c"));
    }

    #[test]
    fn simplify_preserves_equivalence() {
        let pre = f("(~p | <>T) & ((~p & <>T) | <>q | <><>q | []F)");
        let s = simplify(&pre);
        assert!(equiv(&pre, &s));
        assert!(s.size() <= pre.size());
        assert!(equiv(&s, &f("~p | <><>q")));
    }
}
