//! Saturation-driven proof search for the layered calculi, with proof
//! objects and countermodel extraction from open saturated leaves.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde_json::{json, Value};
use thiserror::Error;

use crate::formula::Formula;
use crate::kripke::{FrameClass, KripkeModel};
use crate::multiformula::Interpretation;
use crate::sequent::{
    is_saturated, scan_unsaturated, Item, Label, LayeredSequent, Obligation, Scope,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RuleId {
    IdP,
    IdTop,
    And,
    Or,
    BoxT,
    BoxTPrime,
    BoxC,
    BoxCPrime,
    DiaT,
    DiaC,
    DT,
    DC,
    DCPrime,
    T,
}

impl RuleId {
    pub fn name(self) -> &'static str {
        match self {
            RuleId::IdP => "id_P",
            RuleId::IdTop => "id_T",
            RuleId::And => "and",
            RuleId::Or => "or",
            RuleId::BoxT => "Box_t",
            RuleId::BoxTPrime => "Box_t'",
            RuleId::BoxC => "Box_c",
            RuleId::BoxCPrime => "Box_c'",
            RuleId::DiaT => "Dia_t",
            RuleId::DiaC => "Dia_c",
            RuleId::DT => "d_t",
            RuleId::DC => "d_c",
            RuleId::DCPrime => "d_c'",
            RuleId::T => "t",
        }
    }

    /// Whether the calculus for `logic` contains this rule.
    pub fn is_available(self, logic: FrameClass) -> bool {
        use FrameClass::*;
        use RuleId::*;
        match self {
            IdP | IdTop | And | Or | DiaC | T => true,
            BoxT | DiaT => matches!(logic, K5 | KD5 | K45 | KD45),
            BoxTPrime => logic == KB5,
            BoxC => matches!(logic, K45 | KD45 | KB5 | S5),
            BoxCPrime => matches!(logic, K5 | KD5),
            DT => matches!(logic, KD5 | KD45),
            DC => logic == KD45,
            DCPrime => logic == KD5,
        }
    }

    /// The unique rule that discharges `item` in `logic`.
    pub fn for_item(item: &Item, logic: FrameClass) -> RuleId {
        let sigma = item.label;
        match item.obligation {
            Obligation::AndMissing => RuleId::And,
            Obligation::OrMissing => RuleId::Or,
            Obligation::BoxMissing => match (sigma.is_trunk(), logic) {
                (true, FrameClass::KB5) => RuleId::BoxTPrime,
                (true, _) => RuleId::BoxT,
                (false, FrameClass::K5 | FrameClass::KD5) => RuleId::BoxCPrime,
                (false, _) => RuleId::BoxC,
            },
            Obligation::DiaMissing(tau) if tau == sigma => RuleId::T,
            Obligation::DiaMissing(_) if sigma.is_trunk() => RuleId::DiaT,
            Obligation::DiaMissing(_) => RuleId::DiaC,
            Obligation::SerialMissing => match (sigma.is_trunk(), logic) {
                (true, _) => RuleId::DT,
                (false, FrameClass::KD45) => RuleId::DC,
                (false, _) => RuleId::DCPrime,
            },
        }
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProverError {
    #[error("sequent `{sequent}` is not a {logic}-sequent")]
    NotLSequent { sequent: String, logic: FrameClass },
    #[error("no rule of {logic} applies to {label}:{formula} ({obligation})")]
    NotApplicable {
        label: Label,
        formula: Formula,
        obligation: Obligation,
        logic: FrameClass,
    },
    #[error("leaf is not saturated and open: {0}")]
    NotSaturated(String),
    #[error("extracted countermodel fails its check: {0}")]
    BadCountermodel(String),
}

/// One node of a derivation. Only the root carries the full sequent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProofNode {
    pub rule: RuleId,
    pub label: Label,
    pub principal: Formula,
    pub premises: Vec<ProofNode>,
}

impl ProofNode {
    fn to_json(&self) -> Value {
        json!({
            "rule": self.rule.name(),
            "label": self.label.to_string(),
            "principal": self.principal.to_string(),
            "premises": self.premises.iter().map(ProofNode::to_json).collect::<Vec<_>>(),
        })
    }

    fn write_text(&self, depth: usize, out: &mut String) {
        out.push_str(&"  ".repeat(depth));
        out.push_str(&format!("{} @{} : {}\n", self.rule, self.label, self.principal));
        for p in &self.premises {
            p.write_text(depth + 1, out);
        }
    }

    fn visit_rules(&self, out: &mut BTreeSet<RuleId>) {
        out.insert(self.rule);
        for p in &self.premises {
            p.visit_rules(out);
        }
    }

    fn count(&self) -> usize {
        1 + self.premises.iter().map(ProofNode::count).sum::<usize>()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProofTree {
    pub conclusion: LayeredSequent,
    pub root: ProofNode,
}

impl ProofTree {
    pub fn to_json(&self) -> Value {
        self.root.to_json()
    }

    /// One line per inference, `<rule> @<label> : <principal>`, indented by depth.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        self.root.write_text(0, &mut out);
        out
    }

    pub fn rules_used(&self) -> BTreeSet<RuleId> {
        let mut out = BTreeSet::new();
        self.root.visit_rules(&mut out);
        out
    }

    pub fn node_count(&self) -> usize {
        self.root.count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SearchOutcome {
    Proved(ProofTree),
    Refuted(LayeredSequent),
}

impl SearchOutcome {
    pub fn is_proved(&self) -> bool {
        matches!(self, SearchOutcome::Proved(_))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SearchStats {
    /// Sequents visited.
    pub steps: usize,
    /// Largest labeled-formula set seen on any branch.
    pub max_branch: usize,
    /// `s·(N + 2s)` for the input sequent.
    pub bound: usize,
}

/// The termination bound `s·(N + 2s)`.
pub fn branch_bound(g: &LayeredSequent) -> usize {
    let mut subs = BTreeSet::new();
    for (_, phi) in g.labeled() {
        phi.collect_subformulas(&mut subs);
    }
    let s = subs.len();
    s * (g.component_count() + 2 * s)
}

/// Premises of the rule instance discharging `item`.
pub fn apply_rule(
    g: &LayeredSequent,
    item: &Item,
    logic: FrameClass,
) -> Result<Vec<LayeredSequent>, ProverError> {
    let not_applicable = || ProverError::NotApplicable {
        label: item.label,
        formula: item.formula.clone(),
        obligation: item.obligation,
        logic,
    };
    if !g.contains(item.label, &item.formula) {
        return Err(not_applicable());
    }
    let rule = RuleId::for_item(item, logic);
    if !rule.is_available(logic) {
        return Err(not_applicable());
    }
    let sigma = item.label;
    let mut premise = g.clone();
    let changed = match (&item.formula, item.obligation) {
        (Formula::And(a, b), Obligation::AndMissing) => {
            let mut right = g.clone();
            let l = premise.insert(sigma, (**a).clone());
            let r = right.insert(sigma, (**b).clone());
            if !(l && r) {
                return Err(not_applicable());
            }
            return Ok(vec![premise, right]);
        }
        (Formula::Or(a, b), Obligation::OrMissing) => {
            let l = premise.insert(sigma, (**a).clone());
            premise.insert(sigma, (**b).clone()) | l
        }
        (Formula::Box(a), Obligation::BoxMissing) => match rule {
            RuleId::BoxTPrime => {
                let trunk = premise.remove_component(Label::Trunk).unwrap_or_default();
                let keep = premise.fresh_bracket();
                premise = premise.with(keep, trunk);
                let new = premise.fresh_bracket();
                premise.insert(new, (**a).clone())
            }
            RuleId::BoxCPrime => {
                let new = premise.fresh_double();
                premise.insert(new, (**a).clone())
            }
            _ => {
                let new = premise.fresh_bracket();
                premise.insert(new, (**a).clone())
            }
        },
        (Formula::Dia(a), Obligation::DiaMissing(tau)) if g.has_label(tau) => {
            premise.insert(tau, (**a).clone())
        }
        (Formula::Dia(a), Obligation::SerialMissing) => {
            let new = if rule == RuleId::DCPrime {
                premise.fresh_double()
            } else {
                premise.fresh_bracket()
            };
            premise.insert(new, (**a).clone())
        }
        _ => false,
    };
    if !changed {
        return Err(not_applicable());
    }
    Ok(vec![premise])
}

struct Search {
    logic: FrameClass,
    stats: SearchStats,
}

impl Search {
    fn track(&mut self, g: &LayeredSequent) {
        self.stats.steps += 1;
        let size = g.formula_count();
        self.stats.max_branch = self.stats.max_branch.max(size);
        assert!(
            size <= self.stats.bound,
            "branch of {size} labeled formulas exceeds the bound {}",
            self.stats.bound
        );
    }

    /// Depth-first search; recursion happens only at the branching rule.
    fn run(&mut self, mut g: LayeredSequent) -> Result<ProofNode, LayeredSequent> {
        let mut chain: Vec<(RuleId, Label, Formula)> = Vec::new();
        let top = loop {
            self.track(&g);
            if let Some(label) = g.is_closed() {
                break axiom(&g, label);
            }
            let Some(item) = next_item(&g, self.logic) else {
                return Err(g);
            };
            let rule = RuleId::for_item(&item, self.logic);
            let mut premises =
                apply_rule(&g, &item, self.logic).expect("unsaturated item has a rule");
            if premises.len() == 2 {
                let right = premises.pop().expect("two premises");
                let left = premises.pop().expect("two premises");
                let l = self.run(left)?;
                let r = self.run(right)?;
                break ProofNode {
                    rule,
                    label: item.label,
                    principal: item.formula,
                    premises: vec![l, r],
                };
            }
            chain.push((rule, item.label, item.formula));
            g = premises.pop().expect("one premise");
        };
        Ok(chain
            .into_iter()
            .rev()
            .fold(top, |above, (rule, label, principal)| ProofNode {
                rule,
                label,
                principal,
                premises: vec![above],
            }))
    }
}

/// The first unsaturated item whose rule does not branch, else the first
/// item. Rules are cumulative, so work done before a split is shared by
/// both branches.
fn next_item(g: &LayeredSequent, logic: FrameClass) -> Option<Item> {
    let mut branching = None;
    let mut linear = None;
    scan_unsaturated(g, logic, Scope::All, |item| {
        if item.obligation == Obligation::AndMissing {
            branching.get_or_insert(item);
            true
        } else {
            linear = Some(item);
            false
        }
    });
    linear.or(branching)
}

fn axiom(g: &LayeredSequent, label: Label) -> ProofNode {
    let comp = g.component(label).expect("closed label exists");
    let (rule, principal) = if comp.contains(&Formula::Top) {
        (RuleId::IdTop, Formula::Top)
    } else {
        let lit = comp
            .iter()
            .filter_map(Formula::as_literal)
            .find(|l| comp.contains(&Formula::Lit(l.negate())))
            .expect("complementary pair");
        let positive = if lit.positive { lit.clone() } else { lit.negate() };
        (RuleId::IdP, Formula::Lit(positive))
    };
    ProofNode {
        rule,
        label,
        principal,
        premises: Vec::new(),
    }
}

pub fn prove(g: &LayeredSequent, logic: FrameClass) -> Result<SearchOutcome, ProverError> {
    prove_with_stats(g, logic).map(|(o, _)| o)
}

pub fn prove_with_stats(
    g: &LayeredSequent,
    logic: FrameClass,
) -> Result<(SearchOutcome, SearchStats), ProverError> {
    if !g.is_l_sequent(logic) {
        return Err(ProverError::NotLSequent {
            sequent: g.render_verbose(),
            logic,
        });
    }
    let mut search = Search {
        logic,
        stats: SearchStats {
            bound: branch_bound(g),
            ..SearchStats::default()
        },
    };
    let outcome = match search.run(g.clone()) {
        Ok(root) => SearchOutcome::Proved(ProofTree {
            conclusion: g.clone(),
            root,
        }),
        Err(leaf) => SearchOutcome::Refuted(leaf),
    };
    Ok((outcome, search.stats))
}

/// Whether `g` is derivable.
pub fn provable(g: &LayeredSequent, logic: FrameClass) -> Result<bool, ProverError> {
    prove(g, logic).map(|o| o.is_proved())
}

/// The sequent proof search starts from, and the label holding `phi`.
pub fn initial_sequent(phi: &Formula, logic: FrameClass) -> (LayeredSequent, Label) {
    let start = if logic == FrameClass::S5 {
        Label::Bracket(1)
    } else {
        Label::Trunk
    };
    (LayeredSequent::new().with(start, [phi.clone()]), start)
}

/// Builds the model whose worlds are the leaf's labels and checks that it
/// refutes every labeled formula of the leaf.
pub fn countermodel_from_leaf(
    leaf: &LayeredSequent,
    logic: FrameClass,
) -> Result<(KripkeModel, Interpretation), ProverError> {
    if !is_saturated(leaf, logic) || !leaf.is_l_sequent(logic) {
        return Err(ProverError::NotSaturated(leaf.render_verbose()));
    }
    let mut labels: Vec<Label> = leaf.labels().collect();
    // A serial logic needs a successor for the root even when the leaf has
    // no crown; an empty world satisfies nothing the trunk could demand.
    if logic.is_serial() && !labels.iter().any(|l| l.is_bracket()) {
        labels.push(leaf.fresh_bracket());
    }
    let root = labels[0];
    let mut relation = Vec::new();
    for &a in &labels {
        for &b in &labels {
            let edge = if a.is_trunk() {
                b.is_bracket()
            } else {
                b.is_crown()
            };
            if edge {
                relation.push((a.world_id(), b.world_id()));
            }
        }
    }
    let mut valuation: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (label, phi) in leaf.labeled() {
        if let Some(lit) = phi.as_literal().filter(|l| !l.positive) {
            valuation
                .entry(lit.atom.to_string())
                .or_default()
                .push(label.world_id());
        }
    }
    let model = KripkeModel::new(
        labels.iter().map(|l| l.world_id()),
        &root.world_id(),
        relation,
        valuation,
    )
    .map_err(|e| ProverError::BadCountermodel(e.to_string()))?;
    let mut mapping: BTreeMap<Label, String> =
        leaf.labels().map(|l| (l, l.world_id())).collect();
    if !leaf.has_label(Label::Trunk) && logic == FrameClass::KB5 {
        mapping.insert(Label::Trunk, root.world_id());
    }
    let interp = Interpretation::new(&model, mapping)
        .map_err(|e| ProverError::BadCountermodel(e.to_string()))?;
    if !model.is_l_frame(logic) {
        return Err(ProverError::BadCountermodel(format!(
            "not a {logic} frame: {}",
            model.to_json()
        )));
    }
    for (label, phi) in leaf.labeled() {
        let w = interp.world_index(&model, label).expect("label mapped");
        if model.eval_at(w, phi) {
            return Err(ProverError::BadCountermodel(format!(
                "{label}:{phi} holds at {}",
                model.world_name(w)
            )));
        }
    }
    Ok((model, interp))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decision {
    Valid(ProofTree),
    Invalid {
        model: KripkeModel,
        interpretation: Interpretation,
        /// The label the formula was placed at.
        start: Label,
    },
}

impl Decision {
    pub fn is_valid(&self) -> bool {
        matches!(self, Decision::Valid(_))
    }

    /// The world falsifying the formula, for invalid results.
    pub fn refuting_world(&self) -> Option<&str> {
        match self {
            Decision::Valid(_) => None,
            Decision::Invalid {
                interpretation,
                start,
                ..
            } => interpretation.get(*start),
        }
    }
}

pub fn decide(phi: &Formula, logic: FrameClass) -> Decision {
    decide_with_stats(phi, logic).0
}

pub fn decide_with_stats(phi: &Formula, logic: FrameClass) -> (Decision, SearchStats) {
    let (g, start) = initial_sequent(phi, logic);
    let (outcome, stats) = prove_with_stats(&g, logic).expect("initial sequent is an L-sequent");
    let decision = match outcome {
        SearchOutcome::Proved(tree) => Decision::Valid(tree),
        SearchOutcome::Refuted(leaf) => {
            let (model, interpretation) = countermodel_from_leaf(&leaf, logic)
                .unwrap_or_else(|e| panic!("countermodel extraction for {phi} in {logic}: {e}"));
            Decision::Invalid {
                model,
                interpretation,
                start,
            }
        }
    };
    (decision, stats)
}

/// `phi` valid in `logic`.
pub fn is_valid(phi: &Formula, logic: FrameClass) -> bool {
    let (g, _) = initial_sequent(phi, logic);
    provable(&g, logic).expect("initial sequent is an L-sequent")
}
