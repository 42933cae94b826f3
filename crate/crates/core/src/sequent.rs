//! Layered sequents: a trunk, a layer of `[ ]`-components and a layer of
//! `[[ ]]`-components, each tagged with a label.

use std::collections::BTreeMap;
use std::fmt;

use indexmap::IndexSet;

use crate::formula::Formula;
use crate::kripke::FrameClass;

/// Component label. The derived order is the canonical one:
/// `• < •1 < •2 < … < •d < 1 < 2 < … < d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Trunk,
    Bracket(u32),
    BracketD,
    Double(u32),
    DoubleD,
}

impl Label {
    pub fn is_trunk(self) -> bool {
        self == Label::Trunk
    }

    /// `[ ]`-components, including the placeholder `•d`.
    pub fn is_bracket(self) -> bool {
        matches!(self, Label::Bracket(_) | Label::BracketD)
    }

    /// `[[ ]]`-components, including the placeholder `d`.
    pub fn is_double(self) -> bool {
        matches!(self, Label::Double(_) | Label::DoubleD)
    }

    pub fn is_crown(self) -> bool {
        !self.is_trunk()
    }

    /// World id used for this label in extracted countermodels.
    pub fn world_id(self) -> String {
        self.to_string()
    }

    pub fn parse(s: &str) -> Option<Label> {
        let s = s.strip_prefix('@').unwrap_or(s);
        match s {
            "." => Some(Label::Trunk),
            ".d" => Some(Label::BracketD),
            "d" => Some(Label::DoubleD),
            _ => {
                let (bracket, digits) = match s.strip_prefix('.') {
                    Some(rest) => (true, rest),
                    None => (false, s),
                };
                let i: u32 = digits.parse().ok().filter(|&i| i >= 1)?;
                if digits.starts_with('0') || digits.starts_with('+') {
                    return None;
                }
                Some(if bracket { Label::Bracket(i) } else { Label::Double(i) })
            }
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Trunk => f.write_str("."),
            Label::Bracket(i) => write!(f, ".{i}"),
            Label::BracketD => f.write_str(".d"),
            Label::Double(j) => write!(f, "{j}"),
            Label::DoubleD => f.write_str("d"),
        }
    }
}

impl serde::Serialize for Label {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Ordered, duplicate-free formula set of one component.
pub type Component = IndexSet<Formula>;

#[derive(Clone, Default, PartialEq, Eq)]
pub struct LayeredSequent {
    components: BTreeMap<Label, Component>,
}

impl LayeredSequent {
    pub fn new() -> Self {
        Self::default()
    }

    /// A sequent whose only component is the trunk.
    pub fn trunk(formulas: impl IntoIterator<Item = Formula>) -> Self {
        Self::new().with(Label::Trunk, formulas)
    }

    pub fn with(mut self, label: Label, formulas: impl IntoIterator<Item = Formula>) -> Self {
        let comp = self.components.entry(label).or_default();
        comp.extend(formulas);
        self
    }

    /// Adds `phi` to component `label`, creating the component if needed.
    /// Returns whether the sequent changed.
    pub fn insert(&mut self, label: Label, phi: Formula) -> bool {
        self.components.entry(label).or_default().insert(phi)
    }

    pub fn ensure_component(&mut self, label: Label) {
        self.components.entry(label).or_default();
    }

    pub fn component(&self, label: Label) -> Option<&Component> {
        self.components.get(&label)
    }

    pub fn components(&self) -> impl Iterator<Item = (Label, &Component)> {
        self.components.iter().map(|(l, c)| (*l, c))
    }

    pub fn labels(&self) -> impl Iterator<Item = Label> + '_ {
        self.components.keys().copied()
    }

    pub fn has_label(&self, label: Label) -> bool {
        self.components.contains_key(&label)
    }

    pub fn contains(&self, label: Label, phi: &Formula) -> bool {
        self.components.get(&label).is_some_and(|c| c.contains(phi))
    }

    /// All labeled formulas in canonical order.
    pub fn labeled(&self) -> impl Iterator<Item = (Label, &Formula)> {
        self.components
            .iter()
            .flat_map(|(l, c)| c.iter().map(move |f| (*l, f)))
    }

    /// Number of labeled formulas.
    pub fn formula_count(&self) -> usize {
        self.components.values().map(IndexSet::len).sum()
    }

    pub fn component_count(&self) -> usize {
        self.components.len()
    }

    /// `(n, m, k)`: trunk, `[ ]` and `[[ ]]` component counts.
    pub fn shape(&self) -> (usize, usize, usize) {
        let n = usize::from(self.has_label(Label::Trunk));
        let m = self.labels().filter(|l| l.is_bracket()).count();
        let k = self.labels().filter(|l| l.is_double()).count();
        (n, m, k)
    }

    pub fn brackets(&self) -> impl Iterator<Item = (Label, &Component)> {
        self.components().filter(|(l, _)| l.is_bracket())
    }

    pub fn doubles(&self) -> impl Iterator<Item = (Label, &Component)> {
        self.components().filter(|(l, _)| l.is_double())
    }

    pub fn fresh_bracket(&self) -> Label {
        (1..)
            .map(Label::Bracket)
            .find(|l| !self.has_label(*l))
            .expect("unbounded")
    }

    pub fn fresh_double(&self) -> Label {
        (1..)
            .map(Label::Double)
            .find(|l| !self.has_label(*l))
            .expect("unbounded")
    }

    /// Moves component `from` to label `to`. Panics if `to` is occupied.
    pub fn relabel(&mut self, from: Label, to: Label) {
        if from == to {
            return;
        }
        assert!(!self.has_label(to), "relabel target {to} already present");
        if let Some(c) = self.components.remove(&from) {
            self.components.insert(to, c);
        }
    }

    pub fn remove_component(&mut self, label: Label) -> Option<Component> {
        self.components.remove(&label)
    }

    pub fn is_trunk_only(&self) -> bool {
        self.labels().all(Label::is_trunk)
    }

    /// The formula interpretation `⋁Γ ∨ ⋁□⋁Σ ∨ ⋁□□⋁Π`.
    pub fn iota(&self) -> Formula {
        Formula::disj(self.components().map(|(l, c)| {
            let body = Formula::disj(c.iter().cloned());
            match l {
                Label::Trunk => body,
                l if l.is_bracket() => Formula::boxed(body),
                _ => Formula::boxed(Formula::boxed(body)),
            }
        }))
    }

    /// Whether the `(n, m, k)` shape meets the conditions for `logic`.
    pub fn is_l_sequent(&self, logic: FrameClass) -> bool {
        let (n, m, k) = self.shape();
        if k >= 1 && m == 0 {
            return false;
        }
        match logic {
            FrameClass::K5 | FrameClass::KD5 => n >= 1,
            FrameClass::K45 | FrameClass::KD45 => n >= 1 && k == 0,
            FrameClass::KB5 => (n == 0 && m >= 2 && k == 0) || (n == 1 && m == 0 && k == 0),
            FrameClass::S5 => n == 0 && m >= 1 && k == 0,
        }
    }

    /// First label whose component contains `⊤` or a complementary pair.
    pub fn is_closed(&self) -> Option<Label> {
        self.components()
            .find(|(_, c)| component_closed(c))
            .map(|(l, _)| l)
    }

    /// Rendering with explicit labels on crown components, e.g.
    /// `p, []q, [q]@.1, [[r]]@1`.
    pub fn render_verbose(&self) -> String {
        self.render(true)
    }

    fn render(&self, verbose: bool) -> String {
        let mut parts = Vec::new();
        for (l, c) in self.components() {
            let body = c
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join(", ");
            let tag = if verbose { format!("@{l}") } else { String::new() };
            match l {
                Label::Trunk if c.is_empty() => {
                    if verbose {
                        parts.push("@.".to_string())
                    }
                }
                Label::Trunk => parts.push(body),
                l if l.is_bracket() => parts.push(format!("[{body}]{tag}")),
                _ => parts.push(format!("[[{body}]]{tag}")),
            }
        }
        parts.join(", ")
    }
}

pub(crate) fn component_closed(c: &Component) -> bool {
    c.iter().any(|f| match f {
        Formula::Top => true,
        Formula::Lit(l) => c.contains(&Formula::Lit(l.negate())),
        _ => false,
    })
}

impl fmt::Display for LayeredSequent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(false))
    }
}

impl fmt::Debug for LayeredSequent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render_verbose())
    }
}

/// What a labeled formula is missing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Obligation {
    /// Neither conjunct is present.
    AndMissing,
    /// Some disjunct is absent.
    OrMissing,
    /// No component created by the box rule contains the argument.
    BoxMissing,
    /// The argument of a diamond is absent from the given label.
    DiaMissing(Label),
    /// Seriality: some crown component must contain the argument.
    SerialMissing,
}

impl fmt::Display for Obligation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Obligation::AndMissing => f.write_str("and-missing"),
            Obligation::OrMissing => f.write_str("or-missing"),
            Obligation::BoxMissing => f.write_str("box-missing"),
            Obligation::DiaMissing(l) => write!(f, "dia-unsaturated-wrt-@{l}"),
            Obligation::SerialMissing => f.write_str("d-unsaturated"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Item {
    pub label: Label,
    pub formula: Formula,
    pub obligation: Obligation,
}

/// Where the box rule for `σ : □φ` puts its new component.
pub(crate) fn box_creates_double(logic: FrameClass, sigma: Label) -> bool {
    sigma.is_crown() && matches!(logic, FrameClass::K5 | FrameClass::KD5)
}

/// Seriality target for `σ : ◇φ`: `Some(true)` if a `[[ ]]` is required,
/// `Some(false)` for a `[ ]`, `None` if the logic imposes nothing.
pub(crate) fn serial_target(logic: FrameClass, sigma: Label) -> Option<bool> {
    match (logic, sigma.is_trunk()) {
        (FrameClass::KD5 | FrameClass::KD45, true) => Some(false),
        (FrameClass::KD45, false) => Some(false),
        (FrameClass::KD5, false) => Some(true),
        _ => None,
    }
}

/// Which kinds of obligations a scan reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Scope {
    All,
    Propositional,
    Modal,
}

/// Calls `visit` on each unsaturated item in canonical order until it
/// returns `false`.
pub(crate) fn scan_unsaturated(
    g: &LayeredSequent,
    logic: FrameClass,
    scope: Scope,
    mut visit: impl FnMut(Item) -> bool,
) {
    let prop = scope != Scope::Modal;
    let modal = scope != Scope::Propositional;
    for (sigma, comp) in g.components() {
        for phi in comp {
            let mut emit = |obligation| {
                visit(Item {
                    label: sigma,
                    formula: phi.clone(),
                    obligation,
                })
            };
            let keep_going = match phi {
                Formula::And(a, b) if prop => {
                    comp.contains(&**a) || comp.contains(&**b) || emit(Obligation::AndMissing)
                }
                Formula::Or(a, b) if prop => {
                    (comp.contains(&**a) && comp.contains(&**b)) || emit(Obligation::OrMissing)
                }
                Formula::Box(a) if modal => {
                    let double = box_creates_double(logic, sigma);
                    let done = g
                        .components()
                        .any(|(l, c)| l.is_crown() && l.is_double() == double && c.contains(&**a));
                    done || emit(Obligation::BoxMissing)
                }
                Formula::Dia(a) if modal => {
                    let mut go = true;
                    for (tau, c) in g.components() {
                        let needed = match tau {
                            Label::Trunk => false,
                            t if t.is_bracket() => true,
                            _ => sigma.is_crown(),
                        };
                        if needed && !c.contains(&**a) {
                            go = emit(Obligation::DiaMissing(tau));
                            if !go {
                                break;
                            }
                        }
                    }
                    if go {
                        if let Some(double) = serial_target(logic, sigma) {
                            let done = g.components().any(|(l, c)| {
                                l.is_crown() && l.is_double() == double && c.contains(&**a)
                            });
                            if !done {
                                go = emit(Obligation::SerialMissing);
                            }
                        }
                    }
                    go
                }
                _ => true,
            };
            if !keep_going {
                return;
            }
        }
    }
}

/// Every labeled formula violating a saturation clause, in canonical order.
pub fn unsaturated_items(g: &LayeredSequent, logic: FrameClass) -> Vec<Item> {
    let mut out = Vec::new();
    scan_unsaturated(g, logic, Scope::All, |item| {
        out.push(item);
        true
    });
    out
}

pub(crate) fn first_unsaturated(g: &LayeredSequent, logic: FrameClass, scope: Scope) -> Option<Item> {
    let mut found = None;
    scan_unsaturated(g, logic, scope, |item| {
        found = Some(item);
        false
    });
    found
}

/// Saturated in the full sense: no unsaturated item and not closed.
pub fn is_saturated(g: &LayeredSequent, logic: FrameClass) -> bool {
    g.is_closed().is_none() && first_unsaturated(g, logic, Scope::All).is_none()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(s: &str) -> Formula {
        Formula::parse(s).unwrap()
    }

    #[test]
    fn label_order_and_rendering() {
        let mut labels = vec![
            Label::DoubleD,
            Label::Double(2),
            Label::BracketD,
            Label::Bracket(2),
            Label::Double(1),
            Label::Trunk,
            Label::Bracket(1),
        ];
        labels.sort();
        let shown: Vec<String> = labels.iter().map(|l| format!("@{l}")).collect();
        assert_eq!(shown, ["@.", "@.1", "@.2", "@.d", "@1", "@2", "@d"]);
        for l in labels {
            assert_eq!(Label::parse(&format!("@{l}")), Some(l));
        }
        assert_eq!(Label::parse(".0"), None);
        assert_eq!(Label::parse("x"), None);
    }

    #[test]
    fn iota_examples() {
        let g = LayeredSequent::trunk([f("a")])
            .with(Label::Bracket(1), [f("b")])
            .with(Label::Double(1), [f("c")]);
        assert_eq!(g.iota(), f("a | []b | [][]c"));
        assert_eq!(LayeredSequent::trunk([f("p"), f("q")]).iota(), f("p | q"));
        assert_eq!(
            LayeredSequent::new().with(Label::Bracket(1), [f("p")]).iota(),
            f("[]p")
        );
        assert_eq!(LayeredSequent::new().iota(), Formula::Bottom);
    }

    #[test]
    fn sequent_conditions() {
        let g = LayeredSequent::trunk([f("a")])
            .with(Label::Bracket(1), [f("b")])
            .with(Label::Double(1), [f("c")]);
        let ok: Vec<_> = FrameClass::ALL
            .into_iter()
            .filter(|&l| g.is_l_sequent(l))
            .collect();
        assert_eq!(ok, [FrameClass::K5, FrameClass::KD5]);

        let h = LayeredSequent::new()
            .with(Label::Bracket(1), [f("a")])
            .with(Label::Bracket(2), [f("b")]);
        let ok: Vec<_> = FrameClass::ALL
            .into_iter()
            .filter(|&l| h.is_l_sequent(l))
            .collect();
        assert_eq!(ok, [FrameClass::KB5, FrameClass::S5]);

        let empty = LayeredSequent::new();
        assert!(FrameClass::ALL.into_iter().all(|l| !empty.is_l_sequent(l)));
    }

    #[test]
    fn closure() {
        assert_eq!(
            LayeredSequent::trunk([f("p"), f("~p")]).is_closed(),
            Some(Label::Trunk)
        );
        assert_eq!(
            LayeredSequent::trunk([f("q")])
                .with(Label::Bracket(1), [Formula::Top])
                .is_closed(),
            Some(Label::Bracket(1))
        );
        assert_eq!(LayeredSequent::trunk([f("p"), f("~q")]).is_closed(), None);
        // complementary literals in different components do not close
        assert_eq!(
            LayeredSequent::trunk([f("p")])
                .with(Label::Bracket(1), [f("~p")])
                .is_closed(),
            None
        );
    }

    #[test]
    fn unsaturated_examples() {
        let g = LayeredSequent::trunk([f("[]p")]);
        assert_eq!(
            unsaturated_items(&g, FrameClass::K5),
            vec![Item {
                label: Label::Trunk,
                formula: f("[]p"),
                obligation: Obligation::BoxMissing
            }]
        );
        let g = LayeredSequent::trunk([f("~p"), f("<>q")]).with(Label::Bracket(1), [f("q")]);
        assert!(unsaturated_items(&g, FrameClass::K5).is_empty());
        let g = LayeredSequent::trunk([f("<>q")]);
        assert_eq!(
            unsaturated_items(&g, FrameClass::KD5)
                .into_iter()
                .map(|i| i.obligation)
                .collect::<Vec<_>>(),
            [Obligation::SerialMissing]
        );
        assert!(unsaturated_items(&g, FrameClass::K5).is_empty());
    }

    #[test]
    fn diamond_targets_depend_on_position() {
        // trunk diamond ignores doubles, crown diamond does not
        let g = LayeredSequent::trunk([f("<>q")])
            .with(Label::Bracket(1), [f("q"), f("<>r")])
            .with(Label::Double(1), []);
        let items = unsaturated_items(&g, FrameClass::K5);
        let obligations: Vec<_> = items.iter().map(|i| (i.label, i.obligation)).collect();
        assert_eq!(
            obligations,
            [
                (Label::Bracket(1), Obligation::DiaMissing(Label::Bracket(1))),
                (Label::Bracket(1), Obligation::DiaMissing(Label::Double(1))),
            ]
        );
    }

    #[test]
    fn box_target_kind_depends_on_logic() {
        let g = LayeredSequent::trunk([])
            .with(Label::Bracket(1), [f("[]p")])
            .with(Label::Bracket(2), [f("p")]);
        assert_eq!(unsaturated_items(&g, FrameClass::K5).len(), 1);
        assert!(unsaturated_items(&g, FrameClass::K45).is_empty());
    }

    #[test]
    fn insertion_is_idempotent() {
        let mut g = LayeredSequent::trunk([f("p")]);
        assert!(!g.insert(Label::Trunk, f("p")));
        assert_eq!(g.formula_count(), 1);
    }

    #[test]
    fn fresh_labels_fill_gaps() {
        let g = LayeredSequent::trunk([])
            .with(Label::Bracket(2), [])
            .with(Label::BracketD, [])
            .with(Label::Double(1), []);
        assert_eq!(g.fresh_bracket(), Label::Bracket(1));
        assert_eq!(g.fresh_double(), Label::Double(2));
    }

    #[test]
    fn rendering() {
        let g = LayeredSequent::trunk([f("p"), f("[]q")])
            .with(Label::Bracket(1), [f("q")])
            .with(Label::DoubleD, []);
        assert_eq!(g.to_string(), "p, []q, [q], [[]]");
        assert_eq!(g.render_verbose(), "p, []q, [q]@.1, [[]]@d");
    }
}
