//! Finite rooted Kripke models for the frame classes of the K5 family.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::{Atom, Formula};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("unknown world '{0}'")]
    UnknownWorld(String),
    #[error("duplicate world '{0}'")]
    DuplicateWorld(String),
    #[error("a model needs at least one world")]
    Empty,
    #[error("invalid atom name '{0}' in valuation")]
    BadAtom(String),
    #[error("malformed model JSON: {0}")]
    Json(String),
    #[error("cannot sample {logic} models: {reason}")]
    ImpossibleShape { logic: FrameClass, reason: String },
}

/// The six logics, in their fixed iteration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FrameClass {
    K5,
    KD5,
    K45,
    KD45,
    KB5,
    S5,
}

impl FrameClass {
    pub const ALL: [FrameClass; 6] = [
        FrameClass::K5,
        FrameClass::KD5,
        FrameClass::K45,
        FrameClass::KD45,
        FrameClass::KB5,
        FrameClass::S5,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FrameClass::K5 => "K5",
            FrameClass::KD5 => "KD5",
            FrameClass::K45 => "K45",
            FrameClass::KD45 => "KD45",
            FrameClass::KB5 => "KB5",
            FrameClass::S5 => "S5",
        }
    }

    /// Serial logics: every world has a successor.
    pub fn is_serial(self) -> bool {
        matches!(self, FrameClass::KD5 | FrameClass::KD45 | FrameClass::S5)
    }

    fn admits(self, shape: Shape) -> bool {
        use FrameClass::*;
        match shape {
            Shape::Single => matches!(self, K5 | K45 | KB5),
            Shape::RootCluster { root_sees_all } => match self {
                K5 | KD5 => true,
                K45 | KD45 => root_sees_all,
                KB5 | S5 => false,
            },
            Shape::Cluster => true,
        }
    }
}

impl fmt::Display for FrameClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FrameClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FrameClass::ALL
            .into_iter()
            .find(|l| l.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown logic '{s}' (expected one of k5, kd5, k45, kd45, kb5, s5)"))
    }
}

/// The three frame shapes a finite rooted Euclidean frame can take.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    /// A single irreflexive root.
    Single,
    /// An irreflexive root seeing part (or all) of a separate cluster.
    RootCluster { root_sees_all: bool },
    /// The whole frame is one cluster.
    Cluster,
}

#[derive(Clone, PartialEq, Eq)]
pub struct KripkeModel {
    worlds: Vec<String>,
    index: HashMap<String, usize>,
    root: usize,
    succ: Vec<Vec<bool>>,
    valuation: BTreeMap<Atom, Vec<bool>>,
}

impl KripkeModel {
    pub fn new<W, P, V>(
        worlds: impl IntoIterator<Item = W>,
        root: &str,
        relation: impl IntoIterator<Item = (P, P)>,
        valuation: impl IntoIterator<Item = (String, V)>,
    ) -> Result<Self, ModelError>
    where
        W: Into<String>,
        P: AsRef<str>,
        V: IntoIterator,
        V::Item: AsRef<str>,
    {
        let worlds: Vec<String> = worlds.into_iter().map(Into::into).collect();
        if worlds.is_empty() {
            return Err(ModelError::Empty);
        }
        let mut index = HashMap::new();
        for (i, w) in worlds.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(ModelError::DuplicateWorld(w.clone()));
            }
        }
        let lookup = |w: &str| {
            index
                .get(w)
                .copied()
                .ok_or_else(|| ModelError::UnknownWorld(w.to_string()))
        };
        let root = lookup(root)?;
        let n = worlds.len();
        let mut succ = vec![vec![false; n]; n];
        for (a, b) in relation {
            succ[lookup(a.as_ref())?][lookup(b.as_ref())?] = true;
        }
        let mut val = BTreeMap::new();
        for (atom, ws) in valuation {
            let atom = Atom::new(&atom).map_err(|_| ModelError::BadAtom(atom.clone()))?;
            let mut truth = vec![false; n];
            for w in ws {
                truth[lookup(w.as_ref())?] = true;
            }
            val.insert(atom, truth);
        }
        Ok(KripkeModel {
            worlds,
            index,
            root,
            succ,
            valuation: val,
        })
    }

    pub fn len(&self) -> usize {
        self.worlds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.worlds.is_empty()
    }

    pub fn worlds(&self) -> &[String] {
        &self.worlds
    }

    pub fn root(&self) -> &str {
        &self.worlds[self.root]
    }

    pub fn root_index(&self) -> usize {
        self.root
    }

    pub fn world_index(&self, w: &str) -> Result<usize, ModelError> {
        self.index
            .get(w)
            .copied()
            .ok_or_else(|| ModelError::UnknownWorld(w.to_string()))
    }

    pub fn world_name(&self, i: usize) -> &str {
        &self.worlds[i]
    }

    pub fn related(&self, a: usize, b: usize) -> bool {
        self.succ[a][b]
    }

    pub fn successors(&self, a: usize) -> impl Iterator<Item = usize> + '_ {
        self.succ[a]
            .iter()
            .enumerate()
            .filter_map(|(i, &e)| e.then_some(i))
    }

    /// Relation pairs as world names, sorted lexicographically.
    pub fn relation(&self) -> Vec<(String, String)> {
        let mut pairs: Vec<(String, String)> = (0..self.len())
            .flat_map(|a| self.successors(a).map(move |b| (a, b)))
            .map(|(a, b)| (self.worlds[a].clone(), self.worlds[b].clone()))
            .collect();
        pairs.sort();
        pairs
    }

    pub fn atoms(&self) -> impl Iterator<Item = &Atom> {
        self.valuation.keys()
    }

    pub fn holds(&self, atom: &Atom, w: usize) -> bool {
        self.valuation.get(atom).is_some_and(|v| v[w])
    }

    /// Truth of `phi` at the world with index `w`.
    pub fn eval_at(&self, w: usize, phi: &Formula) -> bool {
        match phi {
            Formula::Top => true,
            Formula::Bottom => false,
            Formula::Lit(l) => self.holds(&l.atom, w) == l.positive,
            Formula::And(a, b) => self.eval_at(w, a) && self.eval_at(w, b),
            Formula::Or(a, b) => self.eval_at(w, a) || self.eval_at(w, b),
            Formula::Box(a) => self.successors(w).all(|v| self.eval_at(v, a)),
            Formula::Dia(a) => self.successors(w).any(|v| self.eval_at(v, a)),
        }
    }

    pub fn eval(&self, world: &str, phi: &Formula) -> Result<bool, ModelError> {
        Ok(self.eval_at(self.world_index(world)?, phi))
    }

    /// Worlds on which the relation is total, i.e. the cluster of a K5-shaped
    /// model. Empty for the irreflexive singleton.
    pub fn cluster(&self) -> Vec<usize> {
        if self.succ[self.root][self.root] {
            (0..self.len()).collect()
        } else {
            (0..self.len()).filter(|&w| w != self.root).collect()
        }
    }

    /// Classifies the frame, or `None` if it is not one of the three shapes.
    pub fn shape(&self) -> Option<Shape> {
        let n = self.len();
        let r = self.root;
        let all_edges = |ws: &[usize]| ws.iter().all(|&a| ws.iter().all(|&b| self.succ[a][b]));
        if self.succ[r][r] {
            let everything: Vec<usize> = (0..n).collect();
            return all_edges(&everything).then_some(Shape::Cluster);
        }
        if n == 1 {
            return Some(Shape::Single);
        }
        let cluster: Vec<usize> = (0..n).filter(|&w| w != r).collect();
        if !all_edges(&cluster) || cluster.iter().any(|&c| self.succ[c][r]) {
            return None;
        }
        let seen = cluster.iter().filter(|&&c| self.succ[r][c]).count();
        (seen > 0).then_some(Shape::RootCluster {
            root_sees_all: seen == cluster.len(),
        })
    }

    pub fn is_l_frame(&self, logic: FrameClass) -> bool {
        self.shape().is_some_and(|s| logic.admits(s))
    }

    pub(crate) fn add_world(&mut self, name: String, copy_valuation_of: usize) -> usize {
        let n = self.len();
        self.index.insert(name.clone(), n);
        self.worlds.push(name);
        for row in &mut self.succ {
            row.push(false);
        }
        self.succ.push(vec![false; n + 1]);
        for truth in self.valuation.values_mut() {
            let v = truth[copy_valuation_of];
            truth.push(v);
        }
        n
    }

    pub(crate) fn set_edge(&mut self, a: usize, b: usize, present: bool) {
        self.succ[a][b] = present;
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(ModelJson::from(self)).expect("model serializes")
    }

    pub fn to_json(&self) -> String {
        self.to_json_value().to_string()
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let raw: ModelJson =
            serde_json::from_str(text).map_err(|e| ModelError::Json(e.to_string()))?;
        KripkeModel::new(
            raw.worlds,
            &raw.root,
            raw.relation.into_iter().map(|[a, b]| (a, b)),
            raw.valuation,
        )
    }
}

impl fmt::Debug for KripkeModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_json())
    }
}

/// Wire format: `{"relation":[[a,b],..],"root":..,"valuation":{p:[..]},"worlds":[..]}`.
#[derive(Serialize, Deserialize)]
struct ModelJson {
    worlds: Vec<String>,
    root: String,
    relation: Vec<[String; 2]>,
    valuation: BTreeMap<String, Vec<String>>,
}

impl From<&KripkeModel> for ModelJson {
    fn from(m: &KripkeModel) -> Self {
        ModelJson {
            worlds: m.worlds.clone(),
            root: m.root().to_string(),
            relation: m.relation().into_iter().map(|(a, b)| [a, b]).collect(),
            valuation: m
                .valuation
                .iter()
                .map(|(atom, truth)| {
                    let ws = truth
                        .iter()
                        .enumerate()
                        .filter(|(_, &t)| t)
                        .map(|(i, _)| m.worlds[i].clone())
                        .collect();
                    (atom.to_string(), ws)
                })
                .collect(),
        }
    }
}

/// Draws `count` random models of the given frame class. Cluster sizes range
/// over `0..=max_cluster` where the logic allows it; valuations are uniform.
pub fn sample_models(
    logic: FrameClass,
    max_cluster: usize,
    atoms: &BTreeSet<Atom>,
    seed: u64,
    count: usize,
) -> Result<Vec<KripkeModel>, ModelError> {
    let mut shapes: Vec<(usize, bool)> = Vec::new(); // (cluster size, root inside)
    if logic.admits(Shape::Single) {
        shapes.push((0, false));
    }
    for size in 1..=max_cluster {
        if logic.admits(Shape::RootCluster { root_sees_all: true }) {
            shapes.push((size, false));
        }
        shapes.push((size, true));
    }
    if shapes.is_empty() {
        return Err(ModelError::ImpossibleShape {
            logic,
            reason: "max_cluster must be at least 1".into(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let models = (0..count)
        .map(|_| {
            let &(size, root_inside) = shapes.choose(&mut rng).expect("nonempty");
            random_model(logic, size, root_inside, atoms, &mut rng)
        })
        .collect();
    Ok(models)
}

fn random_model(
    logic: FrameClass,
    size: usize,
    root_inside: bool,
    atoms: &BTreeSet<Atom>,
    rng: &mut impl Rng,
) -> KripkeModel {
    let n = if root_inside { size } else { size + 1 };
    let names: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
    let cluster: Vec<usize> = if root_inside {
        (0..n).collect()
    } else {
        (1..n).collect()
    };
    let mut edges = Vec::new();
    for &a in &cluster {
        for &b in &cluster {
            edges.push((names[a].clone(), names[b].clone()));
        }
    }
    if !root_inside && size > 0 {
        let sees_all = matches!(logic, FrameClass::K45 | FrameClass::KD45);
        let mut seen: Vec<usize> = cluster
            .iter()
            .copied()
            .filter(|_| sees_all || rng.gen_bool(0.5))
            .collect();
        if seen.is_empty() {
            seen.push(*cluster.choose(rng).expect("nonempty cluster"));
        }
        for c in seen {
            edges.push((names[0].clone(), names[c].clone()));
        }
    }
    let valuation: Vec<(String, Vec<String>)> = atoms
        .iter()
        .map(|a| {
            let ws = names.iter().filter(|_| rng.gen_bool(0.5)).cloned().collect();
            (a.to_string(), ws)
        })
        .collect();
    let model = KripkeModel::new(names.clone(), &names[0], edges, valuation)
        .expect("generated model is well formed");
    debug_assert!(model.is_l_frame(logic));
    model
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_val() -> Vec<(String, Vec<String>)> {
        Vec::new()
    }

    fn singleton() -> KripkeModel {
        KripkeModel::new(["r"], "r", Vec::<(&str, &str)>::new(), no_val()).unwrap()
    }

    fn root_with_cluster(seen: &[&str]) -> KripkeModel {
        let mut edges = vec![("a", "a"), ("a", "b"), ("b", "a"), ("b", "b")];
        edges.extend(seen.iter().map(|&c| ("r", c)));
        KripkeModel::new(
            ["r", "a", "b"],
            "r",
            edges,
            vec![("p".to_string(), vec!["a"])],
        )
        .unwrap()
    }

    #[test]
    fn vacuous_modalities_at_irreflexive_singleton() {
        let m = singleton();
        assert!(m.eval("r", &Formula::boxed(Formula::Bottom)).unwrap());
        assert!(!m.eval("r", &Formula::dia(Formula::Top)).unwrap());
    }

    #[test]
    fn box_box_sees_across_cluster() {
        let m = root_with_cluster(&["a"]);
        let p = Formula::atom("p");
        assert!(m.eval("r", &Formula::boxed(p.clone())).unwrap());
        assert!(!m.eval("r", &Formula::boxed(Formula::boxed(p))).unwrap());
    }

    #[test]
    fn unknown_world_is_an_error() {
        let m = singleton();
        assert_eq!(
            m.eval("x", &Formula::Top),
            Err(ModelError::UnknownWorld("x".into()))
        );
    }

    #[test]
    fn frame_classes_of_singleton() {
        let m = singleton();
        let admitted: Vec<_> = FrameClass::ALL
            .into_iter()
            .filter(|&l| m.is_l_frame(l))
            .collect();
        assert_eq!(admitted, vec![FrameClass::K5, FrameClass::K45, FrameClass::KB5]);
    }

    #[test]
    fn total_cluster_is_every_frame() {
        let m = KripkeModel::new(
            ["a", "b"],
            "a",
            [("a", "a"), ("a", "b"), ("b", "a"), ("b", "b")],
            no_val(),
        )
        .unwrap();
        assert!(FrameClass::ALL.into_iter().all(|l| m.is_l_frame(l)));
    }

    #[test]
    fn partial_root_edges() {
        let m = root_with_cluster(&["a"]);
        let admitted: Vec<_> = FrameClass::ALL
            .into_iter()
            .filter(|&l| m.is_l_frame(l))
            .collect();
        assert_eq!(admitted, vec![FrameClass::K5, FrameClass::KD5]);
        let full = root_with_cluster(&["a", "b"]);
        assert!(full.is_l_frame(FrameClass::K45) && full.is_l_frame(FrameClass::KD45));
        assert!(!full.is_l_frame(FrameClass::S5));
    }

    #[test]
    fn non_euclidean_frames_rejected() {
        // cluster world pointing back at the root
        let m = KripkeModel::new(
            ["r", "a"],
            "r",
            [("r", "a"), ("a", "a"), ("a", "r")],
            no_val(),
        )
        .unwrap();
        assert!(FrameClass::ALL.into_iter().all(|l| !m.is_l_frame(l)));
        // root disconnected from its cluster
        let m = KripkeModel::new(["r", "a"], "r", [("a", "a")], no_val()).unwrap();
        assert_eq!(m.shape(), None);
    }

    #[test]
    fn sampling_respects_frame_class() {
        let atoms: BTreeSet<Atom> = [Atom::new("p").unwrap()].into();
        let s5 = sample_models(FrameClass::S5, 1, &atoms, 3, 1).unwrap();
        assert_eq!(s5[0].len(), 1);
        assert!(s5[0].related(0, 0));
        let k5 = sample_models(FrameClass::K5, 0, &atoms, 3, 1).unwrap();
        assert_eq!(k5[0].shape(), Some(Shape::Single));
        let pq: BTreeSet<Atom> = ["p", "q"].iter().map(|a| Atom::new(a).unwrap()).collect();
        let kd45 = sample_models(FrameClass::KD45, 2, &pq, 7, 5).unwrap();
        assert_eq!(kd45.len(), 5);
        for m in &kd45 {
            assert!(m.is_l_frame(FrameClass::KD45));
            let root = m.root_index();
            assert!(m.cluster().iter().all(|&c| m.related(root, c)));
        }
        assert!(matches!(
            sample_models(FrameClass::S5, 0, &atoms, 0, 1),
            Err(ModelError::ImpossibleShape { .. })
        ));
    }

    #[test]
    fn sampling_is_deterministic() {
        let atoms: BTreeSet<Atom> = [Atom::new("p").unwrap()].into();
        for logic in FrameClass::ALL {
            let a = sample_models(logic, 3, &atoms, 11, 40).unwrap();
            let b = sample_models(logic, 3, &atoms, 11, 40).unwrap();
            assert_eq!(a, b);
            assert!(a.iter().all(|m| m.is_l_frame(logic)), "{logic}");
        }
    }

    #[test]
    fn json_round_trip_sorts_relation() {
        let m = root_with_cluster(&["b", "a"]);
        let json = m.to_json();
        assert!(json.starts_with(r#"{"relation":[["a","a"],["a","b"],["b","a"],["b","b"],["r","a"],["r","b"]]"#));
        let back = KripkeModel::from_json(&json).unwrap();
        assert_eq!(back.relation(), m.relation());
        assert_eq!(back.root(), "r");
        assert!(matches!(
            KripkeModel::from_json(r#"{"worlds":["a"],"root":"b","relation":[],"valuation":{}}"#),
            Err(ModelError::UnknownWorld(_))
        ));
    }
}
