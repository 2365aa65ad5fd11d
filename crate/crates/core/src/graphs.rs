//! Partially reflexive graphs: symmetric digraphs where any vertex may carry
//! a self-loop. Distances to loops, structural classification, and the
//! closed-form Q-cores of partially reflexive forests and irreflexive
//! pseudoforests.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use crate::cores::{q_core_bounded, q_result, rule_step, weak, CoreResult};
use crate::error::{Error, Result};
use crate::logic::{model_check, render_formula, Formula, Matrix, Quantifier};
use crate::morphism::find_majority_polymorphism;
use crate::structure::{Signature, Structure, Substructure, Tuple};
use crate::verdict::Budget;

/// A structure with one binary symmetric relation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PRGraph {
    structure: Structure,
    adjacency: Vec<BTreeSet<usize>>,
}

impl PRGraph {
    pub fn new(structure: Structure) -> Result<Self> {
        let sig = structure.signature();
        if sig.len() != 1 || sig.arity(0) != 2 {
            return Err(Error::Precondition(
                "a graph has exactly one binary relation".into(),
            ));
        }
        let mut adjacency = vec![BTreeSet::new(); structure.size()];
        for t in structure.relation(0) {
            if !structure.holds(0, &[t[1], t[0]]) {
                return Err(Error::Precondition(format!(
                    "edge ({},{}) has no reverse",
                    t[0] + 1,
                    t[1] + 1
                )));
            }
            adjacency[t[0]].insert(t[1]);
        }
        Ok(PRGraph {
            structure,
            adjacency,
        })
    }

    pub fn structure(&self) -> &Structure {
        &self.structure
    }

    pub fn size(&self) -> usize {
        self.structure.size()
    }

    pub fn is_looped(&self, v: usize) -> bool {
        self.adjacency[v].contains(&v)
    }

    /// Neighbours other than `v` itself.
    pub fn neighbours(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[v].iter().copied().filter(move |&w| w != v)
    }

    pub fn looped(&self) -> BTreeSet<usize> {
        (0..self.size()).filter(|&v| self.is_looped(v)).collect()
    }

    /// Connected components, each sorted, ordered by least element.
    pub fn components(&self) -> Vec<BTreeSet<usize>> {
        let mut seen = vec![false; self.size()];
        let mut out = Vec::new();
        for s in 0..self.size() {
            if seen[s] {
                continue;
            }
            let mut comp = BTreeSet::new();
            let mut stack = vec![s];
            seen[s] = true;
            while let Some(v) = stack.pop() {
                comp.insert(v);
                for w in self.neighbours(v) {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
            out.push(comp);
        }
        out
    }

    fn is_isolated(&self, v: usize) -> bool {
        self.adjacency[v].is_empty()
    }
}

impl fmt::Display for PRGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.structure.fmt(f)
    }
}

fn graph_signature() -> Signature {
    Signature::digraph()
}

/// The path on `1..=n` with a loop at `i` exactly when `alpha[i]` is `1`.
pub fn make_path(alpha: &str) -> Result<PRGraph> {
    if alpha.is_empty() || alpha.chars().any(|c| c != '0' && c != '1') {
        return Err(Error::Precondition(format!("`{alpha}` is not a non-empty bit string")));
    }
    let n = alpha.len();
    let mut s = Structure::new(graph_signature(), n)?;
    for (i, c) in alpha.chars().enumerate() {
        if c == '1' {
            s.add_tuple(0, vec![i, i])?;
        }
        if i + 1 < n {
            s.add_tuple(0, vec![i, i + 1])?;
            s.add_tuple(0, vec![i + 1, i])?;
        }
    }
    PRGraph::new(s)
}

/// A graph distance that may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Distance {
    Finite(usize),
    Infinite,
}

impl fmt::Display for Distance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Distance::Finite(d) => write!(f, "{d}"),
            Distance::Infinite => f.write_str("inf"),
        }
    }
}

/// Distance from `v` to the nearest looped vertex.
pub fn lambda(t: &PRGraph, v: usize) -> Result<Distance> {
    if v >= t.size() {
        return Err(Error::OutOfRange {
            element: v + 1,
            size: t.size(),
        });
    }
    Ok(distances_to_loops(t)[v])
}

/// The largest [`lambda`] over all vertices.
pub fn lambda_max(t: &PRGraph) -> Distance {
    distances_to_loops(t)
        .into_iter()
        .max()
        .unwrap_or(Distance::Infinite)
}

fn distances_to_loops(t: &PRGraph) -> Vec<Distance> {
    let mut dist = vec![Distance::Infinite; t.size()];
    let mut queue = VecDeque::new();
    for v in t.looped() {
        dist[v] = Distance::Finite(0);
        queue.push_back(v);
    }
    while let Some(v) = queue.pop_front() {
        let Distance::Finite(d) = dist[v] else { unreachable!() };
        for w in t.neighbours(v) {
            if dist[w] == Distance::Infinite {
                dist[w] = Distance::Finite(d + 1);
                queue.push_back(w);
            }
        }
    }
    dist
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphClass {
    pub components: usize,
    pub is_forest: bool,
    pub is_pseudoforest: bool,
    /// Two-colourable; a loop rules this out.
    pub is_bipartite: bool,
    /// Contains a cycle of odd length at least three.
    pub has_odd_cycle: bool,
    pub is_reflexive: bool,
    pub is_irreflexive: bool,
    pub is_loop_connected: bool,
    pub is_quasi_loop_connected: bool,
    /// The looped component reached from every vertex by walks of length
    /// `lambda_max`, when there is one.
    pub maximal_reflexive_subtree: Option<BTreeSet<usize>>,
    pub isolated: BTreeSet<usize>,
}

pub fn classify(t: &PRGraph) -> GraphClass {
    let components = t.components();
    let mut max_rank = 0;
    for comp in &components {
        let edges: usize = comp.iter().map(|&v| t.neighbours(v).count()).sum::<usize>() / 2;
        max_rank = max_rank.max(edges + 1 - comp.len());
    }
    let looped = t.looped();
    let odd = !two_colourable(t);
    let loop_components = induced_components(t, &looped);
    let is_loop_connected = loop_components.len() == 1;
    let (is_quasi, subtree) = if looped.is_empty() {
        (true, None)
    } else {
        match lambda_max(t) {
            Distance::Infinite => (false, None),
            Distance::Finite(l) => {
                let hit = loop_components
                    .iter()
                    .find(|t0| (0..t.size()).all(|v| walk_reaches(t, v, l, t0)));
                (hit.is_some(), hit.cloned())
            }
        }
    };
    GraphClass {
        components: components.len(),
        is_forest: max_rank == 0,
        is_pseudoforest: max_rank <= 1,
        is_bipartite: looped.is_empty() && !odd,
        has_odd_cycle: odd,
        is_reflexive: looped.len() == t.size(),
        is_irreflexive: looped.is_empty(),
        is_loop_connected,
        is_quasi_loop_connected: is_quasi,
        maximal_reflexive_subtree: subtree,
        isolated: (0..t.size()).filter(|&v| t.is_isolated(v)).collect(),
    }
}

/// Two-colourability ignoring loops.
fn two_colourable(t: &PRGraph) -> bool {
    let mut colour: Vec<Option<bool>> = vec![None; t.size()];
    for s in 0..t.size() {
        if colour[s].is_some() {
            continue;
        }
        colour[s] = Some(false);
        let mut stack = vec![s];
        while let Some(v) = stack.pop() {
            let c = colour[v].expect("coloured");
            for w in t.neighbours(v) {
                match colour[w] {
                    None => {
                        colour[w] = Some(!c);
                        stack.push(w);
                    }
                    Some(d) if d == c => return false,
                    _ => {}
                }
            }
        }
    }
    true
}

fn induced_components(t: &PRGraph, vertices: &BTreeSet<usize>) -> Vec<BTreeSet<usize>> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for &s in vertices {
        if !seen.insert(s) {
            continue;
        }
        let mut comp = BTreeSet::from([s]);
        let mut stack = vec![s];
        while let Some(v) = stack.pop() {
            for w in t.neighbours(v).filter(|w| vertices.contains(w)) {
                if seen.insert(w) {
                    comp.insert(w);
                    stack.push(w);
                }
            }
        }
        out.push(comp);
    }
    out
}

/// Is there a walk of exactly `len` steps (loops count as steps) from `v`
/// into `target`?
fn walk_reaches(t: &PRGraph, v: usize, len: usize, target: &BTreeSet<usize>) -> bool {
    let mut frontier = BTreeSet::from([v]);
    for _ in 0..len {
        frontier = frontier
            .iter()
            .flat_map(|&u| t.adjacency[u].iter().copied())
            .collect();
    }
    frontier.iter().any(|u| target.contains(u))
}

/// Which branch of the case analysis produced a Q-core.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphCase {
    Edgeless,
    IrreflexiveNoIsolated,
    IrreflexiveWithIsolated,
    SingleLoop,
    LoopAndIsolated,
    ReflexiveDisconnected,
    IrreflexiveComponent,
    LoopAndPath { lambda: usize },
    LoopConnectedTree,
    QuasiLoopConnectedTree,
    OtherTree,
    OddCycle,
}

impl fmt::Display for GraphCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphCase::Edgeless => f.write_str("edgeless: K1"),
            GraphCase::IrreflexiveNoIsolated => f.write_str("irreflexive without isolated vertices: K2"),
            GraphCase::IrreflexiveWithIsolated => f.write_str("irreflexive with an isolated vertex: K2+K1"),
            GraphCase::SingleLoop => f.write_str("single looped vertex: K1*"),
            GraphCase::LoopAndIsolated => f.write_str("loop and isolated vertex: K1+K1*"),
            GraphCase::ReflexiveDisconnected => f.write_str("reflexive and disconnected: K1*+K1*"),
            GraphCase::IrreflexiveComponent => f.write_str("has an irreflexive component: K2+K1*"),
            GraphCase::LoopAndPath { lambda } => write!(f, "every component looped: K1*+P_10^{lambda}"),
            GraphCase::LoopConnectedTree => f.write_str("loop-connected tree"),
            GraphCase::QuasiLoopConnectedTree => f.write_str("quasi-loop-connected tree"),
            GraphCase::OtherTree => f.write_str("tree that is not quasi-loop-connected"),
            GraphCase::OddCycle => f.write_str("contains an odd cycle"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GraphQCore {
    pub case: GraphCase,
    pub q_core: CoreResult,
    /// Whether the Q-core admits a majority polymorphism.
    pub majority: bool,
    /// For the looped-path case: a sentence false in the input and in the
    /// Q-core, with its one-step-longer variant true in both.
    pub certificate: Option<String>,
}

/// `forall x . exists y1..yk . E(x,y1) & ... & E(y(k-1),yk) & E(yk,yk)`:
/// every vertex reaches a loop by a walk of length `k`.
pub fn walk_to_loop_sentence(k: usize) -> Formula {
    let mut prefix = vec![(Quantifier::Forall, "x".to_string())];
    let names: Vec<String> = std::iter::once("x".to_string())
        .chain((1..=k).map(|i| format!("y{i}")))
        .collect();
    for n in &names[1..] {
        prefix.push((Quantifier::Exists, n.clone()));
    }
    let mut atoms: Vec<Matrix> = names
        .windows(2)
        .map(|w| Matrix::rel("E", &[&w[0], &w[1]]))
        .collect();
    let last = names.last().expect("non-empty");
    atoms.push(Matrix::rel("E", &[last, last]));
    Formula::new(prefix, Matrix::and(atoms)).expect("closed sentence")
}

struct Picker<'a> {
    g: &'a PRGraph,
    elements: BTreeSet<usize>,
    facts: BTreeSet<(usize, Tuple)>,
}

impl<'a> Picker<'a> {
    fn new(g: &'a PRGraph) -> Self {
        Picker {
            g,
            elements: BTreeSet::new(),
            facts: BTreeSet::new(),
        }
    }

    fn vertex(mut self, v: usize) -> Self {
        self.elements.insert(v);
        self
    }

    fn looped(mut self, v: usize) -> Self {
        self.elements.insert(v);
        self.facts.insert((0, vec![v, v]));
        self
    }

    fn edge(mut self, u: usize, v: usize) -> Self {
        self.elements.extend([u, v]);
        self.facts.insert((0, vec![u, v]));
        self.facts.insert((0, vec![v, u]));
        self
    }

    fn build(self) -> Result<Substructure> {
        weak(self.g.structure(), &self.elements, &self.facts)
    }
}

fn first_edge(g: &PRGraph, within: impl Fn(usize) -> bool) -> Option<(usize, usize)> {
    (0..g.size())
        .filter(|&u| within(u))
        .find_map(|u| g.neighbours(u).next().map(|v| (u, v)))
}

fn finish(
    case: GraphCase,
    q: CoreResult,
    certificate: Option<String>,
    budget: &Budget,
) -> Result<GraphQCore> {
    let majority = find_majority_polymorphism(&q.representative.structure, budget)?.is_yes();
    Ok(GraphQCore {
        case,
        q_core: q,
        majority,
        certificate,
    })
}

fn closed_form(g: &PRGraph, case: GraphCase, rep: Substructure) -> CoreResult {
    let whole = Substructure::whole(g.structure());
    let trace = rule_step(whole, rep.clone(), &case.to_string());
    q_result(g.structure(), rep, trace)
}

/// Q-core of a partially reflexive forest by the case analysis on loops,
/// isolated vertices and components; connected trees with loops go
/// through the bounded Q-core search.
pub fn q_core_pr_forest(g: &PRGraph, budget: &Budget) -> Result<GraphQCore> {
    let class = classify(g);
    if !class.is_forest {
        return Err(Error::Precondition("not a partially reflexive forest".into()));
    }
    let looped = g.looped();
    let has_edge = g.structure().tuple_count() > 0;
    let isolated = class.isolated.first().copied();

    if !has_edge {
        let rep = Picker::new(g).vertex(0).build()?;
        return finish(GraphCase::Edgeless, closed_form(g, GraphCase::Edgeless, rep), None, budget);
    }
    if looped.is_empty() {
        let (u, v) = first_edge(g, |_| true).expect("has an edge");
        let (case, rep) = match isolated {
            None => (GraphCase::IrreflexiveNoIsolated, Picker::new(g).edge(u, v).build()?),
            Some(i) => (
                GraphCase::IrreflexiveWithIsolated,
                Picker::new(g).edge(u, v).vertex(i).build()?,
            ),
        };
        return finish(case, closed_form(g, case, rep), None, budget);
    }
    let l0 = *looped.first().expect("has a loop");
    if g.size() == 1 {
        let rep = Picker::new(g).looped(l0).build()?;
        let case = GraphCase::SingleLoop;
        return finish(case, closed_form(g, case, rep), None, budget);
    }
    if let Some(i) = isolated {
        let rep = Picker::new(g).looped(l0).vertex(i).build()?;
        let case = GraphCase::LoopAndIsolated;
        return finish(case, closed_form(g, case, rep), None, budget);
    }
    let components = g.components();
    if components.len() > 1 {
        if class.is_reflexive {
            let other = *components
                .iter()
                .find(|c| !c.contains(&l0))
                .expect("disconnected")
                .first()
                .expect("non-empty");
            let rep = Picker::new(g).looped(l0).looped(other).build()?;
            let case = GraphCase::ReflexiveDisconnected;
            return finish(case, closed_form(g, case, rep), None, budget);
        }
        if let Some(comp) = components.iter().find(|c| c.iter().all(|v| !looped.contains(v))) {
            let (u, v) = first_edge(g, |x| comp.contains(&x)).expect("no isolated vertices");
            let rep = Picker::new(g).edge(u, v).looped(l0).build()?;
            let case = GraphCase::IrreflexiveComponent;
            return finish(case, closed_form(g, case, rep), None, budget);
        }
        return looped_path_case(g, &components, budget);
    }

    let case = if class.is_loop_connected {
        GraphCase::LoopConnectedTree
    } else if class.is_quasi_loop_connected {
        GraphCase::QuasiLoopConnectedTree
    } else {
        GraphCase::OtherTree
    };
    let q = q_core_bounded(g.structure(), budget)?;
    finish(case, q, None, budget)
}

/// Every component has a loop and some vertex is unlooped: the Q-core is a
/// looped vertex beside a path from a loop to a farthest vertex.
fn looped_path_case(g: &PRGraph, components: &[BTreeSet<usize>], budget: &Budget) -> Result<GraphQCore> {
    let dist = distances_to_loops(g);
    let Distance::Finite(lam) = lambda_max(g) else {
        return Err(Error::InvariantViolation("a component without loops".into()));
    };
    let far = (0..g.size())
        .find(|&v| dist[v] == Distance::Finite(lam))
        .expect("maximum is attained");
    // walk back from the far vertex along decreasing distance
    let mut path = vec![far];
    while let Some(&v) = path.last() {
        if dist[v] == Distance::Finite(0) {
            break;
        }
        let next = g
            .neighbours(v)
            .find(|&w| matches!((dist[w], dist[v]), (Distance::Finite(a), Distance::Finite(b)) if a + 1 == b))
            .expect("distance decreases along a shortest path");
        path.push(next);
    }
    let home = components
        .iter()
        .position(|c| c.contains(&far))
        .expect("vertex in a component");
    let other_loop = components
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != home)
        .find_map(|(_, c)| c.iter().copied().find(|&v| g.is_looped(v)))
        .expect("every component is looped");
    let mut picker = Picker::new(g).looped(other_loop).looped(*path.last().expect("non-empty"));
    for w in path.windows(2) {
        picker = picker.edge(w[0], w[1]);
    }
    let rep = picker.build()?;
    let case = GraphCase::LoopAndPath { lambda: lam };

    let short = walk_to_loop_sentence(lam - 1);
    let long = walk_to_loop_sentence(lam);
    for (s, name) in [(g.structure(), "input"), (&rep.structure, "Q-core")] {
        let fails_short = model_check(s, &short, budget)?.truth == Some(false);
        let holds_long = model_check(s, &long, budget)?.truth == Some(true);
        if !(fails_short && holds_long) {
            return Err(Error::InvariantViolation(format!(
                "walk-to-loop certificate does not separate the {name}"
            )));
        }
    }
    let q = closed_form(g, case, rep);
    finish(case, q, Some(render_formula(&short)), budget)
}

/// Q-core of an irreflexive pseudoforest: `K1`, `K2` or `K2+K1` when
/// bipartite; otherwise it keeps an odd cycle and is found by the bounded
/// search.
pub fn classify_irreflexive_pseudoforest(g: &PRGraph, budget: &Budget) -> Result<GraphQCore> {
    let class = classify(g);
    if !class.is_irreflexive || !class.is_pseudoforest {
        return Err(Error::Precondition("not an irreflexive pseudoforest".into()));
    }
    if class.has_odd_cycle {
        let q = q_core_bounded(g.structure(), budget)?;
        return finish(GraphCase::OddCycle, q, None, budget);
    }
    let (case, rep) = match (first_edge(g, |_| true), class.isolated.first()) {
        (None, _) => (GraphCase::Edgeless, Picker::new(g).vertex(0).build()?),
        (Some((u, v)), None) => (GraphCase::IrreflexiveNoIsolated, Picker::new(g).edge(u, v).build()?),
        (Some((u, v)), Some(&i)) => (
            GraphCase::IrreflexiveWithIsolated,
            Picker::new(g).edge(u, v).vertex(i).build()?,
        ),
    };
    finish(case, closed_form(g, case, rep), None, budget)
}
