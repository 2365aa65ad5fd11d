//! Minimal equivalent substructures.
//!
//! * [`core`]: minimal substructure agreeing on primitive positive sentences,
//!   found by repeated retraction.
//! * [`ux_core`]: minimal substructure agreeing on positive equality-free
//!   sentences, found by shrinking a pair of sets `U` (universal play) and
//!   `X` (existential play) under special surjective hypermorphisms.
//! * Q-cores: minimal weak substructures agreeing on positive Horn
//!   sentences. [`q_cores_naive`] returns every minimal one it can decide;
//!   [`q_core_bounded`] interleaves U-X-core computations with guessed
//!   equivalent weak substructures; the remaining functions are fast paths
//!   for special classes.
//!
//! Every result carries the substructure (with its embedding into the
//! input), the evidence of each accepted reduction, and a
//! [`CoreResult::verify`] that re-checks that evidence.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use crate::containment::{
    contains, equivalent, quote, satisfies_canonical_psi, ContainmentWitness, Fragment,
};
use crate::error::{Error, Result};
use crate::logic::{canonical_universal_word, minimal_proper_ph_sentences, render_formula, satisfies_no_proper_ph};
use crate::morphism::{
    find_homomorphism, find_retraction_ordered, find_surjective_hypermorphism,
    find_uxcore_witness, Hypermorphism, Morphism,
};
use crate::structure::{
    canonical_form, enumerate_weak_substructures, induced, isolated_elements, power,
    render_structure, Structure, Substructure, Tuple,
};
use crate::verdict::{Budget, Exhausted, Verdict, VerdictKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CoreKind {
    Core,
    UxCore,
    QCore,
}

impl fmt::Display for CoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CoreKind::Core => "core",
            CoreKind::UxCore => "uxcore",
            CoreKind::QCore => "qcore",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StepKind {
    /// A retraction onto its image.
    Retraction,
    /// One accepted `(U', X')` pair.
    UxReduction,
    /// A smaller induced substructure equivalent under positive
    /// equality-free sentences.
    PefSubstructure,
    /// A complete U-X-core computation.
    UxCore,
    /// A weak substructure equivalent under positive Horn sentences.
    PhSubstructure,
}

impl fmt::Display for StepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StepKind::Retraction => "retraction",
            StepKind::UxReduction => "ux-reduction",
            StepKind::PefSubstructure => "pef-substructure",
            StepKind::UxCore => "ux-core",
            StepKind::PhSubstructure => "ph-substructure",
        })
    }
}

/// Why a reduction step is sound. Maps are expressed in the local labels of
/// the step's `before` and `after` structures.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Evidence {
    /// An idempotent endomorphism of `before` whose image is `after`.
    Retraction(Morphism),
    /// A surjective hypermorphism of `before` with `h(U) = before` whose
    /// images all meet `X`; `after` is induced by `U ∪ X`.
    UxWitness {
        u: BTreeSet<usize>,
        x: BTreeSet<usize>,
        map: Hypermorphism,
    },
    /// Surjective hypermorphisms in both directions.
    PefMaps {
        forward: Hypermorphism,
        backward: Hypermorphism,
    },
    /// Positive Horn containment witnesses in both directions, when they
    /// were computed.
    PhMaps {
        forward: Option<ContainmentWitness>,
        backward: Option<ContainmentWitness>,
    },
    /// A closed-form characterisation was applied.
    Rule(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceStep {
    pub kind: StepKind,
    /// Both sides are weak substructures of the input.
    pub before: Substructure,
    pub after: Substructure,
    pub evidence: Evidence,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoreResult {
    pub kind: CoreKind,
    pub input: Structure,
    pub representative: Substructure,
    /// Final `U` and `X`, as input elements (U-X-cores only).
    pub u: Option<BTreeSet<usize>>,
    pub x: Option<BTreeSet<usize>>,
    /// Evidence relating the input to the representative directly.
    pub witness: Option<Evidence>,
    pub trace: Vec<TraceStep>,
    /// Candidates whose equivalence could not be decided within budget.
    pub undecided: Vec<(Substructure, String)>,
}

/// Output of [`q_cores_naive`].
#[derive(Debug, Clone)]
pub struct NaiveQCores {
    /// Minimal equivalent weak substructures, in enumeration order.
    pub antichain: Vec<CoreResult>,
    pub undecided: Vec<(Substructure, String)>,
}

impl NaiveQCores {
    pub fn is_complete(&self) -> bool {
        self.undecided.is_empty()
    }
}

fn unknown(e: Exhausted) -> Error {
    Error::Unknown {
        explored: e.explored,
        reason: e.reason,
    }
}

fn broken(msg: impl Into<String>) -> Error {
    Error::InvariantViolation(msg.into())
}

fn position(sub: &Substructure, parent_element: usize) -> Option<usize> {
    sub.embedding.iter().position(|&e| e == parent_element)
}

/// `inner` re-expressed as a weak substructure of `outer.structure`.
fn relative(outer: &Substructure, inner: &Substructure) -> Option<Substructure> {
    let embedding = inner
        .embedding
        .iter()
        .map(|&e| position(outer, e))
        .collect::<Option<Vec<_>>>()?;
    Some(Substructure {
        structure: inner.structure.clone(),
        embedding,
    })
}

fn same_weak(a: &Substructure, b: &Substructure) -> bool {
    let sa: BTreeSet<usize> = a.embedding.iter().copied().collect();
    let sb: BTreeSet<usize> = b.embedding.iter().copied().collect();
    sa == sb && a.parent_facts() == b.parent_facts()
}

fn element_set(sub: &Substructure) -> BTreeSet<usize> {
    sub.embedding.iter().copied().collect()
}

fn mask(elems: impl IntoIterator<Item = usize>) -> u64 {
    elems.into_iter().fold(0, |acc, e| acc | 1 << e)
}

/// Renumbers the bits of `m` that lie in `keep` to their positions in it.
fn remap_mask(m: u64, keep: &[usize]) -> u64 {
    keep.iter()
        .enumerate()
        .filter(|&(_, &e)| m >> e & 1 == 1)
        .fold(0, |acc, (i, _)| acc | 1 << i)
}

impl TraceStep {
    fn verify(&self, budget: &Budget) -> Result<()> {
        let before = &self.before.structure;
        let after_local = relative(&self.before, &self.after)
            .ok_or_else(|| broken(format!("{} step leaves its source", self.kind)))?;
        if !after_local.is_contained_in(&Substructure::whole(before)) {
            return Err(broken(format!("{} step is not a weak substructure", self.kind)));
        }
        let after = &self.after.structure;
        let kept: BTreeSet<usize> = after_local.embedding.iter().copied().collect();
        let ok = match &self.evidence {
            Evidence::Retraction(r) => {
                let f = r.check(before, before);
                f.total
                    && f.homomorphism
                    && r.compose(r) == *r
                    && r.image() == kept
                    && after_local.is_induced_in(before)
            }
            Evidence::UxWitness { u, x, map } => {
                let cover = u.iter().fold(0, |acc, &e| acc | map.map[e]);
                let xm = mask(x.iter().copied());
                map.check(before, before).is_surjective_hypermorphism()
                    && cover == mask(0..before.size())
                    && map.map.iter().all(|&m| m & xm != 0)
                    && u.union(x).copied().collect::<BTreeSet<_>>() == kept
                    && after_local.is_induced_in(before)
            }
            Evidence::PefMaps { forward, backward } => {
                forward.check(before, after).is_surjective_hypermorphism()
                    && backward.check(after, before).is_surjective_hypermorphism()
            }
            Evidence::PhMaps { forward, backward } => {
                let f = match forward {
                    Some(w) => w.verify(before, after, budget)?,
                    None => true,
                };
                let b = match backward {
                    Some(w) => w.verify(after, before, budget)?,
                    None => true,
                };
                f && b
            }
            Evidence::Rule(_) => true,
        };
        if ok {
            Ok(())
        } else {
            Err(broken(format!("evidence of a {} step does not check", self.kind)))
        }
    }
}

impl CoreResult {
    /// Re-checks the representative's shape, the direct witness and every
    /// step of the trace.
    pub fn verify(&self, budget: &Budget) -> Result<()> {
        let whole = Substructure::whole(&self.input);
        if !self.representative.is_contained_in(&whole) {
            return Err(broken("representative is not a weak substructure of the input"));
        }
        if self.kind != CoreKind::QCore && !self.representative.is_induced_in(&self.input) {
            return Err(broken("representative is not induced"));
        }
        let mut at = whole.clone();
        for step in &self.trace {
            if !same_weak(&step.before, &at) {
                return Err(broken("trace is not a chain"));
            }
            step.verify(budget)?;
            at = step.after.clone();
        }
        if !same_weak(&at, &self.representative) {
            return Err(broken("trace does not end at the representative"));
        }
        if let Some(w) = &self.witness {
            let direct = TraceStep {
                kind: match self.kind {
                    CoreKind::Core => StepKind::Retraction,
                    CoreKind::UxCore => StepKind::UxCore,
                    CoreKind::QCore => StepKind::PhSubstructure,
                },
                before: whole,
                after: self.representative.clone(),
                evidence: w.clone(),
            };
            direct.verify(budget)?;
        }
        Ok(())
    }

    pub fn size(&self) -> usize {
        self.representative.structure.size()
    }

    /// Text rendering with a fixed field order.
    pub fn render(&self) -> String {
        let mut out = format!("kind: {}\ninput-size: {}\n", self.kind, self.input.size());
        out.push_str("representative:\n");
        out.push_str(&indent(&render_structure(&self.representative.structure)));
        out.push_str(&format!("embedding: {}\n", one_based(&self.representative.embedding)));
        if let Some(u) = &self.u {
            out.push_str(&format!("U: {}\n", one_based(u)));
        }
        if let Some(x) = &self.x {
            out.push_str(&format!("X: {}\n", one_based(x)));
        }
        if let Some(w) = &self.witness {
            out.push_str("witness:\n");
            out.push_str(&indent(&render_evidence(w)));
        }
        out.push_str(&format!("trace: {} step(s)\n", self.trace.len()));
        for (i, s) in self.trace.iter().enumerate() {
            out.push_str(&format!(
                "  {}. {}: {} -> {}\n",
                i + 1,
                s.kind,
                describe(&s.before),
                describe(&s.after)
            ));
            out.push_str(&indent(&indent(&render_evidence(&s.evidence))));
        }
        out.push_str(&format!("undecided: {}\n", self.undecided.len()));
        for (sub, why) in &self.undecided {
            out.push_str(&format!("  {} ({why})\n", describe(sub)));
        }
        out
    }
}

impl CoreResult {
    /// Single-line `key=value` form of [`CoreResult::render`].
    pub fn record(&self) -> String {
        let set = |v: &mut Vec<String>, key: &str, elems: &BTreeSet<usize>| {
            v.push(format!("{key}={}", quote(&one_based(elems))));
        };
        let mut fields = vec![
            format!("kind={}", self.kind),
            format!("input_size={}", self.input.size()),
            format!("size={}", self.size()),
            format!("tuples={}", self.representative.structure.tuple_count()),
            format!("facts={}", quote(&facts(&self.representative.structure))),
            format!("embedding={}", quote(&one_based(&self.representative.embedding))),
            format!("induced={}", self.representative.is_induced_in(&self.input)),
        ];
        if let Some(u) = &self.u {
            set(&mut fields, "u", u);
        }
        if let Some(x) = &self.x {
            set(&mut fields, "x", x);
        }
        let steps: Vec<String> = self
            .trace
            .iter()
            .map(|s| format!("{} {}->{}", s.kind, s.before.structure.size(), s.after.structure.size()))
            .collect();
        fields.push(format!("trace={}", quote(&steps.join(";"))));
        fields.push(format!("undecided={}", self.undecided.len()));
        fields.join(" ")
    }
}

fn facts(s: &Structure) -> String {
    let names = s.signature().symbols();
    let rendered: Vec<String> = s
        .facts()
        .map(|(r, t)| format!("{}({})", names[r].name, one_based(t).replace(' ', ",")))
        .collect();
    rendered.join(" ")
}

fn one_based<'a>(elems: impl IntoIterator<Item = &'a usize>) -> String {
    elems
        .into_iter()
        .map(|e| (e + 1).to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn indent(text: &str) -> String {
    text.lines().map(|l| format!("  {l}\n")).collect()
}

fn describe(sub: &Substructure) -> String {
    format!(
        "{{{}}} with {} tuple(s)",
        one_based(&sub.embedding).replace(' ', ","),
        sub.structure.tuple_count()
    )
}

fn render_evidence(e: &Evidence) -> String {
    match e {
        Evidence::Retraction(r) => r.render(),
        Evidence::UxWitness { u, x, map } => {
            format!("U: {}\nX: {}\n{}", one_based(u), one_based(x), map.render())
        }
        Evidence::PefMaps { forward, backward } => {
            format!("forward:\n{}backward:\n{}", indent(&forward.render()), indent(&backward.render()))
        }
        Evidence::PhMaps { forward, backward } => {
            let side = |w: &Option<ContainmentWitness>| match w {
                Some(ContainmentWitness::PowerMorphism { exponent, .. }) => {
                    format!("surjective homomorphism from power {exponent}")
                }
                Some(ContainmentWitness::Homomorphism(_)) => "homomorphism".to_string(),
                Some(ContainmentWitness::Hypermorphism(_)) => "hypermorphism".to_string(),
                Some(ContainmentWitness::FullRelations) => "full relations".to_string(),
                Some(ContainmentWitness::Chain(links)) => format!("chain of {} containments", links.len()),
                None => "not recorded".to_string(),
            };
            format!("forward: {}\nbackward: {}\n", side(forward), side(backward))
        }
        Evidence::Rule(r) => format!("{r}\n"),
    }
}

// ---------------------------------------------------------------- core

/// The core: retract greedily until no retraction is left.
pub fn core(a: &Structure, budget: &Budget) -> Result<CoreResult> {
    core_with_priority(a, &(0..a.size()).collect::<Vec<_>>(), budget)
}

/// As [`core`], trying to drop elements in the order given by `priority`
/// (a permutation of the input's elements).
pub fn core_with_priority(a: &Structure, priority: &[usize], budget: &Budget) -> Result<CoreResult> {
    let n = a.size();
    let mut seen = priority.to_vec();
    seen.sort_unstable();
    if seen != (0..n).collect::<Vec<_>>() {
        return Err(Error::Precondition("priority must be a permutation of the domain".into()));
    }
    let mut current = Substructure::whole(a);
    let mut total = Morphism::identity(n);
    let mut trace = Vec::new();
    loop {
        let order: Vec<usize> = priority.iter().filter_map(|&p| position(&current, p)).collect();
        match find_retraction_ordered(&current.structure, &order, budget)? {
            Verdict::Yes(r) => {
                let next = current.compose(&induced(&current.structure, &r.image())?);
                total = Morphism {
                    map: total
                        .map
                        .iter()
                        .map(|&y| current.embedding[r.apply(position(&current, y).expect("in image"))])
                        .collect(),
                };
                trace.push(TraceStep {
                    kind: StepKind::Retraction,
                    before: current.clone(),
                    after: next.clone(),
                    evidence: Evidence::Retraction(r),
                });
                current = next;
            }
            Verdict::No(_) => break,
            Verdict::Unknown(e) => return Err(unknown(e)),
        }
    }
    Ok(CoreResult {
        kind: CoreKind::Core,
        input: a.clone(),
        representative: current,
        u: None,
        x: None,
        witness: Some(Evidence::Retraction(total)),
        trace,
        undecided: Vec::new(),
    })
}

// ------------------------------------------------------------- U-X-core

fn nonempty_subsets(set: &BTreeSet<usize>) -> Vec<BTreeSet<usize>> {
    let items: Vec<usize> = set.iter().copied().collect();
    (1u64..1 << items.len())
        .map(|bits| {
            items
                .iter()
                .enumerate()
                .filter(|&(i, _)| bits >> i & 1 == 1)
                .map(|(_, &e)| e)
                .collect()
        })
        .collect()
}

type UxStep = (BTreeSet<usize>, BTreeSet<usize>, Hypermorphism);

/// The first strictly smaller pair `(U', X')` admitting a witness, in order
/// of `|U' ∪ X'|`, then `|U'| + |X'|`, then lexicographically.
fn reduce_pair(
    b: &Structure,
    u: &BTreeSet<usize>,
    x: &BTreeSet<usize>,
    budget: &Budget,
) -> Result<Option<UxStep>> {
    let mut pairs: Vec<(BTreeSet<usize>, BTreeSet<usize>)> = Vec::new();
    let xs = nonempty_subsets(x);
    for u2 in nonempty_subsets(u) {
        for x2 in &xs {
            if u2 != *u || x2 != x {
                pairs.push((u2.clone(), x2.clone()));
            }
        }
    }
    pairs.sort_by_key(|(u2, x2)| {
        (
            u2.union(x2).count(),
            u2.len() + x2.len(),
            u2.iter().copied().collect::<Vec<_>>(),
            x2.iter().copied().collect::<Vec<_>>(),
        )
    });
    for (u2, x2) in pairs {
        match find_uxcore_witness(b, &u2, &x2, budget)? {
            Verdict::Yes(h) => return Ok(Some((u2, x2, h))),
            Verdict::No(_) => {}
            Verdict::Unknown(e) => return Err(unknown(e)),
        }
    }
    Ok(None)
}

/// A proper induced substructure of `b` equivalent to it under positive
/// equality-free sentences, smallest first.
fn reduce_globally(b: &Structure, budget: &Budget) -> Result<Option<(BTreeSet<usize>, Evidence)>> {
    let all: BTreeSet<usize> = (0..b.size()).collect();
    let mut subsets = nonempty_subsets(&all);
    subsets.retain(|s| s.len() < b.size());
    subsets.sort_by_key(|s| (s.len(), s.iter().copied().collect::<Vec<_>>()));
    for s in subsets {
        let sub = induced(b, &s)?.structure;
        let forward = match find_surjective_hypermorphism(b, &sub, budget)? {
            Verdict::Yes(h) => h,
            Verdict::No(_) => continue,
            Verdict::Unknown(e) => return Err(unknown(e)),
        };
        let backward = match find_surjective_hypermorphism(&sub, b, budget)? {
            Verdict::Yes(h) => h,
            Verdict::No(_) => continue,
            Verdict::Unknown(e) => return Err(unknown(e)),
        };
        return Ok(Some((s, Evidence::PefMaps { forward, backward })));
    }
    Ok(None)
}

/// The U-X-core, with the final `U`, `X` and hypermorphisms to and from
/// the input.
pub fn ux_core(a: &Structure, budget: &Budget) -> Result<CoreResult> {
    let n = a.size();
    let mut current = Substructure::whole(a);
    let mut u: BTreeSet<usize> = (0..n).collect();
    let mut x = u.clone();
    let mut forward = Hypermorphism::identity(n);
    let mut backward = Hypermorphism::identity(n);
    let mut trace = Vec::new();
    loop {
        let b = current.structure.clone();
        if let Some((u2, x2, h)) = reduce_pair(&b, &u, &x, budget)? {
            let keep: BTreeSet<usize> = u2.union(&x2).copied().collect();
            let keep_vec: Vec<usize> = keep.iter().copied().collect();
            let next = current.compose(&induced(&b, &keep)?);
            let step_forward = Hypermorphism {
                map: h.map.iter().map(|&m| remap_mask(m, &keep_vec)).collect(),
            };
            let step_backward = Hypermorphism {
                map: keep_vec.iter().map(|&k| h.map[k]).collect(),
            };
            forward = forward.compose(&step_forward);
            backward = step_backward.compose(&backward);
            let relabel = |s: &BTreeSet<usize>| -> BTreeSet<usize> {
                s.iter().map(|e| keep_vec.binary_search(e).expect("kept")).collect()
            };
            let (nu, nx) = (relabel(&u2), relabel(&x2));
            trace.push(TraceStep {
                kind: StepKind::UxReduction,
                before: current.clone(),
                after: next.clone(),
                evidence: Evidence::UxWitness { u: u2, x: x2, map: h },
            });
            current = next;
            u = nu;
            x = nx;
            continue;
        }
        match reduce_globally(&b, budget)? {
            Some((keep, evidence)) => {
                let next = current.compose(&induced(&b, &keep)?);
                if let Evidence::PefMaps { forward: f, backward: g } = &evidence {
                    forward = forward.compose(f);
                    backward = g.compose(&backward);
                }
                trace.push(TraceStep {
                    kind: StepKind::PefSubstructure,
                    before: current.clone(),
                    after: next.clone(),
                    evidence,
                });
                current = next;
                u = (0..keep.len()).collect();
                x = u.clone();
            }
            None => break,
        }
    }
    let lift = |s: &BTreeSet<usize>| s.iter().map(|&e| current.embedding[e]).collect();
    Ok(CoreResult {
        kind: CoreKind::UxCore,
        input: a.clone(),
        u: Some(lift(&u)),
        x: Some(lift(&x)),
        representative: current,
        witness: Some(Evidence::PefMaps { forward, backward }),
        trace,
        undecided: Vec::new(),
    })
}

// --------------------------------------------------------------- Q-cores

/// Every minimal weak substructure equivalent to `a` under positive Horn
/// sentences, by testing candidates smallest first. Supersets of accepted
/// candidates are skipped and verdicts are shared between isomorphic
/// candidates; candidates the budget cannot decide are logged.
pub fn q_cores_naive(a: &Structure, budget: &Budget) -> Result<NaiveQCores> {
    let whole = Substructure::whole(a);
    let mut antichain: Vec<CoreResult> = Vec::new();
    let mut undecided = Vec::new();
    let mut memo: HashMap<Structure, VerdictKind> = HashMap::new();
    for cand in enumerate_weak_substructures(a) {
        if antichain.iter().any(|q| q.representative.is_contained_in(&cand)) {
            continue;
        }
        let key = canonical_form(&cand.structure);
        match memo.get(&key) {
            Some(VerdictKind::No) => continue,
            Some(VerdictKind::Unknown) => {
                undecided.push((cand, "isomorphic to an undecided candidate".to_string()));
                continue;
            }
            _ => {}
        }
        let is_whole = same_weak(&cand, &whole);
        let verdict = if is_whole {
            let id = ContainmentWitness::PowerMorphism {
                exponent: 1,
                morphism: Morphism::identity(a.size()),
            };
            Verdict::Yes((id.clone(), id))
        } else {
            equivalent(Fragment::Ph, a, &cand.structure, budget)?
        };
        memo.insert(key, verdict.kind());
        match verdict {
            Verdict::Yes((forward, backward)) => {
                antichain.retain(|q| !cand.is_contained_in(&q.representative));
                let trace = if is_whole {
                    Vec::new()
                } else {
                    vec![TraceStep {
                        kind: StepKind::PhSubstructure,
                        before: whole.clone(),
                        after: cand.clone(),
                        evidence: Evidence::PhMaps {
                            forward: Some(forward),
                            backward: Some(backward),
                        },
                    }]
                };
                antichain.push(q_result(a, cand, trace));
            }
            Verdict::No(_) => {}
            Verdict::Unknown(e) => undecided.push((cand, e.reason)),
        }
    }
    Ok(NaiveQCores {
        antichain,
        undecided,
    })
}

pub(crate) fn q_result(a: &Structure, representative: Substructure, trace: Vec<TraceStep>) -> CoreResult {
    CoreResult {
        kind: CoreKind::QCore,
        input: a.clone(),
        representative,
        u: None,
        x: None,
        witness: None,
        trace,
        undecided: Vec::new(),
    }
}

fn lift_set(sub: &Substructure, s: &BTreeSet<usize>) -> BTreeSet<usize> {
    s.iter().map(|&e| sub.embedding[e]).collect()
}

fn local_set(sub: &Substructure, s: &BTreeSet<usize>) -> BTreeSet<usize> {
    s.iter().filter_map(|&e| position(sub, e)).collect()
}

enum Candidate {
    Equivalent(Evidence),
    Rejected,
    Undecided(String),
}

/// Decides whether `b` and its weak substructure `d` agree on positive Horn
/// sentences, using canonical sentences with universal variables
/// relativised to `u` and existential ones to `x` (local labels of `b`),
/// and falling back to [`contains`] when those are too large.
fn ph_candidate(
    b: &Structure,
    d: &Structure,
    u: &BTreeSet<usize>,
    x: &BTreeSet<usize>,
    budget: &Budget,
) -> Result<Candidate> {
    match find_homomorphism(b, d, false, budget)? {
        Verdict::No(_) => return Ok(Candidate::Rejected),
        Verdict::Unknown(e) => return Ok(Candidate::Undecided(e.reason)),
        Verdict::Yes(_) => {}
    }
    let (d_in_b, b_in_d) = if d.size() > 1 && b.size() > 1 {
        let m2 = u.len() as u32;
        let m1 = d.size().min(u.len()) as u32;
        let d_in_b = satisfies_canonical_psi(d, b, m2, Some(u), Some(x), budget)?;
        if d_in_b == Some(false) {
            return Ok(Candidate::Rejected);
        }
        let b_in_d = satisfies_canonical_psi(b, d, m1, None, None, budget)?;
        if b_in_d == Some(false) {
            return Ok(Candidate::Rejected);
        }
        (d_in_b, b_in_d)
    } else {
        (None, None)
    };
    let forward = contains(Fragment::Ph, b, d, budget)?;
    let backward = contains(Fragment::Ph, d, b, budget)?;
    let relativised = d_in_b.zip(b_in_d).map(|_| true);
    match (forward, backward) {
        (Verdict::Yes(f), Verdict::Yes(g)) => Ok(Candidate::Equivalent(Evidence::PhMaps {
            forward: Some(f),
            backward: Some(g),
        })),
        (Verdict::No(_), _) | (_, Verdict::No(_)) => {
            if relativised == Some(true) {
                Err(broken(
                    "relativised canonical sentences accept a candidate that containment refutes",
                ))
            } else {
                Ok(Candidate::Rejected)
            }
        }
        (f, g) => {
            if relativised == Some(true) {
                Ok(Candidate::Equivalent(Evidence::PhMaps {
                    forward: f.into_witness(),
                    backward: g.into_witness(),
                }))
            } else {
                Ok(Candidate::Undecided(
                    "positive Horn equivalence undecided within budget".to_string(),
                ))
            }
        }
    }
}

/// One Q-core, computed by alternating U-X-cores with guessed equivalent
/// weak substructures that contain the core of the part induced by `X`.
pub fn q_core_bounded(a: &Structure, budget: &Budget) -> Result<CoreResult> {
    let whole = Substructure::whole(a);
    let mut trace = Vec::new();
    let mut undecided = Vec::new();

    let ux = ux_core(a, budget)?;
    let mut b = ux.representative.clone();
    let mut u = ux.u.clone().expect("ux-core sets");
    let mut x = ux.x.clone().expect("ux-core sets");
    if !same_weak(&b, &whole) {
        trace.push(TraceStep {
            kind: StepKind::UxCore,
            before: whole.clone(),
            after: b.clone(),
            evidence: ux.witness.clone().expect("ux-core witness"),
        });
    }

    'outer: loop {
        let xs = induced(&b.structure, &local_set(&b, &x))?;
        let c = b.compose(&xs.compose(&core(&xs.structure, budget)?.representative));
        let c_local = relative(&b, &c).expect("core lies inside b");
        let (ul, xl) = (local_set(&b, &u), local_set(&b, &x));
        let own = Substructure::whole(&b.structure);
        for d in enumerate_weak_substructures(&b.structure) {
            if same_weak(&d, &own) || !c_local.is_contained_in(&d) {
                continue;
            }
            match ph_candidate(&b.structure, &d.structure, &ul, &xl, budget)? {
                Candidate::Rejected => {}
                Candidate::Undecided(why) => undecided.push((b.compose(&d), why)),
                Candidate::Equivalent(evidence) => {
                    let d_abs = b.compose(&d);
                    trace.push(TraceStep {
                        kind: StepKind::PhSubstructure,
                        before: b.clone(),
                        after: d_abs.clone(),
                        evidence,
                    });
                    let uxd = ux_core(&d.structure, budget)?;
                    let next = d_abs.compose(&uxd.representative);
                    if !same_weak(&next, &d_abs) {
                        trace.push(TraceStep {
                            kind: StepKind::UxCore,
                            before: d_abs.clone(),
                            after: next.clone(),
                            evidence: uxd.witness.clone().expect("ux-core witness"),
                        });
                    }
                    u = lift_set(&d_abs, uxd.u.as_ref().expect("ux-core sets"));
                    x = lift_set(&d_abs, uxd.x.as_ref().expect("ux-core sets"));
                    b = next;
                    continue 'outer;
                }
            }
        }
        break;
    }
    let mut result = q_result(a, b, trace);
    result.undecided = undecided;
    Ok(result)
}

pub(crate) fn rule_step(before: Substructure, after: Substructure, rule: &str) -> Vec<TraceStep> {
    if same_weak(&before, &after) {
        return Vec::new();
    }
    vec![TraceStep {
        kind: StepKind::PhSubstructure,
        before,
        after,
        evidence: Evidence::Rule(rule.to_string()),
    }]
}

/// Q-core of a two-element structure: one of its elements if the structure
/// is equivalent to it, otherwise the structure itself.
pub fn q_core_boolean(a: &Structure, budget: &Budget) -> Result<CoreResult> {
    if a.size() != 2 {
        return Err(Error::Precondition("expected a two-element structure".into()));
    }
    let whole = Substructure::whole(a);
    for e in 0..2 {
        let single = induced(a, &BTreeSet::from([e]))?;
        match equivalent(Fragment::Ph, a, &single.structure, budget)? {
            Verdict::Yes((f, g)) => {
                let trace = vec![TraceStep {
                    kind: StepKind::PhSubstructure,
                    before: whole,
                    after: single.clone(),
                    evidence: Evidence::PhMaps {
                        forward: Some(f),
                        backward: Some(g),
                    },
                }];
                return Ok(q_result(a, single, trace));
            }
            Verdict::No(_) => {}
            Verdict::Unknown(e) => return Err(unknown(e)),
        }
    }
    Ok(q_result(a, whole, Vec::new()))
}

/// Weak substructure on `elements` keeping exactly `facts` (input labels).
pub(crate) fn weak(a: &Structure, elements: &BTreeSet<usize>, facts: &BTreeSet<(usize, Tuple)>) -> Result<Substructure> {
    let embedding: Vec<usize> = elements.iter().copied().collect();
    let mut s = Structure::new(a.signature().clone(), embedding.len())?;
    for (r, t) in facts {
        let local = t
            .iter()
            .map(|e| embedding.binary_search(e).map_err(|_| broken("fact leaves the element set")))
            .collect::<Result<Vec<_>>>()?;
        s.add_tuple(*r, local)?;
    }
    Ok(Substructure {
        structure: s,
        embedding,
    })
}

/// Q-core of a structure over unary predicates only: its core, plus one
/// element carrying exactly the predicates common to all elements when the
/// core alone has a different common part.
pub fn q_core_unary(a: &Structure, budget: &Budget) -> Result<CoreResult> {
    if !a.signature().is_unary() {
        return Err(Error::NotUnary);
    }
    let c = core(a, budget)?.representative;
    let target = canonical_universal_word(a)?;
    let at_core = canonical_universal_word(&c.structure)?;
    let whole = Substructure::whole(a);
    if at_core.bits == target.bits {
        let trace = rule_step(whole, c.clone(), "core with the same universal word");
        return Ok(q_result(a, c, trace));
    }
    let in_core = element_set(&c);
    let extra = (0..a.size())
        .find(|e| !in_core.contains(e))
        .ok_or_else(|| broken("universal words differ but the core is everything"))?;
    let mut facts = c.parent_facts();
    for (r, &bit) in target.bits.iter().enumerate() {
        if bit {
            facts.insert((r, vec![extra]));
        }
    }
    let mut elements = in_core;
    elements.insert(extra);
    let q = weak(a, &elements, &facts)?;
    if canonical_universal_word(&q.structure)?.bits != target.bits {
        return Err(broken("unary Q-core has the wrong universal word"));
    }
    let trace = rule_step(whole, q.clone(), "core plus an element realising the universal word");
    Ok(q_result(a, q, trace))
}

/// Q-core of a structure satisfying no proper positive Horn sentence: its
/// core if a suitable power of the core has an isolated element, otherwise
/// the core plus an isolated element.
pub fn q_core_isolated(a: &Structure, budget: &Budget) -> Result<CoreResult> {
    let report = satisfies_no_proper_ph(a, budget)?;
    if !report.satisfies_none {
        let sentences = minimal_proper_ph_sentences(a.signature());
        let held = report
            .falsifiers
            .iter()
            .position(Option::is_none)
            .map(|i| render_formula(&sentences[i]))
            .unwrap_or_default();
        return Err(Error::Precondition(format!("the structure satisfies {held}")));
    }
    let c = core(a, budget)?.representative;
    let r = a.signature().total_arity().max(1) as u32;
    let whole = Substructure::whole(a);
    if !isolated_elements(&power(&c.structure, r, budget.power_elements)?).is_empty() {
        let trace = rule_step(whole, c.clone(), "core whose power has an isolated element");
        return Ok(q_result(a, c, trace));
    }
    let in_core = element_set(&c);
    let extra = (0..a.size())
        .find(|e| !in_core.contains(e))
        .ok_or_else(|| broken("no element outside the core to isolate"))?;
    let mut elements = in_core;
    elements.insert(extra);
    let q = weak(a, &elements, &c.parent_facts())?;
    if isolated_elements(&power(&q.structure, r, budget.power_elements)?).is_empty() {
        return Err(broken("isolated-element Q-core lacks an isolated element in its power"));
    }
    let trace = rule_step(whole, q.clone(), "core plus an isolated element");
    Ok(q_result(a, q, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::fixture;
    use crate::structure::is_isomorphic;

    fn budget() -> Budget {
        Budget::default()
    }

    fn iso(a: &Structure, b: &Structure) -> bool {
        is_isomorphic(a, b).unwrap().is_some()
    }

    #[test]
    fn cores_of_small_graphs() {
        let k1s = fixture("K1star");
        let r = core(&fixture("P110"), &budget()).unwrap();
        r.verify(&budget()).unwrap();
        assert!(iso(&r.representative.structure, &k1s));
        for g in ["C4", "C6", "2K2", "K2"] {
            let r = core(&fixture(g), &budget()).unwrap();
            r.verify(&budget()).unwrap();
            assert!(iso(&r.representative.structure, &fixture("K2")), "{g}");
        }
        let reversed = core_with_priority(&fixture("C6"), &[5, 4, 3, 2, 1, 0], &budget()).unwrap();
        assert_eq!(reversed.size(), 2);
    }

    #[test]
    fn ux_cores() {
        let r = ux_core(&fixture("P010fix"), &budget()).unwrap();
        r.verify(&budget()).unwrap();
        assert!(iso(&r.representative.structure, &fixture("P01fix")));
        assert_eq!(r.u.as_ref().unwrap().len(), 1);
        assert_eq!(r.x.as_ref().unwrap().len(), 1);
        let k2 = ux_core(&fixture("K2"), &budget()).unwrap();
        assert_eq!(k2.size(), 2);
        assert!(k2.trace.is_empty());
    }

    #[test]
    fn naive_q_cores() {
        let r = q_cores_naive(&fixture("P110"), &budget()).unwrap();
        assert!(r
            .antichain
            .iter()
            .any(|q| iso(&q.representative.structure, &fixture("P01fix"))));
        for q in &r.antichain {
            q.verify(&budget()).unwrap();
        }
        let k2 = q_cores_naive(&fixture("K2"), &budget()).unwrap();
        assert_eq!(k2.antichain.len(), 1);
        assert_eq!(k2.antichain[0].size(), 2);
        let k1 = q_cores_naive(&fixture("K1star"), &budget()).unwrap();
        assert_eq!(k1.antichain.len(), 1);
    }

    #[test]
    fn bounded_q_core() {
        for (name, size) in [("K2", 2), ("K1star", 1), ("P110", 2)] {
            let r = q_core_bounded(&fixture(name), &budget()).unwrap();
            r.verify(&budget()).unwrap();
            assert_eq!(r.size(), size, "{name}");
        }
    }

    #[test]
    fn special_cases() {
        let k2 = q_core_boolean(&fixture("K2"), &budget()).unwrap();
        assert_eq!(k2.size(), 2);
        let k2star = Structure::digraph(2, &[(1, 1), (1, 2), (2, 1), (2, 2)]).unwrap();
        assert_eq!(q_core_boolean(&k2star, &budget()).unwrap().size(), 1);

        let sig = crate::Signature::new([("M1", 1), ("M2", 1)]).unwrap();
        let mut a = Structure::new(sig, 2).unwrap();
        a.add_tuple(0, vec![0]).unwrap();
        let q = q_core_unary(&a, &budget()).unwrap();
        assert_eq!(q.size(), 2);
        q.verify(&budget()).unwrap();

        let q = q_core_isolated(&fixture("2K1"), &budget()).unwrap();
        assert_eq!(q.size(), 1);
        assert!(matches!(
            q_core_isolated(&fixture("K1star"), &budget()),
            Err(Error::Precondition(_))
        ));
    }
}
