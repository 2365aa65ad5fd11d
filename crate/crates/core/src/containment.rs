//! Containment and equivalence of structures with respect to the positive
//! fragments: primitive positive (`pp`), positive Horn (`ph`) and positive
//! equality-free (`pef`), plus full positive logic with equality (`pos`).
//!
//! `contains(f, a, b)` answers whether every sentence of fragment `f` true in
//! `a` is also true in `b`.

use std::cell::RefCell;
use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use crate::cores::{ux_core, Evidence};
use crate::error::{Error, Result};
use crate::logic::{
    canonical_psi, canonical_query, canonical_theta, minimal_proper_ph_sentences, model_check,
    render_formula,
};
use crate::morphism::{
    find_homomorphism, find_surjective_hypermorphism, surjective_from_power_pinned, polymorphisms, Hypermorphism,
    Morphism,
};
use crate::search::{Problem, SearchEnd, MAX_TARGET};
use crate::structure::{
    combinations, is_isomorphic, power, power_coordinates, power_fits, power_index, Structure,
};
use crate::verdict::{Budget, Certificate, Exhausted, Meter, Verdict, VerdictKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Fragment {
    Pp,
    Ph,
    Pef,
    Pos,
}

impl fmt::Display for Fragment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Fragment::Pp => "pp",
            Fragment::Ph => "ph",
            Fragment::Pef => "pef",
            Fragment::Pos => "pos",
        })
    }
}

impl FromStr for Fragment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pp" => Ok(Fragment::Pp),
            "ph" => Ok(Fragment::Ph),
            "pef" => Ok(Fragment::Pef),
            "pos" => Ok(Fragment::Pos),
            other => Err(Error::Precondition(format!("unknown fragment `{other}`"))),
        }
    }
}

/// Evidence for a positive containment answer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ContainmentWitness {
    Homomorphism(Morphism),
    Hypermorphism(Hypermorphism),
    /// A surjective homomorphism from the `exponent`-th power of the source.
    PowerMorphism { exponent: u32, morphism: Morphism },
    /// The source has one element and every relation holding in it is
    /// full in the target.
    FullRelations,
    /// Containments composed left to right, starting at the source.
    Chain(Vec<ChainLink>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainLink {
    pub target: Structure,
    pub witness: ContainmentWitness,
}

impl ContainmentWitness {
    pub fn render(&self) -> String {
        match self {
            ContainmentWitness::Homomorphism(m) => m.render(),
            ContainmentWitness::Hypermorphism(h) => h.render(),
            ContainmentWitness::PowerMorphism { exponent, morphism } => {
                format!("exponent {exponent}\n{}", morphism.render())
            }
            ContainmentWitness::FullRelations => {
                "every relation holding in the one-element source is full in the target\n".into()
            }
            ContainmentWitness::Chain(links) => {
                let mut out = format!("chain of {} containments\n", links.len());
                for (i, l) in links.iter().enumerate() {
                    out.push_str(&format!("step {} into a {}-element structure\n", i + 1, l.target.size()));
                    out.push_str(&l.witness.render());
                }
                out
            }
        }
    }

    pub fn exponent(&self) -> Option<u32> {
        match self {
            ContainmentWitness::PowerMorphism { exponent, .. } => Some(*exponent),
            ContainmentWitness::Chain(links) => links.iter().find_map(|l| l.witness.exponent()),
            _ => None,
        }
    }
}

impl ContainmentWitness {
    /// Re-checks the witness as evidence that `a` is contained in `b`.
    pub fn verify(&self, a: &Structure, b: &Structure, budget: &Budget) -> Result<bool> {
        Ok(match self {
            ContainmentWitness::Homomorphism(m) => {
                let f = m.check(a, b);
                f.total && f.homomorphism
            }
            ContainmentWitness::Hypermorphism(h) => h.check(a, b).is_surjective_hypermorphism(),
            ContainmentWitness::PowerMorphism { exponent, morphism } => {
                let p = power(a, *exponent, budget.power_elements)?;
                let f = morphism.check(&p, b);
                f.total && f.homomorphism && f.surjective
            }
            ContainmentWitness::FullRelations => a.size() == 1 && first_unfilled(a, b).is_none(),
            ContainmentWitness::Chain(links) => {
                let mut at = a;
                for l in links {
                    if !l.witness.verify(at, &l.target, budget)? {
                        return Ok(false);
                    }
                    at = &l.target;
                }
                at == b
            }
        })
    }
}

/// Whether `b` satisfies the canonical positive Horn sentence `psi(a, m)`,
/// optionally with universal and existential variables relativised to
/// subsets of `b`. `None` when the sentence is too large for the budget or
/// the search ran out of nodes.
pub fn satisfies_canonical_psi(
    a: &Structure,
    b: &Structure,
    m: u32,
    universal: Option<&BTreeSet<usize>>,
    existential: Option<&BTreeSet<usize>>,
    budget: &Budget,
) -> Result<Option<bool>> {
    same_signature(a, b)?;
    if m == 0 {
        return Err(Error::Precondition("psi needs at least one universal variable".into()));
    }
    let all: BTreeSet<usize> = (0..b.size()).collect();
    for set in [universal, existential].into_iter().flatten() {
        if set.is_empty() {
            return Err(Error::EmptySubset);
        }
        if let Some(&e) = set.iter().find(|&&e| e >= b.size()) {
            return Err(Error::OutOfRange {
                element: e + 1,
                size: b.size(),
            });
        }
    }
    let mut meter = Meter::new(budget.nodes);
    Ok(
        match psi_relativized(
            a,
            b,
            m,
            universal.unwrap_or(&all),
            existential.unwrap_or(&all),
            false,
            budget,
            &mut meter,
        )? {
            PsiCheck::TooLarge | PsiCheck::OutOfBudget => None,
            PsiCheck::Fails => Some(false),
            PsiCheck::Holds(_) => Some(true),
        },
    )
}

/// Options beyond the budget.
#[derive(Debug, Clone, Copy, Default)]
pub struct CheckOptions {
    /// Also evaluate the canonical-sentence characterisation and require
    /// agreement.
    pub verify: bool,
}

#[derive(Debug, Clone)]
pub struct ContainmentReport {
    pub fragment: Fragment,
    pub verdict: Verdict<ContainmentWitness>,
    pub note: Option<String>,
    /// `Some(true)` when the dual characterisation was evaluated and agreed.
    pub verified: Option<bool>,
}

const TRIVIAL_NOTE: &str = "outside the non-triviality hypothesis (a structure has one element)";

impl ContainmentReport {
    /// One line of `key=value` fields.
    pub fn record(&self) -> String {
        let mut fields = vec![
            format!("fragment={}", self.fragment),
            format!("kind={}", self.verdict.kind()),
        ];
        match &self.verdict {
            Verdict::Yes(w) => {
                if let Some(e) = w.exponent() {
                    fields.push(format!("exponent={e}"));
                }
                fields.push(format!("witness={}", quote(&compact_witness(w))));
            }
            Verdict::No(c) => fields.push(format!("certificate={}", quote(&c.to_string()))),
            Verdict::Unknown(e) => {
                fields.push(format!("explored={}", e.explored));
                fields.push(format!("reason={}", quote(&e.reason)));
            }
        }
        if let Some(v) = self.verified {
            fields.push(format!("verified={v}"));
        }
        if let Some(n) = &self.note {
            fields.push(format!("note={}", quote(n)));
        }
        fields.join(" ")
    }
}

pub(crate) fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

fn compact_witness(w: &ContainmentWitness) -> String {
    w.render().trim_end().replace('\n', ";")
}

fn same_signature(a: &Structure, b: &Structure) -> Result<()> {
    if a.signature() != b.signature() {
        return Err(Error::SignatureMismatch);
    }
    Ok(())
}

/// Does every `fragment` sentence true in `a` hold in `b`?
pub fn contains(
    fragment: Fragment,
    a: &Structure,
    b: &Structure,
    budget: &Budget,
) -> Result<Verdict<ContainmentWitness>> {
    Ok(contains_with(fragment, a, b, budget, CheckOptions::default())?.verdict)
}

pub fn contains_with(
    fragment: Fragment,
    a: &Structure,
    b: &Structure,
    budget: &Budget,
    options: CheckOptions,
) -> Result<ContainmentReport> {
    same_signature(a, b)?;
    let verdict = match fragment {
        Fragment::Pp => find_homomorphism(a, b, false, budget)?.map(ContainmentWitness::Homomorphism),
        Fragment::Pef => find_surjective_hypermorphism(a, b, budget)?
            .map(ContainmentWitness::Hypermorphism),
        Fragment::Ph => contains_ph(a, b, budget)?,
        Fragment::Pos => find_homomorphism(a, b, true, budget)?.map(ContainmentWitness::Homomorphism),
    };
    let note = (fragment == Fragment::Ph && (a.size() == 1 || b.size() == 1))
        .then(|| TRIVIAL_NOTE.to_string());
    let verified = if options.verify {
        dual_check(fragment, a, b, &verdict, budget)?
    } else {
        None
    };
    Ok(ContainmentReport {
        fragment,
        verdict,
        note,
        verified,
    })
}

/// Evaluates the canonical sentence of `a` in `b` when affordable and
/// compares it with `verdict`.
fn dual_check(
    fragment: Fragment,
    a: &Structure,
    b: &Structure,
    verdict: &Verdict<ContainmentWitness>,
    budget: &Budget,
) -> Result<Option<bool>> {
    if verdict.is_unknown() {
        return Ok(None);
    }
    let sentence = match fragment {
        Fragment::Pp => canonical_query(a, &(0..a.size()).collect::<Vec<_>>(), true),
        Fragment::Pef => canonical_theta(a, b.size() as u32, budget),
        Fragment::Ph => canonical_psi(a, b.size() as u32, budget),
        Fragment::Pos => return Ok(None),
    };
    let sentence = match sentence {
        Ok(s) => s,
        Err(Error::BudgetExceeded { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let outcome = model_check(b, &sentence, budget)?;
    match outcome.truth {
        None => Ok(None),
        Some(t) if t == verdict.is_yes() => Ok(Some(true)),
        Some(t) => Err(Error::InvariantViolation(format!(
            "{fragment} containment: search says {}, canonical sentence says {t}",
            verdict.kind()
        ))),
    }
}

/// Exponent bound `|A|^|B|`, if representable.
pub fn ph_bound(a: &Structure, b: &Structure) -> Option<u128> {
    (a.size() as u128).checked_pow(b.size() as u32)
}

/// Positive Horn containment.
///
/// Cheap refutations come first (homomorphism, minimal proper sentences),
/// then small powers, then the canonical `psi` sentences of the source when
/// their power fits the budget, and finally the remaining exponents.
fn contains_ph(a: &Structure, b: &Structure, budget: &Budget) -> Result<Verdict<ContainmentWitness>> {
    if b.size() > MAX_TARGET {
        return Err(Error::BudgetExceeded {
            what: "target elements",
            required: b.size() as u128,
            limit: MAX_TARGET as u128,
        });
    }
    if a.size() == 1 {
        return Ok(match first_unfilled(a, b) {
            None => Verdict::Yes(ContainmentWitness::FullRelations),
            Some(r) => Verdict::No(Certificate::CanonicalSentenceFailure {
                sentence: full_relation_sentence(a, r),
            }),
        });
    }

    match find_homomorphism(a, b, false, budget)? {
        Verdict::No(_) => {
            let q = canonical_query(a, &(0..a.size()).collect::<Vec<_>>(), true)?;
            return Ok(Verdict::No(Certificate::CanonicalSentenceFailure {
                sentence: render_formula(&q),
            }));
        }
        Verdict::Unknown(e) => return Ok(Verdict::Unknown(e)),
        Verdict::Yes(_) => {}
    }

    for s in minimal_proper_ph_sentences(a.signature()) {
        let in_a = model_check(a, &s, budget)?.truth;
        let in_b = model_check(b, &s, budget)?.truth;
        if in_a == Some(true) && in_b == Some(false) {
            return Ok(Verdict::No(Certificate::CanonicalSentenceFailure {
                sentence: render_formula(&s),
            }));
        }
    }

    let mut meter = Meter::new(budget.nodes);
    let early = feasible_exponent(a, b, budget).min(2);
    if let Some(v) = scan_exponents(a, b, 1, early, budget, &mut meter)? {
        return Ok(v);
    }

    let (ra, into_ra) = reduce(a, budget);
    let (rb, into_rb) = reduce(b, budget);
    if ra.size() == a.size() && rb.size() == b.size() {
        return decide_exactly(a, b, early + 1, budget, &mut meter);
    }
    Ok(match decide_exactly(&ra, &rb, 1, budget, &mut meter)? {
        Verdict::Yes(w) => {
            let mut links = Vec::new();
            if let Some((_, f)) = into_ra {
                links.push(ChainLink {
                    target: ra.clone(),
                    witness: ContainmentWitness::Hypermorphism(f),
                });
            }
            links.push(ChainLink {
                target: rb.clone(),
                witness: w,
            });
            if let Some((g, _)) = into_rb {
                links.push(ChainLink {
                    target: b.clone(),
                    witness: ContainmentWitness::Hypermorphism(g),
                });
            }
            Verdict::Yes(ContainmentWitness::Chain(links))
        }
        other => other,
    })
}

/// The U-X-core of `s` with surjective hypermorphisms `(core -> s, s -> core)`,
/// or `s` itself when it does not shrink or the budget runs out.
fn reduce(s: &Structure, budget: &Budget) -> (Structure, Option<(Hypermorphism, Hypermorphism)>) {
    type Entry = (Structure, Option<(Hypermorphism, Hypermorphism)>);
    thread_local! {
        static CACHE: RefCell<HashMap<Structure, Entry>> = RefCell::new(HashMap::new());
    }
    if let Some(hit) = CACHE.with(|c| c.borrow().get(s).cloned()) {
        return hit;
    }
    let entry: Entry = match ux_core(s, budget) {
        Ok(r) if r.size() < s.size() => match r.witness {
            Some(Evidence::PefMaps { forward, backward }) => {
                (r.representative.structure, Some((backward, forward)))
            }
            _ => (s.clone(), None),
        },
        _ => (s.clone(), None),
    };
    CACHE.with(|c| {
        let mut c = c.borrow_mut();
        if c.len() > 4096 {
            c.clear();
        }
        c.insert(s.clone(), entry.clone());
    });
    entry
}

/// The exact part of the positive Horn decision: canonical sentences of the
/// source while their power fits the budget, then the remaining exponents
/// from `from` up to the feasible cap.
fn decide_exactly(
    a: &Structure,
    b: &Structure,
    from: u32,
    budget: &Budget,
    meter: &mut Meter,
) -> Result<Verdict<ContainmentWitness>> {
    if a.size() == 1 {
        return Ok(match first_unfilled(a, b) {
            None => Verdict::Yes(ContainmentWitness::FullRelations),
            Some(r) => Verdict::No(Certificate::CanonicalSentenceFailure {
                sentence: full_relation_sentence(a, r),
            }),
        });
    }
    for m in 1..=b.size() as u32 {
        match psi_holds(a, b, m, budget, meter)? {
            PsiCheck::TooLarge => break,
            PsiCheck::OutOfBudget => {
                return Ok(Verdict::Unknown(
                    meter.exhausted(format!("canonical sentence at m={m}")),
                ))
            }
            PsiCheck::Fails => {
                return Ok(Verdict::No(Certificate::CanonicalSentenceFailure {
                    sentence: format!("psi(source, {m})"),
                }))
            }
            PsiCheck::Holds(witness) => {
                if m as usize == b.size() {
                    let w = witness.expect("full psi carries a witness");
                    let below = w.exponent().map_or(0, |k| k - 1);
                    let cap = feasible_exponent(a, b, budget).min(below);
                    let mut side = Meter::new(budget.nodes / 8);
                    if let Some(v @ Verdict::Yes(_)) = scan_exponents(a, b, from, cap, budget, &mut side)? {
                        return Ok(v);
                    }
                    return Ok(match w.exponent() {
                        Some(k) if k > budget.max_exponent => Verdict::Unknown(Exhausted {
                            explored: meter.spent() + side.spent(),
                            reason: format!(
                                "a witness exists at exponent {k}, above the cap {}",
                                budget.max_exponent
                            ),
                        }),
                        _ => Verdict::Yes(w),
                    });
                }
            }
        }
    }
    let j_cap = feasible_exponent(a, b, budget);
    if let Some(v) = scan_exponents(a, b, from, j_cap, budget, meter)? {
        return Ok(v);
    }
    let bound = ph_bound(a, b);
    match bound {
        Some(bound) if (j_cap as u128) >= bound => {
            Ok(Verdict::No(Certificate::ExhaustionUnderBound { bound }))
        }
        _ => Ok(Verdict::Unknown(Exhausted {
            explored: meter.spent(),
            reason: format!(
                "exponents up to {j_cap} refuted; the bound {} is out of reach",
                bound.map_or("overflow".to_string(), |b| b.to_string())
            ),
        })),
    }
}

/// Upper limit on the number of columns `|A|^|B|`.
const COLUMN_LIMIT: usize = 4096;
/// Upper limit on the unary and on the binary polymorphisms used to close
/// column sets.
const OPERATION_LIMIT: usize = 512;
/// Upper limit on polymorphism applications while closing column sets.
const CLOSURE_WORK: u64 = 1 << 22;

fn cached_columns(a: &Structure, n: usize, budget: &Budget) -> Result<Option<Vec<Vec<usize>>>> {
    type Columns = Option<Vec<Vec<usize>>>;
    thread_local! {
        static CACHE: RefCell<HashMap<(Structure, usize), Columns>> = RefCell::new(HashMap::new());
    }
    let key = (a.clone(), n);
    if let Some(hit) = CACHE.with(|c| c.borrow().get(&key).cloned()) {
        return Ok(hit);
    }
    let columns = essential_columns(a, n, budget)?;
    CACHE.with(|c| {
        let mut c = c.borrow_mut();
        if c.len() > 4096 {
            c.clear();
        }
        c.insert(key, columns.clone());
    });
    Ok(columns)
}

/// A set of columns of `A^n` generating all of `A^n` under the
/// polymorphisms of `a` applied coordinatewise.
///
/// If `a^j -> b` is a surjective homomorphism with `p_i` a preimage of the
/// `i`-th element of `b`, read the coordinates of `p_1..p_n` as columns.
/// Adding a coordinate keeps a surjective homomorphism (compose with a
/// projection). A coordinate whose column is `t(d_1..d_r)` for a
/// polymorphism `t` and kept columns `d_i` can be dropped, because
/// recomputing it through `t` is a homomorphism from the smaller power back
/// into the larger one. So a surjective homomorphism from some power exists
/// exactly when one exists from the power indexed by a generating set,
/// sending the element whose coordinates spell out position `i` of the
/// columns to element `i`.
///
/// Only a bounded number of unary and binary polymorphisms and a bounded
/// amount of closure work are used, which can make the set larger than
/// needed but never wrong. `None` when there are too many columns.
fn essential_columns(a: &Structure, n: usize, budget: &Budget) -> Result<Option<Vec<Vec<usize>>>> {
    let size = a.size();
    let Some(count) = (size as u128).checked_pow(n as u32).filter(|&c| c <= COLUMN_LIMIT as u128) else {
        return Ok(None);
    };
    let count = count as usize;
    let unary: Vec<Vec<usize>> = polymorphisms(a, 1, OPERATION_LIMIT, budget)?
        .into_iter()
        .map(|m| m.map)
        .filter(|t| t.iter().enumerate().any(|(x, &y)| x != y))
        .collect();
    let binary: Vec<Vec<usize>> = polymorphisms(a, 2, OPERATION_LIMIT, budget)?
        .into_iter()
        .map(|m| m.map)
        .filter(|t| {
            let first = (0..size * size).all(|i| t[i] == i / size);
            let second = (0..size * size).all(|i| t[i] == i % size);
            !first && !second
        })
        .collect();
    let columns: Vec<Vec<usize>> = (0..count).map(|i| power_coordinates(size, n, i)).collect();
    let order = if unary.len() + 1 < OPERATION_LIMIT {
        maximal_columns(size, &columns, &unary)
    } else {
        let distinct = |c: &Vec<usize>| c.iter().collect::<BTreeSet<_>>().len();
        let mut order: Vec<usize> = (0..count).collect();
        order.sort_by_key(|&i| std::cmp::Reverse(distinct(&columns[i])));
        order
    };

    let closure = Closure {
        size,
        columns: &columns,
        unary: &unary,
        binary: &binary,
    };
    let mut chosen = closure.greedy(&order);
    for k in (0..chosen.len()).rev() {
        let mut rest = chosen.clone();
        rest.remove(k);
        if closure.generates(&rest) {
            chosen = rest;
        }
    }
    Ok(Some(chosen.into_iter().map(|c| columns[c].clone()).collect()))
}

/// Closure of column sets under coordinatewise polymorphisms.
struct Closure<'a> {
    size: usize,
    columns: &'a [Vec<usize>],
    unary: &'a [Vec<usize>],
    binary: &'a [Vec<usize>],
}

impl Closure<'_> {
    /// Adds `start` to `closed` and closes it together with `members`,
    /// stopping early once every column is reached or `work` passes the
    /// limit.
    fn extend(
        &self,
        start: usize,
        closed: &mut [bool],
        open: &mut usize,
        members: &mut Vec<usize>,
        work: &mut u64,
    ) {
        let (size, columns) = (self.size, self.columns);
        let n = columns[0].len();
        closed[start] = true;
        *open -= 1;
        let mut queue = vec![start];
        while let Some(x) = queue.pop() {
            if *open == 0 || *work > CLOSURE_WORK {
                return;
            }
            members.push(x);
            *work += (self.unary.len() + 2 * members.len() * self.binary.len()) as u64;
            let mut reach = |y: usize, queue: &mut Vec<usize>| {
                if !closed[y] {
                    closed[y] = true;
                    *open -= 1;
                    queue.push(y);
                }
            };
            for t in self.unary {
                reach(columns[x].iter().fold(0, |acc, &v| acc * size + t[v]), &mut queue);
            }
            for &z in members.iter() {
                for t in self.binary {
                    for (p, q) in [(x, z), (z, x)] {
                        let y = (0..n).fold(0, |acc, k| acc * size + t[columns[p][k] * size + columns[q][k]]);
                        reach(y, &mut queue);
                    }
                }
            }
        }
    }

    /// Greedy generating set: walks `order` and keeps every column not yet
    /// reached. Once the work limit is hit, the rest of `order` is kept
    /// unexamined.
    fn greedy(&self, order: &[usize]) -> Vec<usize> {
        let count = self.columns.len();
        let (mut closed, mut open) = (vec![false; count], count);
        let (mut members, mut work, mut chosen) = (Vec::new(), 0u64, Vec::new());
        for &start in order {
            if open == 0 {
                break;
            }
            if closed[start] {
                continue;
            }
            chosen.push(start);
            if work <= CLOSURE_WORK {
                self.extend(start, &mut closed, &mut open, &mut members, &mut work);
            }
        }
        chosen
    }

    fn generates(&self, set: &[usize]) -> bool {
        let count = self.columns.len();
        let (mut closed, mut open) = (vec![false; count], count);
        let (mut members, mut work) = (Vec::new(), 0u64);
        for &start in set {
            if !closed[start] {
                self.extend(start, &mut closed, &mut open, &mut members, &mut work);
            }
        }
        open == 0 && work <= CLOSURE_WORK
    }
}

/// One column per maximal class of the preorder `c <= d` when `c = e(d)`
/// for the identity or one of `endos`, which must be all endomorphisms.
fn maximal_columns(size: usize, columns: &[Vec<usize>], endos: &[Vec<usize>]) -> Vec<usize> {
    let count = columns.len();
    let words = count.div_ceil(64);
    let mut below = vec![vec![0u64; words]; count];
    for (d, col) in columns.iter().enumerate() {
        below[d][d / 64] |= 1 << (d % 64);
        for e in endos {
            let image: Vec<usize> = col.iter().map(|&x| e[x]).collect();
            let c = power_index(size, &image);
            below[d][c / 64] |= 1 << (c % 64);
        }
    }
    let has = |d: usize, c: usize| below[d][c / 64] >> (c % 64) & 1 == 1;
    let mut maximal = vec![true; count];
    for d in 0..count {
        for (c, flag) in maximal.iter_mut().enumerate() {
            if has(d, c) && !has(c, d) {
                *flag = false;
            }
        }
    }
    let mut reps: Vec<usize> = Vec::new();
    for c in (0..count).filter(|&c| maximal[c]) {
        if !reps.iter().any(|&d| has(c, d) && has(d, c)) {
            reps.push(c);
        }
    }
    reps
}

/// A relation holding in the one-element `a` that is not full in `b`.
fn first_unfilled(a: &Structure, b: &Structure) -> Option<usize> {
    (0..a.signature().len()).find(|&r| {
        let k = a.signature().arity(r) as u32;
        !a.relation(r).is_empty() && (b.relation(r).len() as u128) < (b.size() as u128).pow(k)
    })
}

fn full_relation_sentence(a: &Structure, r: usize) -> String {
    let sym = &a.signature().symbols()[r];
    let vars: Vec<String> = (1..=sym.arity).map(|i| format!("x{i}")).collect();
    let prefix: String = vars.iter().map(|v| format!("forall {v} . ")).collect();
    format!("{prefix}{}({})", sym.name, vars.join(", "))
}

/// Largest exponent worth scanning: capped by the bound, the exponent limit
/// and the power budget.
fn feasible_exponent(a: &Structure, b: &Structure, budget: &Budget) -> u32 {
    let bound = ph_bound(a, b).unwrap_or(u128::MAX);
    let mut j = 0u32;
    while (j as u128) < bound && j < budget.max_exponent {
        if !power_fits(a, j + 1, budget.power_elements) {
            break;
        }
        j += 1;
    }
    j
}

fn scan_exponents(
    a: &Structure,
    b: &Structure,
    from: u32,
    to: u32,
    budget: &Budget,
    meter: &mut Meter,
) -> Result<Option<Verdict<ContainmentWitness>>> {
    for j in from..=to {
        let size = (a.size() as u128).pow(j);
        if size < b.size() as u128 {
            continue;
        }
        let apow = power(a, j, budget.power_elements)?;
        match surjective_from_power_pinned(&apow, b, &[], meter)? {
            (SearchEnd::Stopped, Some(m)) => {
                return Ok(Some(Verdict::Yes(ContainmentWitness::PowerMorphism {
                    exponent: j,
                    morphism: m,
                })))
            }
            (SearchEnd::OutOfBudget, _) => {
                return Ok(Some(Verdict::Unknown(
                    meter.exhausted(format!("surjective search at exponent {j}")),
                )))
            }
            _ => {}
        }
    }
    Ok(None)
}

#[derive(Debug)]
pub(crate) enum PsiCheck {
    TooLarge,
    OutOfBudget,
    Fails,
    /// Carries a witness when the pins enumerate the whole target.
    Holds(Option<ContainmentWitness>),
}

fn psi_holds(
    a: &Structure,
    b: &Structure,
    m: u32,
    budget: &Budget,
    meter: &mut Meter,
) -> Result<PsiCheck> {
    let all: BTreeSet<usize> = (0..b.size()).collect();
    psi_relativized(a, b, m, &all, &all, true, budget, meter)
}

/// Whether `b` satisfies the canonical sentence `psi(a, m)` with universal
/// variables ranging over `universal` and existential ones over
/// `existential`. Decided as a family of pinned homomorphism problems from
/// `a^(|A|^m)`, one per `m`-element subset of `universal` (or a single one
/// covering `universal` when it has at most `m` elements). Every other
/// assignment of the diagonal reduces to one of these by reindexing
/// coordinates.
///
/// With `reduce` set and `existential` covering `b`, the power is indexed
/// by [`essential_columns`] of `A^m` instead of all of them. Pins still map
/// to pins under the extension and projection maps, so the answer is the
/// same. When `existential` is smaller, a projection can send other
/// elements onto pins, so the full power is kept.
#[allow(clippy::too_many_arguments)]
pub(crate) fn psi_relativized(
    a: &Structure,
    b: &Structure,
    m: u32,
    universal: &BTreeSet<usize>,
    existential: &BTreeSet<usize>,
    reduce: bool,
    budget: &Budget,
    meter: &mut Meter,
) -> Result<PsiCheck> {
    let n = a.size();
    let m = if n == 1 { 1 } else { m };
    if b.size() > MAX_TARGET {
        return Ok(PsiCheck::TooLarge);
    }
    let reduced = if reduce && existential.len() == b.size() {
        cached_columns(a, m as usize, budget)?
    } else {
        None
    };
    let columns = match reduced {
        Some(columns) => columns,
        None => match (n as u128).checked_pow(m).filter(|&i| i <= 64) {
            Some(idx) => (0..idx as usize).map(|k| power_coordinates(n, m as usize, k)).collect(),
            None => return Ok(PsiCheck::TooLarge),
        },
    };
    let exponent = columns.len() as u32;
    if !power_fits(a, exponent, budget.power_elements) {
        return Ok(PsiCheck::TooLarge);
    }
    let big = power(a, exponent, budget.power_elements)?;
    let diagonal: Vec<usize> = (0..m as usize)
        .map(|i| power_index(n, &columns.iter().map(|c| c[i]).collect::<Vec<_>>()))
        .collect();
    let universe: Vec<usize> = universal.iter().copied().collect();
    let ex_mask = existential.iter().fold(0u64, |acc, &e| acc | 1 << e);
    let m = m as usize;
    // One pinning per m-subset of the universe suffices: any other
    // assignment is obtained by reindexing coordinates of the power.
    let assignments: Vec<Vec<usize>> = if universe.len() <= m {
        vec![(0..m).map(|i| universe[i.min(universe.len() - 1)]).collect()]
    } else {
        combinations(universe.len(), m)
            .into_iter()
            .map(|c| c.into_iter().map(|i| universe[i]).collect())
            .collect()
    };
    let covers_target = universe.len() == b.size();
    for choice in assignments {
        let mut problem = Problem::homomorphism(&big, b, false).expect("size checked");
        for v in 0..big.size() {
            if !diagonal.contains(&v) {
                problem.restrict(v, ex_mask);
            }
        }
        for (&e, &y) in diagonal.iter().zip(&choice) {
            problem.restrict(e, 1u64 << y);
        }
        let mut found = None;
        match problem.solve(meter, |s| {
            found = Some(s.to_vec());
            false
        }) {
            SearchEnd::OutOfBudget => return Ok(PsiCheck::OutOfBudget),
            SearchEnd::Complete => return Ok(PsiCheck::Fails),
            SearchEnd::Stopped => {
                if covers_target && m >= b.size() {
                    return Ok(PsiCheck::Holds(Some(ContainmentWitness::PowerMorphism {
                        exponent,
                        morphism: Morphism {
                            map: found.expect("solution"),
                        },
                    })));
                }
            }
        }
    }
    Ok(PsiCheck::Holds(None))
}

/// Both directions of containment.
pub fn equivalent(
    fragment: Fragment,
    a: &Structure,
    b: &Structure,
    budget: &Budget,
) -> Result<Verdict<(ContainmentWitness, ContainmentWitness)>> {
    let (fwd, bwd) = equivalent_with(fragment, a, b, budget, CheckOptions::default())?;
    Ok(merge(fwd.verdict, bwd.verdict))
}

pub fn equivalent_with(
    fragment: Fragment,
    a: &Structure,
    b: &Structure,
    budget: &Budget,
    options: CheckOptions,
) -> Result<(ContainmentReport, ContainmentReport)> {
    let fwd = contains_with(fragment, a, b, budget, options)?;
    if fwd.verdict.is_no() {
        let skipped = ContainmentReport {
            fragment,
            verdict: Verdict::Unknown(Exhausted {
                explored: 0,
                reason: "not evaluated: forward direction failed".into(),
            }),
            note: None,
            verified: None,
        };
        return Ok((fwd, skipped));
    }
    let bwd = contains_with(fragment, b, a, budget, options)?;
    Ok((fwd, bwd))
}

pub fn merge<T, U>(fwd: Verdict<T>, bwd: Verdict<U>) -> Verdict<(T, U)> {
    match (fwd, bwd) {
        (Verdict::No(c), _) | (_, Verdict::No(c)) => Verdict::No(c),
        (Verdict::Yes(x), Verdict::Yes(y)) => Verdict::Yes((x, y)),
        (Verdict::Unknown(e), _) | (_, Verdict::Unknown(e)) => Verdict::Unknown(e),
    }
}

/// Agreement on all positive sentences, which is isomorphism.
pub fn positive_equivalent(a: &Structure, b: &Structure) -> Result<Verdict<Vec<usize>>> {
    Ok(match is_isomorphic(a, b)? {
        Some(iso) => Verdict::Yes(iso),
        None => Verdict::No(Certificate::Exhaustion),
    })
}

/// Shorthand: `Some(true)` / `Some(false)` for decided equivalence.
pub fn decided(kind: VerdictKind) -> Option<bool> {
    match kind {
        VerdictKind::Yes => Some(true),
        VerdictKind::No => Some(false),
        VerdictKind::Unknown => None,
    }
}
