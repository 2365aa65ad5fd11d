//! Maps between structures and the searches that find them.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::search::{full_mask, Problem, SearchEnd, MAX_TARGET};
use crate::structure::{for_each_isomorphism, power, power_coordinates, power_fits, Structure};
use crate::verdict::{Budget, Certificate, Meter, Verdict};

/// A total map between domains (0-based).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Morphism {
    pub map: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MorphismFlags {
    pub total: bool,
    pub homomorphism: bool,
    pub strong: bool,
    pub surjective: bool,
    pub bijective: bool,
}

impl Morphism {
    pub fn identity(n: usize) -> Self {
        Morphism {
            map: (0..n).collect(),
        }
    }

    pub fn apply(&self, x: usize) -> usize {
        self.map[x]
    }

    pub fn compose(&self, then: &Morphism) -> Morphism {
        Morphism {
            map: self.map.iter().map(|&x| then.map[x]).collect(),
        }
    }

    pub fn image(&self) -> BTreeSet<usize> {
        self.map.iter().copied().collect()
    }

    /// Recomputes every flag by scanning all tuples.
    pub fn check(&self, a: &Structure, b: &Structure) -> MorphismFlags {
        let mut flags = MorphismFlags::default();
        if a.signature() != b.signature()
            || self.map.len() != a.size()
            || self.map.iter().any(|&x| x >= b.size())
        {
            return flags;
        }
        flags.total = true;
        flags.homomorphism = a.facts().all(|(r, t)| {
            let img: Vec<usize> = t.iter().map(|&e| self.map[e]).collect();
            b.holds(r, &img)
        });
        let image = self.image();
        flags.surjective = image.len() == b.size();
        let injective = image.len() == a.size();
        flags.bijective = flags.surjective && injective;
        if flags.homomorphism {
            let preimages: Vec<Vec<usize>> = (0..b.size())
                .map(|y| (0..a.size()).filter(|&x| self.map[x] == y).collect())
                .collect();
            flags.strong = b.facts().all(|(r, t)| {
                let sets: Vec<Vec<usize>> = t.iter().map(|&y| preimages[y].clone()).collect();
                all_choices(&sets, |pre| a.holds(r, pre))
            });
        }
        flags
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (x, y) in self.map.iter().enumerate() {
            out.push_str(&format!("{} -> {}\n", x + 1, y + 1));
        }
        out
    }
}

impl fmt::Display for Morphism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// A set-valued map; `map[x]` is a bitmask over the target domain.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Hypermorphism {
    pub map: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct HyperFlags {
    pub total: bool,
    pub surjective: bool,
    pub preserving: bool,
}

impl HyperFlags {
    pub fn is_surjective_hypermorphism(&self) -> bool {
        self.total && self.surjective && self.preserving
    }
}

pub(crate) fn mask_of(elems: impl IntoIterator<Item = usize>) -> u64 {
    elems.into_iter().fold(0, |m, e| m | 1u64 << e)
}

pub(crate) fn elements_of(mask: u64) -> Vec<usize> {
    let mut out = Vec::new();
    let mut m = mask;
    while m != 0 {
        out.push(m.trailing_zeros() as usize);
        m &= m - 1;
    }
    out
}

impl Hypermorphism {
    /// Builds a hypermorphism from 1-based image lists.
    pub fn from_sets(sets: &[&[usize]]) -> Self {
        Hypermorphism {
            map: sets
                .iter()
                .map(|s| mask_of(s.iter().map(|&e| e - 1)))
                .collect(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Hypermorphism {
            map: (0..n).map(|i| 1u64 << i).collect(),
        }
    }

    pub fn image_of(&self, x: usize) -> Vec<usize> {
        elements_of(self.map[x])
    }

    /// `self` followed by `then`.
    pub fn compose(&self, then: &Hypermorphism) -> Hypermorphism {
        Hypermorphism {
            map: self
                .map
                .iter()
                .map(|&m| elements_of(m).iter().fold(0, |acc, &y| acc | then.map[y]))
                .collect(),
        }
    }

    pub fn check(&self, a: &Structure, b: &Structure) -> HyperFlags {
        let mut flags = HyperFlags::default();
        if a.signature() != b.signature()
            || self.map.len() != a.size()
            || b.size() > MAX_TARGET
            || self.map.iter().any(|&m| m & !full_mask(b.size()) != 0)
        {
            return flags;
        }
        flags.total = self.map.iter().all(|&m| m != 0);
        flags.surjective = self.map.iter().fold(0, |acc, &m| acc | m) == full_mask(b.size());
        flags.preserving = a.facts().all(|(r, t)| {
            let sets: Vec<Vec<usize>> = t.iter().map(|&e| elements_of(self.map[e])).collect();
            all_choices(&sets, |c| b.holds(r, c))
        });
        flags
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (x, &m) in self.map.iter().enumerate() {
            let parts: Vec<String> = elements_of(m).iter().map(|e| (e + 1).to_string()).collect();
            out.push_str(&format!("{} -> {{{}}}\n", x + 1, parts.join(",")));
        }
        out
    }
}

impl fmt::Display for Hypermorphism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// `true` iff `pred` holds for every choice of one element per set.
fn all_choices(sets: &[Vec<usize>], mut pred: impl FnMut(&[usize]) -> bool) -> bool {
    if sets.iter().any(Vec::is_empty) {
        return true;
    }
    let mut idx = vec![0usize; sets.len()];
    let mut buf = vec![0usize; sets.len()];
    loop {
        for (k, &i) in idx.iter().enumerate() {
            buf[k] = sets[k][i];
        }
        if !pred(&buf) {
            return false;
        }
        let mut k = sets.len();
        loop {
            if k == 0 {
                return true;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < sets[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// A ternary operation on a domain, stored as a table over `n^3` triples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TernaryOperation {
    pub size: usize,
    pub table: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TernaryFlags {
    pub total: bool,
    pub majority: bool,
    pub polymorphism: bool,
}

impl TernaryOperation {
    pub fn apply(&self, x: usize, y: usize, z: usize) -> usize {
        self.table[(x * self.size + y) * self.size + z]
    }

    pub fn check(&self, a: &Structure) -> TernaryFlags {
        let n = self.size;
        let mut flags = TernaryFlags::default();
        if n != a.size() || self.table.len() != n * n * n || self.table.iter().any(|&v| v >= n) {
            return flags;
        }
        flags.total = true;
        flags.majority = (0..n).all(|x| {
            (0..n).all(|y| {
                self.apply(x, x, y) == x && self.apply(x, y, x) == x && self.apply(y, x, x) == x
            })
        });
        flags.polymorphism = (0..a.signature().len()).all(|r| {
            let rel: Vec<&Vec<usize>> = a.relation(r).iter().collect();
            rel.iter().all(|t1| {
                rel.iter().all(|t2| {
                    rel.iter().all(|t3| {
                        let img: Vec<usize> = (0..t1.len())
                            .map(|k| self.apply(t1[k], t2[k], t3[k]))
                            .collect();
                        a.holds(r, &img)
                    })
                })
            })
        });
        flags
    }
}

/// A map read from witness text, either point- or set-valued.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Witness {
    Map(Morphism),
    Hyper(Hypermorphism),
}

/// Parses witness lines `a -> b` or `a -> {b1,b2}` (1-based).
pub fn parse_witness(text: &str) -> Result<Witness> {
    let mut entries: Vec<(usize, Vec<usize>, bool)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: &str| Error::Syntax {
            line: i + 1,
            column: 1,
            message: msg.to_string(),
        };
        let (lhs, rhs) = line.split_once("->").ok_or_else(|| err("expected `a -> b`"))?;
        let x: usize = lhs.trim().parse().map_err(|_| err("invalid source element"))?;
        let rhs = rhs.trim();
        let (set, body) = match rhs.strip_prefix('{').and_then(|r| r.strip_suffix('}')) {
            Some(body) => (true, body),
            None => (false, rhs),
        };
        let mut ys = Vec::new();
        for part in body.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let y: usize = part.parse().map_err(|_| err("invalid target element"))?;
            if y == 0 {
                return Err(err("elements are numbered from 1"));
            }
            ys.push(y - 1);
        }
        if x == 0 || ys.is_empty() || (!set && ys.len() != 1) {
            return Err(err("malformed map entry"));
        }
        entries.push((x - 1, ys, set));
    }
    entries.sort_by_key(|e| e.0);
    if entries.iter().enumerate().any(|(i, e)| e.0 != i) {
        return Err(Error::Precondition(
            "witness must map each of 1..n exactly once".into(),
        ));
    }
    if entries.iter().any(|e| e.2) {
        if entries.iter().any(|e| e.1.iter().any(|&y| y >= MAX_TARGET)) {
            return Err(Error::Precondition("set-valued maps support at most 64 targets".into()));
        }
        Ok(Witness::Hyper(Hypermorphism {
            map: entries.iter().map(|e| mask_of(e.1.iter().copied())).collect(),
        }))
    } else {
        Ok(Witness::Map(Morphism {
            map: entries.iter().map(|e| e.1[0]).collect(),
        }))
    }
}

// ---------------------------------------------------------------------------
// Searches

fn too_large(b: &Structure) -> Error {
    Error::BudgetExceeded {
        what: "target elements",
        required: b.size() as u128,
        limit: MAX_TARGET as u128,
    }
}

fn run_first(problem: &mut Problem, meter: &mut Meter) -> (SearchEnd, Option<Vec<usize>>) {
    let mut found = None;
    let end = problem.solve(meter, |s| {
        found = Some(s.to_vec());
        false
    });
    (end, found)
}

/// Lexicographically least (surjective) homomorphism `a -> b`.
pub fn find_homomorphism(
    a: &Structure,
    b: &Structure,
    surjective: bool,
    budget: &Budget,
) -> Result<Verdict<Morphism>> {
    if a.signature() != b.signature() {
        return Err(Error::SignatureMismatch);
    }
    if surjective && b.size() > a.size() {
        return Ok(Verdict::No(Certificate::Exhaustion));
    }
    let mut problem = Problem::homomorphism(a, b, surjective).ok_or_else(|| too_large(b))?;
    let mut meter = Meter::new(budget.nodes);
    Ok(match run_first(&mut problem, &mut meter) {
        (SearchEnd::Stopped, Some(map)) => {
            let m = Morphism { map };
            debug_assert!(m.check(a, b).homomorphism);
            Verdict::Yes(m)
        }
        (SearchEnd::OutOfBudget, _) => Verdict::Unknown(meter.exhausted("homomorphism search")),
        _ => Verdict::No(Certificate::Exhaustion),
    })
}

/// Searches a surjective homomorphism `a^j -> b` whose value on each listed
/// power element is restricted to the given mask.
pub(crate) fn surjective_from_power_pinned(
    apow: &Structure,
    b: &Structure,
    pins: &[(usize, u64)],
    meter: &mut Meter,
) -> Result<(SearchEnd, Option<Morphism>)> {
    let mut problem = Problem::homomorphism(apow, b, true).ok_or_else(|| too_large(b))?;
    for &(var, mask) in pins {
        problem.restrict(var, mask);
    }
    let (end, found) = run_first(&mut problem, meter);
    Ok((end, found.map(|map| Morphism { map })))
}

/// Least exponent `j <= j_max` with a surjective homomorphism `a^j -> b`.
///
/// A `No` is only returned when `j_max` reaches `|A|^|B|`.
pub fn find_surjective_hom_from_power(
    a: &Structure,
    b: &Structure,
    j_max: u32,
    budget: &Budget,
) -> Result<Verdict<(u32, Morphism)>> {
    if a.signature() != b.signature() {
        return Err(Error::SignatureMismatch);
    }
    if b.size() > MAX_TARGET {
        return Err(too_large(b));
    }
    let bound = (a.size() as u128).checked_pow(b.size() as u32);
    let mut meter = Meter::new(budget.nodes);
    for j in 1..=j_max {
        let Some(size) = (a.size() as u128).checked_pow(j) else {
            return Ok(Verdict::Unknown(
                meter.exhausted(format!("power exponent {j} overflows")),
            ));
        };
        if size < b.size() as u128 {
            continue;
        }
        if !power_fits(a, j, budget.power_elements) {
            return Ok(Verdict::Unknown(meter.exhausted(format!(
                "power {j} exceeds the limit of {} elements or tuples",
                budget.power_elements
            ))));
        }
        let apow = power(a, j, budget.power_elements)?;
        match surjective_from_power_pinned(&apow, b, &[], &mut meter)? {
            (SearchEnd::Stopped, Some(m)) => {
                debug_assert!(m.check(&apow, b).homomorphism);
                return Ok(Verdict::Yes((j, m)));
            }
            (SearchEnd::OutOfBudget, _) => {
                return Ok(Verdict::Unknown(
                    meter.exhausted(format!("search at exponent {j}")),
                ))
            }
            _ => {}
        }
    }
    match bound {
        Some(bound) if j_max as u128 >= bound => {
            Ok(Verdict::No(Certificate::ExhaustionUnderBound { bound }))
        }
        _ => Ok(Verdict::Unknown(
            meter.exhausted(format!("exponents up to {j_max} refuted, bound not reached")),
        )),
    }
}

/// Restrictions on the shape of a set-valued map, one entry per source element.
#[derive(Debug, Clone)]
pub(crate) struct HyperShape {
    /// Ordered candidate image sets per source element.
    pub candidates: Vec<Vec<u64>>,
    /// Source elements whose images together must cover the target.
    pub cover: Vec<usize>,
}

/// All non-empty subsets of `0..n` ordered by size, then lexicographically.
pub(crate) fn subsets_by_size(n: usize) -> Vec<u64> {
    let mut out = Vec::new();
    for k in 1..=n {
        for c in crate::structure::combinations(n, k) {
            out.push(mask_of(c));
        }
    }
    out
}

const MAX_SET_TARGET: usize = 16;

fn too_large_sets(b: &Structure) -> Error {
    Error::BudgetExceeded {
        what: "target elements for set-valued search",
        required: b.size() as u128,
        limit: MAX_SET_TARGET as u128,
    }
}

/// First surjective hypermorphism `a -> b` with image sets ordered by size,
/// then lexicographically.
pub fn find_surjective_hypermorphism(
    a: &Structure,
    b: &Structure,
    budget: &Budget,
) -> Result<Verdict<Hypermorphism>> {
    if a.signature() != b.signature() {
        return Err(Error::SignatureMismatch);
    }
    if b.size() > MAX_SET_TARGET {
        return Err(too_large_sets(b));
    }
    let subsets = subsets_by_size(b.size());
    let shape = HyperShape {
        candidates: vec![subsets; a.size()],
        cover: (0..a.size()).collect(),
    };
    Ok(search_hypermorphism(a, b, &shape, budget))
}

/// A surjective hypermorphism `h: a -> a` with `h(U) = A` and every image
/// meeting `X`: elements of `X \ U` are fixed, elements of `U` keep
/// themselves in their image, and the remaining elements go to one element
/// of `X`.
pub fn find_uxcore_witness(
    a: &Structure,
    u: &BTreeSet<usize>,
    x: &BTreeSet<usize>,
    budget: &Budget,
) -> Result<Verdict<Hypermorphism>> {
    if u.is_empty() || x.is_empty() {
        return Err(Error::EmptySubset);
    }
    let n = a.size();
    if let Some(&e) = u.iter().chain(x).find(|&&e| e >= n) {
        return Err(Error::OutOfRange {
            element: e + 1,
            size: n,
        });
    }
    if n > MAX_SET_TARGET {
        return Err(too_large_sets(a));
    }
    let xmask = mask_of(x.iter().copied());
    let subsets = subsets_by_size(n);
    let candidates = (0..n)
        .map(|e| {
            if u.contains(&e) {
                subsets
                    .iter()
                    .copied()
                    .filter(|&s| s >> e & 1 == 1 && s & xmask != 0)
                    .collect()
            } else if x.contains(&e) {
                vec![1u64 << e]
            } else {
                x.iter().map(|&t| 1u64 << t).collect()
            }
        })
        .collect();
    let shape = HyperShape {
        candidates,
        cover: u.iter().copied().collect(),
    };
    Ok(search_hypermorphism(a, a, &shape, budget))
}

pub(crate) fn search_hypermorphism(
    a: &Structure,
    b: &Structure,
    shape: &HyperShape,
    budget: &Budget,
) -> Verdict<Hypermorphism> {
    let mut search = HyperSearch::new(a, b, shape);
    let mut meter = Meter::new(budget.nodes);
    match search.run(&mut meter) {
        SearchEnd::Stopped => {
            let h = Hypermorphism {
                map: search.chosen.clone(),
            };
            debug_assert!(h.check(a, b).is_surjective_hypermorphism());
            Verdict::Yes(h)
        }
        SearchEnd::OutOfBudget => Verdict::Unknown(meter.exhausted("set-valued map search")),
        SearchEnd::Complete => Verdict::No(Certificate::Exhaustion),
    }
}

struct HyperSearch<'a> {
    b: &'a Structure,
    shape: &'a HyperShape,
    constraints: Vec<(usize, Vec<usize>)>,
    watch: Vec<Vec<usize>>,
    chosen: Vec<u64>,
    allowed: Vec<u64>,
    in_cover: Vec<bool>,
}

impl<'a> HyperSearch<'a> {
    fn new(a: &'a Structure, b: &'a Structure, shape: &'a HyperShape) -> Self {
        let n = a.size();
        let constraints: Vec<(usize, Vec<usize>)> =
            a.facts().map(|(r, t)| (r, t.clone())).collect();
        let mut watch = vec![Vec::new(); n];
        for (ci, (_, t)) in constraints.iter().enumerate() {
            let mut vars = t.clone();
            vars.sort_unstable();
            vars.dedup();
            for v in vars {
                watch[v].push(ci);
            }
        }
        let allowed = shape
            .candidates
            .iter()
            .map(|c| c.iter().fold(0, |acc, &m| acc | m))
            .collect();
        let mut in_cover = vec![false; n];
        for &c in &shape.cover {
            in_cover[c] = true;
        }
        HyperSearch {
            b,
            shape,
            constraints,
            watch,
            chosen: vec![0; n],
            allowed,
            in_cover,
        }
    }

    fn run(&mut self, meter: &mut Meter) -> SearchEnd {
        let all: Vec<usize> = (0..self.constraints.len()).collect();
        let mut trail = Vec::new();
        if !self.propagate(&all, &mut trail) {
            return SearchEnd::Complete;
        }
        self.dfs(0, meter)
    }

    fn cover_possible(&self) -> bool {
        let full = full_mask(self.b.size());
        let mut union = 0u64;
        for (v, &c) in self.in_cover.iter().enumerate() {
            if c {
                union |= if self.chosen[v] != 0 {
                    self.chosen[v]
                } else {
                    self.allowed[v]
                };
            }
        }
        union == full
    }

    fn dfs(&mut self, var: usize, meter: &mut Meter) -> SearchEnd {
        if var == self.chosen.len() {
            return SearchEnd::Stopped;
        }
        let candidates: Vec<u64> = self.shape.candidates[var]
            .iter()
            .copied()
            .filter(|&m| m & !self.allowed[var] == 0)
            .collect();
        for m in candidates {
            if !meter.tick() {
                return SearchEnd::OutOfBudget;
            }
            self.chosen[var] = m;
            let mut trail: Vec<(usize, u64)> = Vec::new();
            let watched = self.watch[var].clone();
            if self.cover_possible() && self.propagate(&watched, &mut trail) {
                match self.dfs(var + 1, meter) {
                    SearchEnd::Complete => {}
                    other => return other,
                }
            }
            for (v, old) in trail.into_iter().rev() {
                self.allowed[v] = old;
            }
            self.chosen[var] = 0;
        }
        SearchEnd::Complete
    }

    /// Narrows the allowed masks of unassigned variables; `false` on a
    /// dead end.
    fn propagate(&mut self, seed: &[usize], trail: &mut Vec<(usize, u64)>) -> bool {
        let mut queue: Vec<usize> = seed.to_vec();
        while let Some(ci) = queue.pop() {
            let (r, scope) = &self.constraints[ci];
            let sets: Vec<u64> = scope
                .iter()
                .map(|&v| {
                    if self.chosen[v] != 0 {
                        self.chosen[v]
                    } else {
                        self.allowed[v]
                    }
                })
                .collect();
            let assigned: Vec<usize> = (0..scope.len())
                .filter(|&k| self.chosen[scope[k]] != 0)
                .collect();
            let combos: usize = assigned.iter().map(|&k| sets[k].count_ones() as usize).product();
            let rows: Vec<&Vec<usize>> = self
                .b
                .relation(*r)
                .iter()
                .filter(|row| row.iter().zip(&sets).all(|(&y, &s)| s >> y & 1 == 1))
                .collect();
            let open: Vec<usize> = (0..scope.len())
                .filter(|&k| self.chosen[scope[k]] == 0)
                .collect();
            if open.is_empty() {
                if rows.len() != combos {
                    return false;
                }
                continue;
            }
            let mut narrowed: Vec<(usize, u64)> = Vec::new();
            for &k in &open {
                let mut keep = 0u64;
                for y in elements_of(sets[k]) {
                    let projections: HashSet<Vec<usize>> = rows
                        .iter()
                        .filter(|row| row[k] == y)
                        .map(|row| assigned.iter().map(|&p| row[p]).collect())
                        .collect();
                    if projections.len() == combos {
                        keep |= 1u64 << y;
                    }
                }
                narrowed.push((scope[k], keep));
            }
            for (v, keep) in narrowed {
                let old = self.allowed[v];
                let mut new = old & keep;
                // the allowed mask only matters through the candidates it admits
                new = self.shape.candidates[v]
                    .iter()
                    .filter(|&&m| m & !new == 0)
                    .fold(0, |acc, &m| acc | m);
                if new != old {
                    if new == 0 {
                        return false;
                    }
                    trail.push((v, old));
                    self.allowed[v] = new;
                    for &other in &self.watch[v] {
                        if other != ci {
                            queue.push(other);
                        }
                    }
                }
            }
        }
        self.cover_possible()
    }
}

/// A non-surjective idempotent endomorphism of `a`, if one exists.
pub fn find_retraction(a: &Structure, budget: &Budget) -> Result<Verdict<Morphism>> {
    find_retraction_ordered(a, &(0..a.size()).collect::<Vec<_>>(), budget)
}

/// As [`find_retraction`], trying to drop the elements in the given order.
pub fn find_retraction_ordered(
    a: &Structure,
    order: &[usize],
    budget: &Budget,
) -> Result<Verdict<Morphism>> {
    if a.size() > MAX_TARGET {
        return Err(too_large(a));
    }
    let mut meter = Meter::new(budget.nodes);
    for &v in order {
        let mut problem = Problem::homomorphism(a, a, false).expect("size checked");
        for x in 0..a.size() {
            problem.forbid(x, v);
        }
        match run_first(&mut problem, &mut meter) {
            (SearchEnd::Stopped, Some(map)) => {
                let r = idempotent_power(&Morphism { map });
                debug_assert!(r.check(a, a).homomorphism);
                return Ok(Verdict::Yes(r));
            }
            (SearchEnd::OutOfBudget, _) => {
                return Ok(Verdict::Unknown(meter.exhausted("retraction search")))
            }
            _ => {}
        }
    }
    Ok(Verdict::No(Certificate::Exhaustion))
}

/// The idempotent member of the cyclic semigroup generated by `h`.
pub fn idempotent_power(h: &Morphism) -> Morphism {
    let mut p = h.clone();
    loop {
        let pp = p.compose(&p);
        if pp == p {
            return p;
        }
        p = p.compose(h);
    }
}

/// Every endomorphism of `a` in lexicographic order, or `None` when there
/// are more than `limit` of them or the search budget runs out.
pub fn endomorphisms(a: &Structure, limit: usize, budget: &Budget) -> Result<Option<Vec<Morphism>>> {
    let mut problem = Problem::homomorphism(a, a, false).ok_or_else(|| too_large(a))?;
    let mut meter = Meter::new(budget.nodes);
    let mut out = Vec::new();
    let end = problem.solve(&mut meter, |s| {
        out.push(Morphism { map: s.to_vec() });
        out.len() <= limit
    });
    Ok((end == SearchEnd::Complete).then_some(out))
}

/// Up to `limit` homomorphisms `a^arity -> a`, in lexicographic order of
/// their tables (indexed as in [`power`]). The list is cut short when the
/// limit or the node budget is reached.
pub fn polymorphisms(a: &Structure, arity: u32, limit: usize, budget: &Budget) -> Result<Vec<Morphism>> {
    let apow = power(a, arity, budget.power_elements)?;
    let mut problem = Problem::homomorphism(&apow, a, false).ok_or_else(|| too_large(a))?;
    let mut meter = Meter::new(budget.nodes);
    let mut out = Vec::new();
    problem.solve(&mut meter, |s| {
        out.push(Morphism { map: s.to_vec() });
        out.len() < limit
    });
    Ok(out)
}

/// Every automorphism of `a`, in lexicographic order.
pub fn automorphisms(a: &Structure) -> Vec<Morphism> {
    let mut out = Vec::new();
    for_each_isomorphism(a, a, |m| {
        out.push(Morphism { map: m.to_vec() });
        true
    })
    .expect("same signature");
    out
}

/// Whether some automorphism exchanges `x` and `y` (0-based).
pub fn has_swap_automorphism(a: &Structure, x: usize, y: usize) -> bool {
    let mut found = false;
    for_each_isomorphism(a, a, |m| {
        if m[x] == y && m[y] == x {
            found = true;
            return false;
        }
        true
    })
    .expect("same signature");
    found
}

/// A majority operation on `a` preserving every relation.
pub fn find_majority_polymorphism(
    a: &Structure,
    budget: &Budget,
) -> Result<Verdict<TernaryOperation>> {
    let n = a.size();
    if n > MAX_TARGET {
        return Err(too_large(a));
    }
    let cube = power(a, 3, budget.power_elements)?;
    let mut problem = Problem::homomorphism(&cube, a, false).expect("size checked");
    for idx in 0..cube.size() {
        let c = power_coordinates(n, 3, idx);
        let forced = if c[0] == c[1] || c[0] == c[2] {
            Some(c[0])
        } else if c[1] == c[2] {
            Some(c[1])
        } else {
            None
        };
        if let Some(v) = forced {
            problem.restrict(idx, 1u64 << v);
        }
    }
    let mut meter = Meter::new(budget.nodes);
    Ok(match run_first(&mut problem, &mut meter) {
        (SearchEnd::Stopped, Some(table)) => {
            let op = TernaryOperation { size: n, table };
            debug_assert!({
                let f = op.check(a);
                f.majority && f.polymorphism
            });
            Verdict::Yes(op)
        }
        (SearchEnd::OutOfBudget, _) => Verdict::Unknown(meter.exhausted("majority search")),
        _ => Verdict::No(Certificate::Exhaustion),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::fixture;
    use crate::structure::{disjoint_union, Structure};

    fn budget() -> Budget {
        Budget::default()
    }

    fn set(xs: &[usize]) -> BTreeSet<usize> {
        xs.iter().map(|x| x - 1).collect()
    }

    #[test]
    fn identity_flags() {
        let a = fixture("NONIND_A");
        let f = Morphism::identity(3).check(&a, &a);
        assert!(f.homomorphism && f.strong && f.surjective && f.bijective);
    }

    #[test]
    fn strong_flag_detects_missing_preimages() {
        let k2 = fixture("K2");
        let p01 = fixture("P01fix");
        let m = Morphism { map: vec![0, 1] };
        let f = m.check(&k2, &p01);
        assert!(f.homomorphism && !f.strong);
        assert!(m.check(&p01, &p01).strong);
    }

    #[test]
    fn lex_least_surjection_onto_p01() {
        let v = find_homomorphism(&fixture("P110"), &fixture("P01fix"), true, &budget()).unwrap();
        assert_eq!(v.into_witness().unwrap().map, vec![0, 0, 1]);
        let listed = Morphism { map: vec![0, 1, 1] };
        assert!(!listed.check(&fixture("P110"), &fixture("P01fix")).homomorphism);
    }

    #[test]
    fn homomorphism_edge_cases() {
        assert!(find_homomorphism(&fixture("K2"), &fixture("K1"), false, &budget())
            .unwrap()
            .is_no());
        let c6 = fixture("C6");
        let w = find_homomorphism(&c6, &fixture("K2"), true, &budget()).unwrap();
        assert_eq!(w.into_witness().unwrap().map, vec![0, 1, 0, 1, 0, 1]);
        let tiny = Budget::default().with_nodes(1);
        assert!(find_homomorphism(&c6, &fixture("C4"), true, &tiny)
            .unwrap()
            .is_unknown());
    }

    #[test]
    fn powers_onto_targets() {
        let v = find_surjective_hom_from_power(&fixture("K2"), &fixture("2K2"), 4, &budget()).unwrap();
        assert_eq!(v.witness().unwrap().0, 2);
        let v = find_surjective_hom_from_power(&fixture("P01fix"), &fixture("P110"), 4, &budget())
            .unwrap();
        let (j, m) = v.into_witness().unwrap();
        assert_eq!(j, 2);
        let sq = power(&fixture("P01fix"), 2, 1 << 20).unwrap();
        let flags = m.check(&sq, &fixture("P110"));
        assert!(flags.homomorphism && flags.surjective);
        let lb = find_surjective_hom_from_power(&fixture("LB3_A"), &fixture("LB3_B"), 2, &budget())
            .unwrap();
        assert!(lb.is_unknown());
        let no = find_surjective_hom_from_power(&fixture("K1"), &fixture("K2"), 1, &budget())
            .unwrap();
        assert!(no.is_no());
    }

    #[test]
    fn a4_maps_found_and_checked() {
        let a4 = fixture("A4fix");
        let p110 = fixture("P110");
        let f = find_surjective_hypermorphism(&a4, &p110, &budget()).unwrap();
        assert!(f.witness().unwrap().check(&a4, &p110).is_surjective_hypermorphism());
        let g = find_surjective_hypermorphism(&p110, &a4, &budget()).unwrap();
        assert!(g.witness().unwrap().check(&p110, &a4).is_surjective_hypermorphism());
        let w = find_uxcore_witness(&a4, &set(&[2, 3]), &set(&[1, 2]), &budget()).unwrap();
        let h = w.into_witness().unwrap();
        assert!(h.check(&a4, &a4).is_surjective_hypermorphism());
        let onto_u = h.map[1] | h.map[2];
        assert_eq!(onto_u, full_mask(4));
    }

    #[test]
    fn hypermorphism_refusals() {
        assert!(find_surjective_hypermorphism(&fixture("K1star"), &fixture("K2"), &budget())
            .unwrap()
            .is_no());
        assert!(find_surjective_hypermorphism(&fixture("K2"), &fixture("K1"), &budget())
            .unwrap()
            .is_no());
    }

    #[test]
    fn p010_witness() {
        let p = fixture("P010fix");
        let w = find_uxcore_witness(&p, &set(&[2]), &set(&[1]), &budget()).unwrap();
        let h = w.into_witness().unwrap();
        assert_eq!(h.map, vec![0b001, 0b111, 0b001]);
        let spread = Hypermorphism::from_sets(&[&[1], &[1, 2, 3], &[1, 2, 3]]);
        assert!(spread.check(&p, &p).is_surjective_hypermorphism());
        let all: BTreeSet<usize> = (0..3).collect();
        let id = find_uxcore_witness(&p, &all, &all, &budget()).unwrap();
        assert_eq!(id.into_witness().unwrap(), Hypermorphism::identity(3));
    }

    #[test]
    fn retractions() {
        let r = find_retraction(&fixture("P01fix"), &budget()).unwrap();
        assert_eq!(r.into_witness().unwrap().map, vec![0, 0]);
        assert!(find_retraction(&fixture("K2"), &budget()).unwrap().is_no());
        assert!(find_retraction(&fixture("K1star"), &budget()).unwrap().is_no());
        let c6 = fixture("C6");
        let r = find_retraction(&c6, &budget()).unwrap().into_witness().unwrap();
        assert_eq!(r.compose(&r), r);
        assert!(r.image().len() < 6);
    }

    #[test]
    fn automorphism_counts() {
        assert_eq!(automorphisms(&fixture("H1")).len(), 1);
        assert_eq!(automorphisms(&fixture("K2")).len(), 2);
        assert_eq!(automorphisms(&fixture("2K1")).len(), 2);
        assert!(has_swap_automorphism(&fixture("K2"), 0, 1));
        assert!(!has_swap_automorphism(&fixture("P01fix"), 0, 1));
    }

    #[test]
    fn majority() {
        let k2 = find_majority_polymorphism(&fixture("K2"), &budget()).unwrap();
        let op = k2.into_witness().unwrap();
        assert_eq!(op.table, vec![0, 0, 0, 1, 0, 1, 1, 1]);
        assert!(find_majority_polymorphism(&fixture("C3"), &budget()).unwrap().is_no());
        assert!(find_majority_polymorphism(&fixture("K1star"), &budget()).unwrap().is_yes());
        let k2k1s = disjoint_union(&fixture("K2"), &fixture("K1star")).unwrap();
        assert!(find_majority_polymorphism(&k2k1s, &budget()).unwrap().is_yes());
    }

    #[test]
    fn witness_text_round_trip() {
        let h = Hypermorphism::from_sets(&[&[1, 4], &[2], &[3]]);
        assert_eq!(h.render(), "1 -> {1,4}\n2 -> {2}\n3 -> {3}\n");
        assert_eq!(parse_witness(&h.render()).unwrap(), Witness::Hyper(h));
        let m = Morphism { map: vec![0, 0, 1] };
        assert_eq!(parse_witness(&m.render()).unwrap(), Witness::Map(m));
        assert!(parse_witness("1 -> 2\n3 -> 1\n").is_err());
        let empty = Structure::digraph(1, &[]).unwrap();
        assert!(Morphism { map: vec![3] }.check(&empty, &empty) == MorphismFlags::default());
    }
}
