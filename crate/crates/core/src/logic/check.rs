use std::collections::{BTreeSet, HashMap};

use super::{Atom, Formula, Matrix, Quantifier};
use crate::error::{Error, Result};
use crate::structure::Structure;
use crate::verdict::{Budget, Certificate, Exhausted, Meter, Verdict};

/// Optional restriction of the range of universal and existential variables.
#[derive(Debug, Clone, Default)]
pub struct Relativization {
    pub universal: Option<BTreeSet<usize>>,
    pub existential: Option<BTreeSet<usize>>,
}

/// One existential choice made on a winning branch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrategyStep {
    /// Values of the variables quantified before `variable` (0-based elements).
    pub context: Vec<(String, usize)>,
    pub variable: String,
    pub value: usize,
}

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    /// `None` when the node budget ran out.
    pub truth: Option<bool>,
    /// Existential choices on the explored winning branches.
    pub trace: Vec<StrategyStep>,
    pub explored: u64,
}

impl CheckOutcome {
    pub fn holds(&self) -> bool {
        self.truth == Some(true)
    }

    pub fn verdict(self) -> Verdict<Vec<StrategyStep>> {
        match self.truth {
            Some(true) => Verdict::Yes(self.trace),
            Some(false) => Verdict::No(Certificate::Exhaustion),
            None => Verdict::Unknown(Exhausted {
                explored: self.explored,
                reason: "model checking".into(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tri {
    True,
    False,
    Open,
}

enum Node {
    Atom(usize),
    And(Vec<Node>),
    Or(Vec<Node>),
}

struct CAtom {
    rel: Option<usize>,
    args: Vec<usize>,
}

struct Checker<'a> {
    s: &'a Structure,
    names: Vec<String>,
    quants: Vec<Quantifier>,
    atoms: Vec<CAtom>,
    root: Node,
    conjunctive: bool,
    watch: Vec<Vec<usize>>,
    base: Vec<Vec<usize>>,
    alive: Vec<Vec<bool>>,
    removed: Vec<(usize, usize)>,
    values: Vec<Option<usize>>,
    trace: Vec<StrategyStep>,
    meter: Meter,
}

/// Decides `s |= f` by exhaustive game search.
pub fn model_check(s: &Structure, f: &Formula, budget: &Budget) -> Result<CheckOutcome> {
    model_check_relativized(s, f, &Relativization::default(), budget)
}

/// As [`model_check`], with universal and existential variables ranging
/// over the given subsets.
pub fn model_check_relativized(
    s: &Structure,
    f: &Formula,
    rel: &Relativization,
    budget: &Budget,
) -> Result<CheckOutcome> {
    f.check_signature(s.signature())?;
    let mut index: HashMap<&str, usize> = HashMap::new();
    for (i, (_, v)) in f.prefix.iter().enumerate() {
        if index.insert(v.as_str(), i).is_some() {
            return Err(Error::Precondition(format!("variable `{v}` is quantified twice")));
        }
    }
    let mut atoms = Vec::new();
    let root = compile(&f.matrix, s, &index, &mut atoms)?;
    let conjunctive = is_conjunctive(&f.matrix);
    let n = f.prefix.len();
    let mut watch = vec![Vec::new(); n];
    for (ai, a) in atoms.iter().enumerate() {
        let mut vars = a.args.clone();
        vars.sort_unstable();
        vars.dedup();
        for v in vars {
            watch[v].push(ai);
        }
    }
    let range = |set: &Option<BTreeSet<usize>>| -> Vec<usize> {
        match set {
            Some(set) => set.iter().copied().filter(|&e| e < s.size()).collect(),
            None => (0..s.size()).collect(),
        }
    };
    let base: Vec<Vec<usize>> = f
        .prefix
        .iter()
        .map(|(q, _)| match q {
            Quantifier::Forall => range(&rel.universal),
            Quantifier::Exists => range(&rel.existential),
        })
        .collect();
    let alive = base
        .iter()
        .map(|b| {
            let mut v = vec![false; s.size()];
            for &e in b {
                v[e] = true;
            }
            v
        })
        .collect();
    let mut c = Checker {
        s,
        names: f.prefix.iter().map(|(_, v)| v.clone()).collect(),
        quants: f.prefix.iter().map(|(q, _)| *q).collect(),
        atoms,
        root,
        conjunctive,
        watch,
        base,
        alive,
        removed: Vec::new(),
        values: vec![None; n],
        trace: Vec::new(),
        meter: Meter::new(budget.nodes),
    };
    let truth = c.run();
    Ok(CheckOutcome {
        truth,
        trace: if truth == Some(true) { c.trace } else { Vec::new() },
        explored: c.meter.spent(),
    })
}

fn is_conjunctive(m: &Matrix) -> bool {
    match m {
        Matrix::Atom(_) => true,
        Matrix::And(ps) => ps.iter().all(is_conjunctive),
        Matrix::Or(ps) => ps.len() == 1 && is_conjunctive(&ps[0]),
    }
}

fn compile(
    m: &Matrix,
    s: &Structure,
    index: &HashMap<&str, usize>,
    atoms: &mut Vec<CAtom>,
) -> Result<Node> {
    Ok(match m {
        Matrix::Atom(a) => {
            let var = |v: &String| {
                index
                    .get(v.as_str())
                    .copied()
                    .ok_or_else(|| Error::UnboundVariable(v.clone()))
            };
            let c = match a {
                Atom::Rel { symbol, args } => CAtom {
                    rel: s.signature().index_of(symbol),
                    args: args.iter().map(var).collect::<Result<_>>()?,
                },
                Atom::Eq(x, y) => CAtom {
                    rel: None,
                    args: vec![var(x)?, var(y)?],
                },
            };
            atoms.push(c);
            Node::Atom(atoms.len() - 1)
        }
        Matrix::And(ps) => Node::And(
            ps.iter()
                .map(|p| compile(p, s, index, atoms))
                .collect::<Result<_>>()?,
        ),
        Matrix::Or(ps) => Node::Or(
            ps.iter()
                .map(|p| compile(p, s, index, atoms))
                .collect::<Result<_>>()?,
        ),
    })
}

impl Checker<'_> {
    fn run(&mut self) -> Option<bool> {
        self.search(0)
    }

    fn atom_holds(&self, a: &CAtom, vals: &[usize]) -> bool {
        match a.rel {
            Some(r) => self.s.holds(r, vals),
            None => vals[0] == vals[1],
        }
    }

    fn eval_atom(&self, ai: usize) -> Tri {
        let a = &self.atoms[ai];
        let mut vals = Vec::with_capacity(a.args.len());
        for &v in &a.args {
            match self.values[v] {
                Some(x) => vals.push(x),
                None => return Tri::Open,
            }
        }
        if self.atom_holds(a, &vals) {
            Tri::True
        } else {
            Tri::False
        }
    }

    fn eval(&self, node: &Node) -> Tri {
        match node {
            Node::Atom(ai) => self.eval_atom(*ai),
            Node::And(ps) => {
                let mut out = Tri::True;
                for p in ps {
                    match self.eval(p) {
                        Tri::False => return Tri::False,
                        Tri::Open => out = Tri::Open,
                        Tri::True => {}
                    }
                }
                out
            }
            Node::Or(ps) => {
                let mut out = Tri::False;
                for p in ps {
                    match self.eval(p) {
                        Tri::True => return Tri::True,
                        Tri::Open => out = Tri::Open,
                        Tri::False => {}
                    }
                }
                out
            }
        }
    }

    /// Filters the ranges of later variables through atoms in which they are
    /// the only unassigned variable. `false` if some existential range
    /// empties or some universal range loses a value.
    fn forward_check(&mut self, var: usize) -> bool {
        for wi in 0..self.watch[var].len() {
            let ai = self.watch[var][wi];
            let a = &self.atoms[ai];
            let mut open = None;
            let mut single = true;
            for &v in &a.args {
                if self.values[v].is_none() {
                    match open {
                        None => open = Some(v),
                        Some(o) if o == v => {}
                        Some(_) => single = false,
                    }
                }
            }
            let Some(j) = open else { continue };
            if !single {
                continue;
            }
            for vi in 0..self.base[j].len() {
                let x = self.base[j][vi];
                if !self.alive[j][x] {
                    continue;
                }
                let vals: Vec<usize> = self.atoms[ai]
                    .args
                    .iter()
                    .map(|&v| if v == j { x } else { self.values[v].unwrap() })
                    .collect();
                if !self.atom_holds(&self.atoms[ai], &vals) {
                    if self.quants[j] == Quantifier::Forall {
                        return false;
                    }
                    self.alive[j][x] = false;
                    self.removed.push((j, x));
                }
            }
            if !self.base[j].iter().any(|&x| self.alive[j][x]) {
                return false;
            }
        }
        true
    }

    fn restore(&mut self, mark: usize) {
        while self.removed.len() > mark {
            let (j, x) = self.removed.pop().unwrap();
            self.alive[j][x] = true;
        }
    }

    fn context(&self, upto: usize) -> Vec<(String, usize)> {
        (0..upto)
            .filter_map(|i| self.values[i].map(|x| (self.names[i].clone(), x)))
            .collect()
    }

    fn search(&mut self, depth: usize) -> Option<bool> {
        if !self.meter.tick() {
            return None;
        }
        if depth == self.quants.len() {
            return Some(self.eval(&self.root) == Tri::True);
        }
        let candidates: Vec<usize> = self.base[depth]
            .iter()
            .copied()
            .filter(|&x| self.alive[depth][x])
            .collect();
        let universal = self.quants[depth] == Quantifier::Forall;
        if universal && candidates.len() < self.base[depth].len() {
            return Some(false);
        }
        if !universal && candidates.is_empty() {
            return Some(false);
        }
        for x in candidates {
            self.values[depth] = Some(x);
            let mark = self.removed.len();
            let trace_mark = self.trace.len();
            let outcome = match self.eval(&self.root) {
                Tri::True => Some(true),
                Tri::False => Some(false),
                Tri::Open => {
                    if self.conjunctive && !self.forward_check(depth) {
                        Some(false)
                    } else {
                        self.search(depth + 1)
                    }
                }
            };
            self.restore(mark);
            match outcome {
                None => {
                    self.values[depth] = None;
                    return None;
                }
                Some(true) if !universal => {
                    self.trace.insert(
                        trace_mark,
                        StrategyStep {
                            context: self.context(depth),
                            variable: self.names[depth].clone(),
                            value: x,
                        },
                    );
                    self.values[depth] = None;
                    return Some(true);
                }
                Some(false) if universal => {
                    self.trace.truncate(trace_mark);
                    self.values[depth] = None;
                    return Some(false);
                }
                Some(false) => self.trace.truncate(trace_mark),
                Some(true) => {}
            }
        }
        self.values[depth] = None;
        Some(universal)
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse_formula;
    use super::*;
    use crate::corpus::fixture;

    fn holds(name: &str, text: &str) -> bool {
        let s = fixture(name);
        let f = parse_formula(text, s.signature()).unwrap();
        model_check(&s, &f, &Budget::default()).unwrap().holds()
    }

    #[test]
    fn simple_sentences() {
        assert!(holds("K2", "forall x . exists y . E(x,y)"));
        assert!(holds("NONIND_B", "forall x . exists y . E(x,y)"));
        assert!(!holds("K2_K1", "forall x . exists y . E(x,y)"));
        assert!(holds("K1star", "forall x . x=x"));
        assert!(!holds("K2", "forall x . forall y . x=y"));
        assert!(holds("K1star", "forall x . forall y . x=y"));
        assert!(holds("P110", "exists x . forall y . (E(x,y) | E(y,y))"));
        assert!(!holds("C4", "exists x . exists y . exists z . (E(x,y) & E(y,z) & E(z,x))"));
        assert!(holds("C3", "exists x . exists y . exists z . (E(x,y) & E(y,z) & E(z,x))"));
    }

    #[test]
    fn trace_records_choices() {
        let s = fixture("K2");
        let f = parse_formula("forall x . exists y . E(x,y)", s.signature()).unwrap();
        let out = model_check(&s, &f, &Budget::default()).unwrap();
        assert_eq!(out.trace.len(), 2);
        assert_eq!(out.trace[0].context, vec![("x".to_string(), 0)]);
        assert_eq!(out.trace[0].value, 1);
        assert_eq!(out.trace[1].value, 0);
    }

    #[test]
    fn relativized_ranges() {
        let s = fixture("K2_K1");
        let f = parse_formula("forall x . exists y . E(x,y)", s.signature()).unwrap();
        let rel = Relativization {
            universal: Some(BTreeSet::from([0, 1])),
            existential: None,
        };
        let out = model_check_relativized(&s, &f, &rel, &Budget::default()).unwrap();
        assert!(out.holds());
    }

    #[test]
    fn budget_gives_unknown() {
        let s = fixture("C6");
        let f = parse_formula(
            "exists a . exists b . exists c . (E(a,b) & E(b,c) & E(c,a))",
            s.signature(),
        )
        .unwrap();
        let out = model_check(&s, &f, &Budget::default().with_nodes(3)).unwrap();
        assert_eq!(out.truth, None);
        assert!(out.verdict().is_unknown());
    }
}
