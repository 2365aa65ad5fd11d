#![allow(dead_code)]

use std::collections::BTreeSet;

use qcore::structure::{canonical_form, Signature, Structure};

/// Every digraph on `n` vertices, indexed by its adjacency bitmask.
pub fn all_digraphs(n: usize) -> Vec<Structure> {
    let cells = n * n;
    (0..1u64 << cells)
        .map(|mask| {
            let edges: Vec<(usize, usize)> = (0..cells)
                .filter(|&c| mask >> c & 1 == 1)
                .map(|c| (c / n + 1, c % n + 1))
                .collect();
            Structure::digraph(n, &edges).unwrap()
        })
        .collect()
}

/// One representative per isomorphism class.
pub fn up_to_iso(list: impl IntoIterator<Item = Structure>) -> Vec<Structure> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for s in list {
        if seen.insert(format!("{}", canonical_form(&s))) {
            out.push(s);
        }
    }
    out
}

/// Symmetric graphs on `n` vertices; `loops` allows self-loops.
pub fn all_graphs(n: usize, loops: bool) -> Vec<Structure> {
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i..n).map(move |j| (i, j)))
        .filter(|&(i, j)| loops || i != j)
        .collect();
    (0..1u64 << pairs.len())
        .map(|mask| {
            let mut edges = Vec::new();
            for (k, &(i, j)) in pairs.iter().enumerate() {
                if mask >> k & 1 == 1 {
                    edges.push((i + 1, j + 1));
                    if i != j {
                        edges.push((j + 1, i + 1));
                    }
                }
            }
            Structure::digraph(n, &edges).unwrap()
        })
        .collect()
}

/// All structures on `n` elements over `k` unary predicates.
pub fn all_unary(n: usize, k: usize) -> Vec<Structure> {
    let sig = Signature::new((0..k).map(|i| (format!("U{i}"), 1))).unwrap();
    (0..1u64 << (n * k))
        .map(|mask| {
            let rels = (0..k)
                .map(|p| {
                    (0..n)
                        .filter(|&e| mask >> (p * n + e) & 1 == 1)
                        .map(|e| vec![e])
                        .collect()
                })
                .collect();
            Structure::from_tuples(sig.clone(), n, rels).unwrap()
        })
        .collect()
}

/// Every map `0..n -> 0..m` in lexicographic order.
pub fn all_maps(n: usize, m: usize) -> impl Iterator<Item = Vec<usize>> {
    let total = (m as u64).pow(n as u32);
    (0..total).map(move |mut code| {
        let mut map = vec![0; n];
        for slot in map.iter_mut().rev() {
            *slot = (code % m as u64) as usize;
            code /= m as u64;
        }
        map
    })
}

pub fn preserves(a: &Structure, b: &Structure, map: &[usize]) -> bool {
    (0..a.signature().len()).all(|r| {
        a.relation(r)
            .iter()
            .all(|t| b.holds(r, &t.iter().map(|&e| map[e]).collect::<Vec<_>>()))
    })
}

/// Lexicographically least (surjective) homomorphism by enumeration.
pub fn brute_hom(a: &Structure, b: &Structure, surjective: bool) -> Option<Vec<usize>> {
    all_maps(a.size(), b.size()).find(|m| {
        preserves(a, b, m) && (!surjective || m.iter().collect::<BTreeSet<_>>().len() == b.size())
    })
}

/// Whether some total surjective set-valued map preserves every tuple under
/// every choice of images.
pub fn brute_hyper(a: &Structure, b: &Structure) -> bool {
    let subsets = (1u64 << b.size()) - 1;
    all_maps(a.size(), subsets as usize).any(|codes| {
        let sets: Vec<u64> = codes.iter().map(|&c| c as u64 + 1).collect();
        let covered = sets.iter().fold(0, |acc, s| acc | s);
        covered == subsets && preserves_sets(a, b, &sets)
    })
}

fn preserves_sets(a: &Structure, b: &Structure, sets: &[u64]) -> bool {
    (0..a.signature().len()).all(|r| {
        a.relation(r).iter().all(|t| {
            let choices: Vec<Vec<usize>> = t
                .iter()
                .map(|&e| (0..b.size()).filter(|&y| sets[e] >> y & 1 == 1).collect())
                .collect();
            every_choice(&choices, &mut Vec::new(), &mut |img| b.holds(r, img))
        })
    })
}

fn every_choice(
    choices: &[Vec<usize>],
    prefix: &mut Vec<usize>,
    f: &mut impl FnMut(&[usize]) -> bool,
) -> bool {
    if prefix.len() == choices.len() {
        return f(prefix);
    }
    for &c in &choices[prefix.len()] {
        prefix.push(c);
        let ok = every_choice(choices, prefix, f);
        prefix.pop();
        if !ok {
            return false;
        }
    }
    true
}

/// Direct product power built without the library's power routine.
pub fn brute_power(a: &Structure, j: u32) -> Structure {
    let n = a.size();
    let size = n.pow(j);
    let coords = |idx: usize| -> Vec<usize> {
        let mut c = vec![0; j as usize];
        let mut rest = idx;
        for slot in c.iter_mut().rev() {
            *slot = rest % n;
            rest /= n;
        }
        c
    };
    let mut rels = Vec::new();
    for r in 0..a.signature().len() {
        let arity = a.signature().arity(r);
        let mut tuples = Vec::new();
        for t in all_maps(arity, size) {
            let ok = (0..j as usize).all(|k| {
                let proj: Vec<usize> = t.iter().map(|&e| coords(e)[k]).collect();
                a.holds(r, &proj)
            });
            if ok {
                tuples.push(t);
            }
        }
        rels.push(tuples);
    }
    Structure::from_tuples(a.signature().clone(), size, rels).unwrap()
}

/// Twenty sentences over one binary symbol `E`, mixing quantifier
/// patterns, conjunction and disjunction.
pub const SENTENCE_POOL: [&str; 20] = [
    "exists x . E(x,x)",
    "forall x . E(x,x)",
    "exists x . exists y . E(x,y)",
    "forall x . exists y . E(x,y)",
    "forall x . exists y . E(y,x)",
    "exists x . forall y . E(x,y)",
    "exists x . forall y . E(y,x)",
    "forall x . exists y . (E(x,y) & E(y,x))",
    "forall x . exists y . (E(x,y) & E(y,y))",
    "exists x . exists y . exists z . (E(x,y) & E(y,z) & E(z,x))",
    "forall x . forall y . exists z . (E(x,z) & E(z,y))",
    "forall x . exists y . exists z . (E(x,y) & E(y,z) & E(z,z))",
    "forall x . forall y . E(x,y)",
    "exists x . exists y . (E(x,y) & E(y,x))",
    "forall x . exists y . (E(x,x) | E(x,y))",
    "forall x . exists y . (E(x,x) | (E(x,y) & E(y,y)))",
    "forall x . forall y . (E(x,y) | E(y,x) | E(x,x))",
    "exists x . forall y . (E(x,y) | E(y,y))",
    "forall x . exists y . exists z . (E(x,y) & E(z,x))",
    "forall x . forall y . exists z . ((E(z,x) & E(z,y)) | E(x,y))",
];

/// The pool members that lie in the positive Horn fragment.
pub fn horn_pool() -> Vec<&'static str> {
    SENTENCE_POOL.iter().copied().filter(|s| !s.contains('|')).collect()
}
