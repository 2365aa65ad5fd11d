use std::fmt;

use super::{model_check, Formula, Matrix, Quantifier};
use crate::error::{Error, Result};
use crate::structure::{isolated_elements, power, power_coordinates, power_index, Signature, Structure};
use crate::verdict::Budget;

/// Atoms realised by `tuple` in `a`, over the given variable names.
fn realised_atoms(a: &Structure, tuple: &[usize], names: &[String]) -> Vec<Matrix> {
    let mut out = Vec::new();
    let len = tuple.len();
    for (r, sym) in a.signature().symbols().iter().enumerate() {
        let count = len.pow(sym.arity as u32);
        for idx in 0..count {
            let lambda = power_coordinates(len, sym.arity, idx);
            let image: Vec<usize> = lambda.iter().map(|&l| tuple[l]).collect();
            if a.holds(r, &image) {
                out.push(Matrix::Atom(super::Atom::Rel {
                    symbol: sym.name.clone(),
                    args: lambda.iter().map(|&l| names[l].clone()).collect(),
                }));
            }
        }
    }
    out
}

fn names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

/// The conjunction of all facts realised by `r` over variables `v1..`,
/// optionally closed existentially.
pub fn canonical_query(a: &Structure, r: &[usize], quantified: bool) -> Result<Formula> {
    if r.is_empty() {
        return Err(Error::EmptySubset);
    }
    if let Some(&e) = r.iter().find(|&&e| e >= a.size()) {
        return Err(Error::OutOfRange {
            element: e + 1,
            size: a.size(),
        });
    }
    let vars = names("v", r.len());
    let matrix = Matrix::and(realised_atoms(a, r, &vars));
    let prefix = if quantified {
        vars.iter().map(|v| (Quantifier::Exists, v.clone())).collect()
    } else {
        Vec::new()
    };
    Ok(Formula { prefix, matrix })
}

/// `exists v . forall w1..wm . phi_A(v) & OR_{t in A^m} phi_{A(v,t)}(v,w)`.
pub fn canonical_theta(a: &Structure, m: u32, budget: &Budget) -> Result<Formula> {
    if m == 0 {
        return Err(Error::Precondition("theta needs m >= 1".into()));
    }
    let n = a.size();
    let disjuncts = (n as u128).checked_pow(m).unwrap_or(u128::MAX);
    if disjuncts > budget.power_elements as u128 {
        return Err(Error::BudgetExceeded {
            what: "theta disjuncts",
            required: disjuncts,
            limit: budget.power_elements as u128,
        });
    }
    let m = m as usize;
    let v = names("v", n);
    let w = names("w", m);
    let all: Vec<String> = v.iter().chain(&w).cloned().collect();
    let enumeration: Vec<usize> = (0..n).collect();
    let base = Matrix::and(realised_atoms(a, &enumeration, &v));
    let mut options = Vec::new();
    for idx in 0..disjuncts as usize {
        let t = power_coordinates(n, m, idx);
        let tuple: Vec<usize> = enumeration.iter().copied().chain(t).collect();
        options.push(Matrix::and(realised_atoms(a, &tuple, &all)));
    }
    let prefix = v
        .iter()
        .map(|x| (Quantifier::Exists, x.clone()))
        .chain(w.iter().map(|x| (Quantifier::Forall, x.clone())))
        .collect();
    Ok(Formula {
        prefix,
        matrix: Matrix::And(vec![base, Matrix::or(options)]),
    })
}

/// `forall w1..wm exists v . phi` where `phi` is the canonical query of
/// `A^(|A|^m)` and `w_i` names the diagonal element whose coordinate at
/// `t in A^m` is `t[i]`.
pub fn canonical_psi(a: &Structure, m: u32, budget: &Budget) -> Result<Formula> {
    if m == 0 {
        return Err(Error::Precondition("psi needs m >= 1".into()));
    }
    let n = a.size();
    let limit = budget.power_elements as u128;
    let too_big = |required: u128| Error::BudgetExceeded {
        what: "psi power elements",
        required,
        limit,
    };
    let index_count = (n as u128).checked_pow(m).ok_or_else(|| too_big(u128::MAX))?;
    if index_count > 64 {
        return Err(too_big(u128::MAX));
    }
    let size = (n as u128)
        .checked_pow(index_count as u32)
        .ok_or_else(|| too_big(u128::MAX))?;
    if size > limit {
        return Err(too_big(size));
    }
    let atom_count: u128 = a
        .relations()
        .iter()
        .map(|r| (r.len() as u128).saturating_pow(index_count as u32))
        .sum();
    if atom_count > limit {
        return Err(Error::BudgetExceeded {
            what: "psi atoms",
            required: atom_count,
            limit,
        });
    }
    let big = power(a, index_count as u32, budget.power_elements)?;
    let m = m as usize;
    let n_idx = index_count as usize;
    let mut label: Vec<Option<String>> = vec![None; big.size()];
    let mut prefix = Vec::new();
    for i in 0..m {
        let coords: Vec<usize> = (0..n_idx)
            .map(|k| power_coordinates(n, m, k)[i])
            .collect();
        let e = power_index(n, &coords);
        if label[e].is_none() {
            let name = format!("w{}", i + 1);
            label[e] = Some(name.clone());
            prefix.push((Quantifier::Forall, name));
        }
    }
    let mut k = 0;
    for slot in label.iter_mut() {
        if slot.is_none() {
            k += 1;
            let name = format!("v{k}");
            *slot = Some(name.clone());
            prefix.push((Quantifier::Exists, name));
        }
    }
    let label: Vec<String> = label.into_iter().map(Option::unwrap).collect();
    let mut atoms = Vec::new();
    for (r, t) in big.facts() {
        atoms.push(Matrix::Atom(super::Atom::Rel {
            symbol: a.signature().symbols()[r].name.clone(),
            args: t.iter().map(|&e| label[e].clone()).collect(),
        }));
    }
    Ok(Formula {
        prefix,
        matrix: Matrix::and(atoms),
    })
}

/// `forall x1 exists x2.. R(..)` with `x1` in each argument position of
/// each symbol, in signature order.
pub fn minimal_proper_ph_sentences(sig: &Signature) -> Vec<Formula> {
    let mut out = Vec::new();
    for sym in sig.symbols() {
        let vars = names("x", sym.arity);
        for p in 0..sym.arity {
            let mut rest = vars[1..].iter();
            let args: Vec<String> = (0..sym.arity)
                .map(|k| {
                    if k == p {
                        vars[0].clone()
                    } else {
                        rest.next().unwrap().clone()
                    }
                })
                .collect();
            let mut prefix = vec![(Quantifier::Forall, vars[0].clone())];
            prefix.extend(vars[1..].iter().map(|v| (Quantifier::Exists, v.clone())));
            out.push(Formula {
                prefix,
                matrix: Matrix::Atom(super::Atom::Rel {
                    symbol: sym.name.clone(),
                    args,
                }),
            });
        }
    }
    out
}

/// The three readings of "satisfies no proper positive Horn sentence".
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProperPhReport {
    /// `true` when no minimal proper sentence holds.
    pub satisfies_none: bool,
    /// Per minimal sentence, an element violating it (`None` if it holds).
    pub falsifiers: Vec<Option<usize>>,
    /// An isolated element of the `r`-th power, as a coordinate tuple.
    pub isolated_tuple: Option<Vec<usize>>,
    /// For the digraph signature: whether there is a vertex without
    /// out-edges and one without in-edges.
    pub source_and_sink: Option<bool>,
}

pub fn satisfies_no_proper_ph(a: &Structure, budget: &Budget) -> Result<ProperPhReport> {
    let sig = a.signature();
    let sentences = minimal_proper_ph_sentences(sig);
    let mut falsifiers = Vec::new();
    let mut model_checked = Vec::new();
    let mut pos = 0;
    for (r, sym) in sig.symbols().iter().enumerate() {
        for p in 0..sym.arity {
            let holds = model_check(a, &sentences[pos], budget)?
                .truth
                .ok_or(Error::BudgetExceeded {
                    what: "model checking nodes",
                    required: budget.nodes as u128 + 1,
                    limit: budget.nodes as u128,
                })?;
            model_checked.push(holds);
            let witness = (0..a.size()).find(|&x| !a.relation(r).iter().any(|t| t[p] == x));
            if holds != witness.is_none() {
                return Err(Error::InvariantViolation(format!(
                    "sentence {} disagrees with its direct reading",
                    sentences[pos]
                )));
            }
            falsifiers.push(witness);
            pos += 1;
        }
    }
    let by_sentences = model_checked.iter().all(|h| !h);

    let r = sig.total_arity() as u32;
    let pw = power(a, r.max(1), budget.power_elements)?;
    let isolated = isolated_elements(&pw);
    let by_power = !isolated.is_empty();
    let isolated_tuple = if by_sentences {
        let t: Vec<usize> = falsifiers.iter().map(|f| f.unwrap()).collect();
        let padded = if t.is_empty() { vec![0] } else { t };
        if !isolated.contains(&power_index(a.size(), &padded)) {
            return Err(Error::InvariantViolation(
                "tuple of falsifiers is not isolated in the power".into(),
            ));
        }
        Some(padded)
    } else {
        isolated
            .iter()
            .next()
            .map(|&i| power_coordinates(a.size(), r.max(1) as usize, i))
    };

    let source_and_sink = if *sig == Signature::digraph() {
        let e = a.relation(0);
        let no_out = (0..a.size()).any(|x| !e.iter().any(|t| t[0] == x));
        let no_in = (0..a.size()).any(|x| !e.iter().any(|t| t[1] == x));
        Some(no_out && no_in)
    } else {
        None
    };

    if by_sentences != by_power || source_and_sink.is_some_and(|s| s != by_sentences) {
        return Err(Error::InvariantViolation(format!(
            "characterisations disagree: sentences {by_sentences}, power {by_power}, \
             source/sink {source_and_sink:?}"
        )));
    }
    Ok(ProperPhReport {
        satisfies_none: by_sentences,
        falsifiers,
        isolated_tuple,
        source_and_sink,
    })
}

/// Bitwise conjunction of the predicate words of all elements of a unary
/// structure, with the matching sentence `forall y . w(y)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UniversalWord {
    pub bits: Vec<bool>,
    pub sentence: Formula,
}

impl fmt::Display for UniversalWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// The word of predicates satisfied by `x`.
pub(crate) fn element_word(a: &Structure, x: usize) -> Vec<bool> {
    (0..a.signature().len()).map(|r| a.holds(r, &[x])).collect()
}

pub fn canonical_universal_word(a: &Structure) -> Result<UniversalWord> {
    if !a.signature().is_unary() {
        return Err(Error::NotUnary);
    }
    let k = a.signature().len();
    let mut bits = vec![true; k];
    for x in 0..a.size() {
        for (b, w) in bits.iter_mut().zip(element_word(a, x)) {
            *b &= w;
        }
    }
    let atoms = a
        .signature()
        .symbols()
        .iter()
        .zip(&bits)
        .filter(|(_, &b)| b)
        .map(|(s, _)| Matrix::rel(&s.name, &["y"]))
        .collect();
    Ok(UniversalWord {
        bits,
        sentence: Formula {
            prefix: vec![(Quantifier::Forall, "y".into())],
            matrix: Matrix::and(atoms),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::super::render_formula;
    use super::*;
    use crate::corpus::fixture;
    use crate::structure::parse_structure;

    fn budget() -> Budget {
        Budget::default()
    }

    #[test]
    fn canonical_queries() {
        let q = canonical_query(&fixture("K1star"), &[0], true).unwrap();
        assert_eq!(render_formula(&q), "exists v1 . E(v1,v1)");
        let q = canonical_query(&fixture("K2"), &[0, 1], true).unwrap();
        assert_eq!(render_formula(&q), "exists v1 . exists v2 . (E(v1,v2) & E(v2,v1))");
        assert!(canonical_query(&fixture("K2"), &[2], true).is_err());
    }

    #[test]
    fn theta_of_a_loop() {
        let t = canonical_theta(&fixture("K1star"), 1, &budget()).unwrap();
        assert_eq!(
            render_formula(&t),
            "exists v1 . forall w1 . (E(v1,v1) & (E(v1,v1) & E(v1,w1) & E(w1,v1) & E(w1,w1)))"
        );
        assert!(model_check(&fixture("K1star"), &t, &budget()).unwrap().holds());
    }

    #[test]
    fn psi_of_a_loop_and_of_an_edge() {
        let p = canonical_psi(&fixture("K1star"), 1, &budget()).unwrap();
        assert_eq!(render_formula(&p), "forall w1 . E(w1,w1)");
        let k2 = fixture("K2");
        for m in 1..=2 {
            let p = canonical_psi(&k2, m, &budget()).unwrap();
            assert!(model_check(&k2, &p, &budget()).unwrap().holds());
        }
        assert!(matches!(
            canonical_psi(&fixture("C4"), 3, &budget()),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn minimal_sentences() {
        let e: Vec<String> = minimal_proper_ph_sentences(&Signature::digraph())
            .iter()
            .map(render_formula)
            .collect();
        assert_eq!(
            e,
            vec!["forall x1 . exists x2 . E(x1,x2)", "forall x1 . exists x2 . E(x2,x1)"]
        );
        let r = Signature::new([("R", 1)]).unwrap();
        let r: Vec<String> = minimal_proper_ph_sentences(&r).iter().map(render_formula).collect();
        assert_eq!(r, vec!["forall x1 . R(x1)"]);
        let er = Signature::new([("E", 2), ("R", 1)]).unwrap();
        assert_eq!(minimal_proper_ph_sentences(&er).len(), 3);
        assert!(minimal_proper_ph_sentences(&er).iter().all(Formula::is_proper));
    }

    #[test]
    fn no_proper_sentence_reports() {
        let rep = satisfies_no_proper_ph(&fixture("K2_K1"), &budget()).unwrap();
        assert!(rep.satisfies_none);
        assert_eq!(rep.falsifiers, vec![Some(2), Some(2)]);
        assert_eq!(rep.isolated_tuple, Some(vec![2, 2]));
        assert_eq!(rep.source_and_sink, Some(true));
        let rep = satisfies_no_proper_ph(&fixture("K1star"), &budget()).unwrap();
        assert!(!rep.satisfies_none);
        let edge = parse_structure("signature: E/2\ndomain: 2\nE: (1,2)").unwrap();
        let rep = satisfies_no_proper_ph(&edge, &budget()).unwrap();
        assert!(rep.satisfies_none);
        assert_eq!(rep.falsifiers, vec![Some(1), Some(0)]);
    }

    #[test]
    fn universal_words() {
        let a = parse_structure("signature: M1/1 M2/1\ndomain: 2\nM1: (1) (2)\nM2: (1)").unwrap();
        let w = canonical_universal_word(&a).unwrap();
        assert_eq!(w.to_string(), "10");
        assert_eq!(render_formula(&w.sentence), "forall y . M1(y)");
        let full = parse_structure("signature: M1/1 M2/1\ndomain: 1\nM1: (1)\nM2: (1)").unwrap();
        assert_eq!(canonical_universal_word(&full).unwrap().to_string(), "11");
        let none = parse_structure("signature: M1/1 M2/1\ndomain: 2\nM1: (1)\nM2: (1)").unwrap();
        let w = canonical_universal_word(&none).unwrap();
        assert_eq!(w.to_string(), "00");
        assert_eq!(render_formula(&w.sentence), "forall y . true");
        assert!(matches!(canonical_universal_word(&fixture("K2")), Err(Error::NotUnary)));
    }
}
