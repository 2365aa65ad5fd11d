//! Randomised invariants over small structures.

mod common;

use common::{preserves, SENTENCE_POOL};
use proptest::prelude::*;
use qcore::containment::{contains, Fragment};
use qcore::cores::core;
use qcore::logic::{model_check, parse_formula, render_formula};
use qcore::morphism::find_homomorphism;
use qcore::structure::{parse_structure, power, power_coordinates, render_structure};
use qcore::{Budget, Signature, Structure};

fn mixed(n: usize, edges: u64, marks: u64) -> Structure {
    let sig = Signature::new([("E", 2), ("U", 1)]).unwrap();
    let e = (0..n * n)
        .filter(|&c| edges >> c & 1 == 1)
        .map(|c| vec![c / n, c % n])
        .collect();
    let u = (0..n).filter(|&x| marks >> x & 1 == 1).map(|x| vec![x]).collect();
    Structure::from_tuples(sig, n, vec![e, u]).unwrap()
}

fn digraph() -> impl Strategy<Value = Structure> {
    (1usize..=3).prop_flat_map(|n| {
        (0u64..1 << (n * n)).prop_map(move |mask| {
            let edges: Vec<(usize, usize)> = (0..n * n)
                .filter(|&c| mask >> c & 1 == 1)
                .map(|c| (c / n + 1, c % n + 1))
                .collect();
            Structure::digraph(n, &edges).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rendering_round_trips(n in 1usize..=4, edges in any::<u64>(), marks in any::<u64>()) {
        let s = mixed(n, edges, marks);
        prop_assert_eq!(parse_structure(&render_structure(&s)).unwrap(), s);
    }

    #[test]
    fn containment_is_reflexive(a in digraph()) {
        let budget = Budget::default();
        for f in [Fragment::Pp, Fragment::Ph, Fragment::Pef, Fragment::Pos] {
            prop_assert!(contains(f, &a, &a, &budget).unwrap().is_yes(), "{f}\n{a}");
        }
    }

    #[test]
    fn stronger_fragments_imply_weaker_ones(a in digraph(), b in digraph()) {
        let budget = Budget::default();
        let verdicts: Vec<_> = [Fragment::Pos, Fragment::Pef, Fragment::Ph, Fragment::Pp]
            .into_iter()
            .map(|f| contains(f, &a, &b, &budget).unwrap())
            .collect();
        for w in verdicts.windows(2) {
            prop_assert!(!w[0].is_yes() || !w[1].is_no(), "\n{a}\n{b}");
        }
    }

    #[test]
    fn horn_containment_transfers_sentences(a in digraph(), b in digraph()) {
        let budget = Budget::default();
        if !contains(Fragment::Ph, &a, &b, &budget).unwrap().is_yes() {
            return Ok(());
        }
        for text in SENTENCE_POOL.iter().filter(|s| !s.contains('|')) {
            let f = parse_formula(text, a.signature()).unwrap();
            if model_check(&a, &f, &budget).unwrap().truth == Some(true) {
                prop_assert_eq!(model_check(&b, &f, &budget).unwrap().truth, Some(true), "{}", text);
            }
        }
    }

    #[test]
    fn cores_are_their_own_cores(a in digraph()) {
        let budget = Budget::default();
        let c = core(&a, &budget).unwrap().representative.structure;
        prop_assert_eq!(core(&c, &budget).unwrap().size(), c.size());
        prop_assert!(find_homomorphism(&a, &c, false, &budget).unwrap().is_yes());
        prop_assert!(find_homomorphism(&c, &a, false, &budget).unwrap().is_yes());
    }

    #[test]
    fn projections_of_powers_are_homomorphisms(a in digraph(), j in 1u32..=3) {
        let p = power(&a, j, 1 << 12).unwrap();
        prop_assert_eq!(p.size(), a.size().pow(j));
        for k in 0..j as usize {
            let proj: Vec<usize> = (0..p.size())
                .map(|i| power_coordinates(a.size(), j as usize, i)[k])
                .collect();
            prop_assert!(preserves(&p, &a, &proj));
        }
    }
}

#[test]
fn pool_sentences_round_trip() {
    let sig = Signature::digraph();
    for text in SENTENCE_POOL {
        let f = parse_formula(text, &sig).unwrap();
        let again = parse_formula(&render_formula(&f), &sig).unwrap();
        assert_eq!(f, again, "{text}");
    }
}
