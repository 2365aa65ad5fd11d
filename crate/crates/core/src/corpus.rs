//! Named fixture structures. Each fixture checks its defining property the
//! first time the corpus is loaded.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::morphism::{
    automorphisms, find_surjective_hom_from_power, Hypermorphism,
};
use crate::structure::{parse_structure, product, Structure};
use crate::verdict::Budget;

#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: &'static str,
    pub structure: Structure,
    pub provenance: &'static str,
    pub tags: &'static [&'static str],
}

struct Source {
    name: &'static str,
    text: &'static str,
    provenance: &'static str,
    tags: &'static [&'static str],
}

macro_rules! source {
    ($name:literal, $prov:literal, $tags:expr) => {
        Source {
            name: $name,
            text: include_str!(concat!("../../../corpus/", $name, ".txt")),
            provenance: $prov,
            tags: $tags,
        }
    };
}

const SOURCES: &[Source] = &[
    source!("2K1", "two isolated irreflexive vertices", &["graph", "edgeless"]),
    source!("2K2", "two disjoint edges; the square of K2", &["graph", "bipartite"]),
    source!(
        "A4fix",
        "reconstruction of the four-element example graph, pinned by its three set-valued maps",
        &["graph", "reconstruction"]
    ),
    source!("C3", "triangle, the irreflexive 3-clique", &["graph", "odd-cycle"]),
    source!("C4", "4-cycle", &["graph", "bipartite", "pseudoforest"]),
    source!("C6", "6-cycle", &["graph", "bipartite"]),
    source!(
        "H1",
        "Boolean-like 3-element graph with no non-trivial automorphism that is not its own Q-core",
        &["digraph"]
    ),
    source!("K1", "irreflexive 1-clique", &["graph", "forest"]),
    source!("K1star", "reflexive 1-clique", &["graph", "forest"]),
    source!("K2", "irreflexive 2-clique", &["graph", "forest", "bipartite"]),
    source!("K2_K1", "an edge plus an isolated vertex", &["graph", "forest"]),
    source!(
        "LB2_A",
        "oriented 2-cycle with R on all vertices but one",
        &["lower-bound"]
    ),
    source!(
        "LB2_B",
        "oriented 2-cycle without R together with an R-marked self-loop",
        &["lower-bound"]
    ),
    source!(
        "LB3_A",
        "oriented 3-cycle with R on all vertices but one",
        &["lower-bound"]
    ),
    source!(
        "LB3_B",
        "oriented 3-cycle without R together with an R-marked self-loop",
        &["lower-bound"]
    ),
    source!(
        "NONIND_A",
        "3-element structure whose Q-core is not induced",
        &["non-induced"]
    ),
    source!(
        "NONIND_B",
        "weak substructure of NONIND_A, equivalent to it under positive Horn sentences",
        &["non-induced"]
    ),
    source!(
        "P010fix",
        "path with a looped centre and two unlooped leaves",
        &["graph", "forest"]
    ),
    source!("P01fix", "an edge with one loop", &["graph", "forest"]),
    source!("P110", "3-path with loops on the first two vertices", &["graph", "forest"]),
];

const ALIASES: &[(&str, &str)] = &[("K1*", "K1star"), ("K2+K1", "K2_K1")];

/// Names of all fixtures, sorted.
pub fn list_fixtures() -> Vec<&'static str> {
    SOURCES.iter().map(|s| s.name).collect()
}

/// Looks a fixture up by name or alias.
pub fn get_fixture(name: &str) -> Result<Fixture> {
    let canonical = ALIASES
        .iter()
        .find(|(alias, _)| *alias == name)
        .map_or(name, |(_, target)| *target);
    loaded()
        .iter()
        .find(|f| f.name == canonical)
        .cloned()
        .ok_or_else(|| Error::UnknownFixture(name.to_string()))
}

/// Shorthand for the structure of a fixture known to exist.
pub fn fixture(name: &str) -> Structure {
    get_fixture(name)
        .unwrap_or_else(|e| panic!("{e}"))
        .structure
}

fn loaded() -> &'static [Fixture] {
    static CORPUS: OnceLock<Vec<Fixture>> = OnceLock::new();
    CORPUS.get_or_init(|| {
        let fixtures: Vec<Fixture> = SOURCES
            .iter()
            .map(|s| Fixture {
                name: s.name,
                structure: parse_structure(s.text)
                    .unwrap_or_else(|e| panic!("fixture {}: {e}", s.name)),
                provenance: s.provenance,
                tags: s.tags,
            })
            .collect();
        if let Err(e) = verify_corpus(&fixtures) {
            panic!("corpus self-check failed: {e}");
        }
        fixtures
    })
}

fn find<'a>(fixtures: &'a [Fixture], name: &str) -> &'a Structure {
    &fixtures.iter().find(|f| f.name == name).expect("known fixture").structure
}

fn fail(msg: impl Into<String>) -> Error {
    Error::InvariantViolation(msg.into())
}

fn verify_corpus(fixtures: &[Fixture]) -> Result<()> {
    let budget = Budget::default();

    let a4 = find(fixtures, "A4fix");
    let p110 = find(fixtures, "P110");
    let maps = [
        (a4, p110, Hypermorphism::from_sets(&[&[1], &[2], &[3], &[1]])),
        (p110, a4, Hypermorphism::from_sets(&[&[1, 4], &[2], &[3]])),
        (
            a4,
            a4,
            Hypermorphism::from_sets(&[&[1, 4], &[2], &[1, 3, 4], &[1, 4]]),
        ),
    ];
    for (src, dst, h) in &maps {
        if !h.check(src, dst).is_surjective_hypermorphism() {
            return Err(fail(format!("A4fix map rejected:\n{h}")));
        }
    }

    for (m, a, b) in [(2u32, "LB2_A", "LB2_B"), (3, "LB3_A", "LB3_B")] {
        let (a, b) = (find(fixtures, a), find(fixtures, b));
        let below = find_surjective_hom_from_power(a, b, m - 1, &budget)?;
        let at = find_surjective_hom_from_power(a, b, m, &budget)?;
        if below.is_yes() || at.witness().map(|w| w.0) != Some(m) {
            return Err(fail(format!("least exponent for LB{m} is not {m}")));
        }
    }

    let na = find(fixtures, "NONIND_A");
    let square = product(na, na)?;
    let (e, r, g) = (0, 1, 2);
    let uncoloured = |x: usize| !square.holds(r, &[x]) && !square.holds(g, &[x]);
    if !square
        .relation(e)
        .iter()
        .any(|t| t.iter().all(|&x| uncoloured(x)))
    {
        return Err(fail("NONIND_A squared lacks an uncoloured edge"));
    }
    let nb = find(fixtures, "NONIND_B");
    let a_facts: BTreeSet<_> = na.facts().collect();
    if !nb.facts().all(|f| a_facts.contains(&f)) {
        return Err(fail("NONIND_B is not a weak substructure of NONIND_A"));
    }

    if automorphisms(find(fixtures, "H1")).len() != 1 {
        return Err(fail("H1 has a non-trivial automorphism"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::render_structure;

    #[test]
    fn every_fixture_loads_and_round_trips() {
        for name in list_fixtures() {
            let f = get_fixture(name).unwrap();
            assert!(!f.provenance.is_empty());
            let text = render_structure(&f.structure);
            assert_eq!(parse_structure(&text).unwrap(), f.structure, "{name}");
        }
    }

    #[test]
    fn named_lookups() {
        let b = fixture("NONIND_B");
        assert_eq!(b.size(), 3);
        assert_eq!(b.relation_by_name("R").unwrap().len(), 1);
        assert_eq!(b.relation_by_name("G").unwrap().len(), 1);
        let lb = fixture("LB3_B");
        assert_eq!(lb.size(), 4);
        assert!(lb.holds(0, &[3, 3]) && lb.holds(1, &[3]));
        assert_eq!(fixture("K2").tuple_count(), 2);
        assert_eq!(get_fixture("K1*").unwrap().name, "K1star");
        assert_eq!(get_fixture("K2+K1").unwrap().name, "K2_K1");
        assert!(matches!(get_fixture("nope"), Err(Error::UnknownFixture(_))));
    }
}
