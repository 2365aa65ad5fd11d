//! A small finite-domain constraint solver specialised to homomorphism
//! problems: variables are source elements, values are target elements
//! (at most 64 of them), and every source tuple is a table constraint over
//! the matching target relation.

use std::collections::HashMap;

use crate::structure::Structure;
use crate::verdict::Meter;

pub(crate) const MAX_TARGET: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum SearchEnd {
    /// The callback asked to stop.
    Stopped,
    /// Every branch was explored.
    Complete,
    /// The node budget ran out.
    OutOfBudget,
}

struct Constraint {
    scope: Vec<usize>,
    table: usize,
}

pub(crate) struct Problem {
    nvars: usize,
    nvals: usize,
    domains: Vec<u64>,
    tables: Vec<Vec<Vec<usize>>>,
    constraints: Vec<Constraint>,
    watch: Vec<Vec<usize>>,
    surjective: bool,
    queued: Vec<bool>,
}

pub(crate) fn full_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

impl Problem {
    /// Homomorphism problem from `a` to `b`. Returns `None` when `b` is too
    /// large for bitmask domains.
    pub(crate) fn homomorphism(a: &Structure, b: &Structure, surjective: bool) -> Option<Self> {
        let nvals = b.size();
        if nvals > MAX_TARGET {
            return None;
        }
        let mut p = Problem {
            nvars: a.size(),
            nvals,
            domains: vec![full_mask(nvals); a.size()],
            tables: Vec::new(),
            constraints: Vec::new(),
            watch: vec![Vec::new(); a.size()],
            surjective,
            queued: Vec::new(),
        };
        let mut table_ids: HashMap<(usize, Vec<usize>), usize> = HashMap::new();
        for (r, t) in a.facts() {
            // equality pattern: position of first occurrence for each entry
            let pattern: Vec<usize> = t
                .iter()
                .map(|e| t.iter().position(|x| x == e).unwrap())
                .collect();
            let key = (r, pattern);
            let id = match table_ids.get(&key) {
                Some(&id) => id,
                None => {
                    let rows: Vec<Vec<usize>> = b
                        .relation(r)
                        .iter()
                        .filter(|row| key.1.iter().enumerate().all(|(k, &f)| row[k] == row[f]))
                        .cloned()
                        .collect();
                    p.tables.push(rows);
                    table_ids.insert(key, p.tables.len() - 1);
                    p.tables.len() - 1
                }
            };
            let ci = p.constraints.len();
            p.constraints.push(Constraint {
                scope: t.clone(),
                table: id,
            });
            let mut vars = t.clone();
            vars.sort_unstable();
            vars.dedup();
            for v in vars {
                p.watch[v].push(ci);
            }
        }
        p.queued = vec![false; p.constraints.len()];
        Some(p)
    }

    /// Restricts the domain of `var` to the values in `mask`.
    pub(crate) fn restrict(&mut self, var: usize, mask: u64) {
        self.domains[var] &= mask;
    }

    pub(crate) fn forbid(&mut self, var: usize, value: usize) {
        self.domains[var] &= !(1u64 << value);
    }

    /// Depth-first search in variable order `0..n` and ascending values;
    /// calls `on_solution` for each solution until it returns `false`.
    pub(crate) fn solve(
        &mut self,
        meter: &mut Meter,
        mut on_solution: impl FnMut(&[usize]) -> bool,
    ) -> SearchEnd {
        let mut trail: Vec<(usize, u64)> = Vec::new();
        let all: Vec<usize> = (0..self.constraints.len()).collect();
        if !self.propagate(&all, &mut trail) {
            return SearchEnd::Complete;
        }
        let mut assignment = vec![0usize; self.nvars];
        self.dfs(meter, &mut trail, &mut assignment, &mut on_solution)
    }

    fn next_open(&self, from: usize) -> Option<usize> {
        (from..self.nvars).find(|&v| self.domains[v].count_ones() != 1)
    }

    fn dfs(
        &mut self,
        meter: &mut Meter,
        trail: &mut Vec<(usize, u64)>,
        assignment: &mut [usize],
        on_solution: &mut impl FnMut(&[usize]) -> bool,
    ) -> SearchEnd {
        struct Frame {
            var: usize,
            rest: u64,
            mark: usize,
        }
        let mut stack: Vec<Frame> = Vec::new();
        let mut from = 0;
        loop {
            // descend to the next open variable, or report a solution
            if !meter.tick() {
                if let Some(f) = stack.first() {
                    self.undo(trail, f.mark);
                }
                return SearchEnd::OutOfBudget;
            }
            match self.next_open(from) {
                Some(var) => stack.push(Frame {
                    var,
                    rest: self.domains[var],
                    mark: trail.len(),
                }),
                None => {
                    for (v, slot) in assignment.iter_mut().enumerate() {
                        *slot = self.domains[v].trailing_zeros() as usize;
                    }
                    if !on_solution(assignment) {
                        if let Some(f) = stack.first() {
                            self.undo(trail, f.mark);
                        }
                        return SearchEnd::Stopped;
                    }
                }
            }
            // try the next value of the deepest frame, backtracking as needed
            loop {
                let Some(top) = stack.last_mut() else {
                    return SearchEnd::Complete;
                };
                let (var, mark) = (top.var, top.mark);
                if top.rest == 0 {
                    stack.pop();
                    self.undo(trail, mark);
                    continue;
                }
                let value = top.rest.trailing_zeros() as usize;
                top.rest &= top.rest - 1;
                self.undo(trail, mark);
                trail.push((var, self.domains[var]));
                self.domains[var] = 1u64 << value;
                let watched = std::mem::take(&mut self.watch[var]);
                let ok = self.propagate(&watched, trail);
                self.watch[var] = watched;
                if ok {
                    from = var + 1;
                    break;
                }
            }
        }
    }

    fn undo(&mut self, trail: &mut Vec<(usize, u64)>, mark: usize) {
        while trail.len() > mark {
            let (v, old) = trail.pop().unwrap();
            self.domains[v] = old;
        }
    }

    fn propagate(&mut self, seed: &[usize], trail: &mut Vec<(usize, u64)>) -> bool {
        let mut queue: Vec<usize> = Vec::with_capacity(seed.len());
        let mut queued = std::mem::take(&mut self.queued);
        for &c in seed {
            if !queued[c] {
                queued[c] = true;
                queue.push(c);
            }
        }
        let ok = self.drain(&mut queue, &mut queued, trail);
        for c in queue {
            queued[c] = false;
        }
        self.queued = queued;
        ok && (!self.surjective || self.surjectivity_possible())
    }

    fn drain(&mut self, queue: &mut Vec<usize>, queued: &mut [bool], trail: &mut Vec<(usize, u64)>) -> bool {
        while let Some(ci) = queue.pop() {
            queued[ci] = false;
            let c = &self.constraints[ci];
            let arity = c.scope.len();
            let mut support = [0u64; 16];
            let mut big_support;
            let support: &mut [u64] = if arity <= 16 {
                &mut support[..arity]
            } else {
                big_support = vec![0u64; arity];
                &mut big_support
            };
            for row in &self.tables[c.table] {
                if row
                    .iter()
                    .zip(&c.scope)
                    .all(|(&val, &var)| self.domains[var] >> val & 1 == 1)
                {
                    for (k, &val) in row.iter().enumerate() {
                        support[k] |= 1u64 << val;
                    }
                }
            }
            let scope = c.scope.clone();
            for (k, &var) in scope.iter().enumerate() {
                let old = self.domains[var];
                let new = old & support[k];
                if new != old {
                    if new == 0 {
                        return false;
                    }
                    trail.push((var, old));
                    self.domains[var] = new;
                    for &other in &self.watch[var] {
                        if !queued[other] {
                            queued[other] = true;
                            queue.push(other);
                        }
                    }
                }
            }
        }
        true
    }

    fn surjectivity_possible(&self) -> bool {
        let mut union = 0u64;
        let mut fixed = 0u64;
        let mut open = 0usize;
        for &d in &self.domains {
            union |= d;
            if d.count_ones() == 1 {
                fixed |= d;
            } else {
                open += 1;
            }
        }
        union == full_mask(self.nvals)
            && (self.nvals - fixed.count_ones() as usize) <= open
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count_solutions(a: &Structure, b: &Structure, surjective: bool) -> usize {
        let mut p = Problem::homomorphism(a, b, surjective).unwrap();
        let mut n = 0;
        let end = p.solve(&mut Meter::new(u64::MAX), |_| {
            n += 1;
            true
        });
        assert_eq!(end, SearchEnd::Complete);
        n
    }

    #[test]
    fn counts_maps_between_small_graphs() {
        let k2 = Structure::digraph(2, &[(1, 2), (2, 1)]).unwrap();
        let p3 = Structure::digraph(3, &[(1, 2), (2, 1), (2, 3), (3, 2)]).unwrap();
        assert_eq!(count_solutions(&p3, &k2, false), 2);
        assert_eq!(count_solutions(&k2, &p3, false), 4);
        assert_eq!(count_solutions(&k2, &p3, true), 0);
        let loop1 = Structure::digraph(1, &[(1, 1)]).unwrap();
        assert_eq!(count_solutions(&loop1, &k2, false), 0);
        assert_eq!(count_solutions(&k2, &loop1, true), 1);
    }

    #[test]
    fn budget_is_reported() {
        let k1 = Structure::digraph(6, &[]).unwrap();
        let mut p = Problem::homomorphism(&k1, &k1, false).unwrap();
        let end = p.solve(&mut Meter::new(10), |_| true);
        assert_eq!(end, SearchEnd::OutOfBudget);
    }

    #[test]
    fn first_solution_is_least() {
        let k2 = Structure::digraph(2, &[(1, 2), (2, 1)]).unwrap();
        let c4 = Structure::digraph(4, &[(1, 2), (2, 1), (2, 3), (3, 2), (3, 4), (4, 3), (4, 1), (1, 4)])
            .unwrap();
        let mut p = Problem::homomorphism(&c4, &k2, false).unwrap();
        let mut first = None;
        p.solve(&mut Meter::new(u64::MAX), |s| {
            first = Some(s.to_vec());
            false
        });
        assert_eq!(first, Some(vec![0, 1, 0, 1]));
    }
}
