//! Finite relational structures and their algebra.
//!
//! Elements are stored 0-based internally and written 1-based in the text
//! format and in every rendered witness.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Symbol {
    pub name: String,
    pub arity: usize,
}

/// Ordered list of relation symbols. The order fixes iteration order everywhere.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Signature {
    symbols: Vec<Symbol>,
}

impl Signature {
    pub fn new<S: Into<String>>(symbols: impl IntoIterator<Item = (S, usize)>) -> Result<Self> {
        let mut out: Vec<Symbol> = Vec::new();
        for (name, arity) in symbols {
            let name = name.into();
            if arity == 0 {
                return Err(Error::ZeroArity(name));
            }
            if out.iter().any(|s| s.name == name) {
                return Err(Error::DuplicateSymbol(name));
            }
            out.push(Symbol { name, arity });
        }
        Ok(Signature { symbols: out })
    }

    /// The signature of (directed) graphs: one binary symbol `E`.
    pub fn digraph() -> Self {
        Signature::new([("E", 2)]).expect("valid signature")
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.symbols.iter().position(|s| s.name == name)
    }

    pub fn arity(&self, index: usize) -> usize {
        self.symbols[index].arity
    }

    /// Sum of the arities of all symbols.
    pub fn total_arity(&self) -> usize {
        self.symbols.iter().map(|s| s.arity).sum()
    }

    pub fn is_unary(&self) -> bool {
        self.symbols.iter().all(|s| s.arity == 1)
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .symbols
            .iter()
            .map(|s| format!("{}/{}", s.name, s.arity))
            .collect();
        f.write_str(&parts.join(" "))
    }
}

pub type Tuple = Vec<usize>;

/// A finite structure with domain `0..size` (written `1..=size`).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Structure {
    signature: Signature,
    size: usize,
    relations: Vec<BTreeSet<Tuple>>,
}

impl Structure {
    pub fn new(signature: Signature, size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::EmptyDomain);
        }
        let relations = vec![BTreeSet::new(); signature.len()];
        Ok(Structure {
            signature,
            size,
            relations,
        })
    }

    /// Builds a structure from 0-based tuples, one list per symbol.
    pub fn from_tuples(
        signature: Signature,
        size: usize,
        relations: Vec<Vec<Tuple>>,
    ) -> Result<Self> {
        let mut s = Structure::new(signature, size)?;
        if relations.len() != s.signature.len() {
            return Err(Error::SignatureMismatch);
        }
        for (r, tuples) in relations.into_iter().enumerate() {
            for t in tuples {
                s.add_tuple(r, t)?;
            }
        }
        Ok(s)
    }

    /// Convenience constructor for digraphs from 1-based edge pairs.
    pub fn digraph(size: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut s = Structure::new(Signature::digraph(), size)?;
        for &(u, v) in edges {
            if u == 0 || v == 0 {
                return Err(Error::OutOfRange {
                    element: 0,
                    size,
                });
            }
            s.add_tuple(0, vec![u - 1, v - 1])?;
        }
        Ok(s)
    }

    pub fn add_tuple(&mut self, relation: usize, tuple: Tuple) -> Result<()> {
        let sym = &self.signature.symbols[relation];
        if tuple.len() != sym.arity {
            return Err(Error::ArityMismatch {
                symbol: sym.name.clone(),
                expected: sym.arity,
                found: tuple.len(),
            });
        }
        if let Some(&e) = tuple.iter().find(|&&e| e >= self.size) {
            return Err(Error::OutOfRange {
                element: e + 1,
                size: self.size,
            });
        }
        self.relations[relation].insert(tuple);
        Ok(())
    }

    pub fn signature(&self) -> &Signature {
        &self.signature
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn relation(&self, index: usize) -> &BTreeSet<Tuple> {
        &self.relations[index]
    }

    pub fn relations(&self) -> &[BTreeSet<Tuple>] {
        &self.relations
    }

    pub fn relation_by_name(&self, name: &str) -> Option<&BTreeSet<Tuple>> {
        self.signature.index_of(name).map(|i| &self.relations[i])
    }

    pub fn holds(&self, relation: usize, tuple: &[usize]) -> bool {
        self.relations[relation].contains(tuple)
    }

    pub fn tuple_count(&self) -> usize {
        self.relations.iter().map(BTreeSet::len).sum()
    }

    /// All tuples as `(relation index, tuple)` pairs in canonical order.
    pub fn facts(&self) -> impl Iterator<Item = (usize, &Tuple)> + '_ {
        self.relations
            .iter()
            .enumerate()
            .flat_map(|(r, ts)| ts.iter().map(move |t| (r, t)))
    }

    fn check_same_signature(&self, other: &Structure) -> Result<()> {
        if self.signature != other.signature {
            return Err(Error::SignatureMismatch);
        }
        Ok(())
    }
}

impl fmt::Display for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_structure(self))
    }
}

// ---------------------------------------------------------------------------
// Text format

struct Cursor<'a> {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    line_start: usize,
    _src: &'a str,
}

impl<'a> Cursor<'a> {
    fn error(&self, message: impl Into<String>) -> Error {
        Error::Syntax {
            line: self.line,
            column: self.pos - self.line_start + 1,
            message: message.into(),
        }
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        line,
        column,
        message: message.into(),
    }
}

/// Parses the line-oriented structure format:
///
/// ```text
/// signature: E/2 R/1
/// domain: 3
/// E: (1,1) (2,3) (3,2)
/// R: (1)
/// ```
pub fn parse_structure(text: &str) -> Result<Structure> {
    // (line number, column offset of content, content)
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, strip_comment(l)))
        .filter(|(_, l)| !l.trim().is_empty());

    let (sig_line, sig_text) = lines
        .next()
        .ok_or_else(|| syntax(1, 1, "expected `signature:` line"))?;
    let body = header_body(sig_line, sig_text, "signature")?;
    let mut symbols = Vec::new();
    for (col, tok) in tokens(sig_text, body) {
        let (name, arity) = tok
            .split_once('/')
            .ok_or_else(|| syntax(sig_line, col, format!("expected NAME/ARITY, found `{tok}`")))?;
        if !is_identifier(name) {
            return Err(syntax(sig_line, col, format!("invalid symbol name `{name}`")));
        }
        let arity: usize = arity
            .parse()
            .map_err(|_| syntax(sig_line, col, format!("invalid arity in `{tok}`")))?;
        symbols.push((name.to_string(), arity));
    }
    let signature = Signature::new(symbols)?;

    let (dom_line, dom_text) = lines
        .next()
        .ok_or_else(|| syntax(sig_line + 1, 1, "expected `domain:` line"))?;
    let body = header_body(dom_line, dom_text, "domain")?;
    let toks = tokens(dom_text, body);
    if toks.len() != 1 {
        return Err(syntax(dom_line, body + 1, "expected a single domain size"));
    }
    let size: usize = toks[0]
        .1
        .parse()
        .map_err(|_| syntax(dom_line, toks[0].0, "invalid domain size"))?;
    let mut s = Structure::new(signature, size)?;

    for (line_no, line) in lines {
        let colon = line
            .find(':')
            .ok_or_else(|| syntax(line_no, 1, "expected `NAME: (..) (..)`"))?;
        let name = line[..colon].trim();
        let rel = s
            .signature
            .index_of(name)
            .ok_or_else(|| Error::UnknownSymbol(name.to_string()))?;
        let mut cur = Cursor {
            chars: line.chars().collect(),
            pos: colon + 1,
            line: line_no,
            line_start: 0,
            _src: line,
        };
        loop {
            skip_ws(&mut cur);
            if cur.pos >= cur.chars.len() {
                break;
            }
            let tuple = parse_tuple(&mut cur, size)?;
            s.add_tuple(rel, tuple)?;
        }
    }
    Ok(s)
}

fn header_body(line_no: usize, line: &str, keyword: &str) -> Result<usize> {
    let trimmed = line.trim_start();
    let offset = line.len() - trimmed.len();
    match trimmed.strip_prefix(keyword) {
        Some(rest) if rest.trim_start().starts_with(':') => {
            let after = rest.len() - rest.trim_start().len();
            Ok(offset + keyword.len() + after + 1)
        }
        _ => Err(syntax(
            line_no,
            offset + 1,
            format!("expected `{keyword}:`"),
        )),
    }
}

fn tokens(line: &str, from: usize) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let rest = &line[from..];
    let mut idx = 0;
    for tok in rest.split_whitespace() {
        let at = rest[idx..].find(tok).unwrap() + idx;
        out.push((from + at + 1, tok));
        idx = at + tok.len();
    }
    out
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_alphabetic() || c == '_')
        && chars.all(|c| c.is_alphanumeric() || c == '_')
}

fn skip_ws(cur: &mut Cursor<'_>) {
    while cur.pos < cur.chars.len() && cur.chars[cur.pos].is_whitespace() {
        cur.pos += 1;
    }
}

fn parse_tuple(cur: &mut Cursor<'_>, size: usize) -> Result<Tuple> {
    if cur.chars[cur.pos] != '(' {
        return Err(cur.error("expected `(`"));
    }
    cur.pos += 1;
    let mut tuple = Vec::new();
    loop {
        skip_ws(cur);
        let start = cur.pos;
        while cur.pos < cur.chars.len() && cur.chars[cur.pos].is_ascii_digit() {
            cur.pos += 1;
        }
        if start == cur.pos {
            return Err(cur.error("expected an element"));
        }
        let digits: String = cur.chars[start..cur.pos].iter().collect();
        let e: usize = digits
            .parse()
            .map_err(|_| cur.error("element does not fit"))?;
        if e == 0 || e > size {
            return Err(Error::OutOfRange { element: e, size });
        }
        tuple.push(e - 1);
        skip_ws(cur);
        match cur.chars.get(cur.pos) {
            Some(',') => cur.pos += 1,
            Some(')') => {
                cur.pos += 1;
                return Ok(tuple);
            }
            _ => return Err(cur.error("expected `,` or `)`")),
        }
    }
}

/// Canonical text: one line per symbol, tuples sorted lexicographically.
pub fn render_structure(s: &Structure) -> String {
    let mut out = format!("signature: {}\ndomain: {}\n", s.signature, s.size);
    for (sym, rel) in s.signature.symbols.iter().zip(&s.relations) {
        out.push_str(&sym.name);
        out.push(':');
        for t in rel {
            out.push(' ');
            out.push_str(&format_tuple(t));
        }
        out.push('\n');
    }
    out
}

pub(crate) fn format_tuple(t: &[usize]) -> String {
    let parts: Vec<String> = t.iter().map(|e| (e + 1).to_string()).collect();
    format!("({})", parts.join(","))
}

// ---------------------------------------------------------------------------
// Algebra

/// Index of the pair `(a, b)` in a product with right factor of size `nb`.
pub fn product_index(nb: usize, a: usize, b: usize) -> usize {
    a * nb + b
}

/// Coordinates of product element `index`.
pub fn product_coordinates(nb: usize, index: usize) -> (usize, usize) {
    (index / nb, index % nb)
}

/// Coordinate tuple of element `index` in the `m`-th power of a structure of
/// size `base`; the first coordinate is the most significant.
pub fn power_coordinates(base: usize, m: usize, index: usize) -> Vec<usize> {
    let mut coords = vec![0; m];
    let mut rest = index;
    for slot in coords.iter_mut().rev() {
        *slot = rest % base;
        rest /= base;
    }
    coords
}

pub fn power_index(base: usize, coords: &[usize]) -> usize {
    coords.iter().fold(0, |acc, &c| acc * base + c)
}

pub fn product(a: &Structure, b: &Structure) -> Result<Structure> {
    a.check_same_signature(b)?;
    let nb = b.size;
    let mut out = Structure::new(a.signature.clone(), a.size * nb)?;
    for r in 0..a.relations.len() {
        for ta in &a.relations[r] {
            for tb in &b.relations[r] {
                let t: Tuple = ta
                    .iter()
                    .zip(tb)
                    .map(|(&x, &y)| product_index(nb, x, y))
                    .collect();
                out.relations[r].insert(t);
            }
        }
    }
    Ok(out)
}

/// Number of elements of `a^m`, or `None` on overflow.
pub fn power_size(base: usize, m: u32) -> Option<u128> {
    (base as u128).checked_pow(m)
}

/// Number of tuples of `a^m`, or `None` on overflow.
pub fn power_tuple_count(a: &Structure, m: u32) -> Option<u128> {
    a.relations
        .iter()
        .try_fold(0u128, |acc, rel| acc.checked_add((rel.len() as u128).checked_pow(m)?))
}

/// Whether `a^m` stays within `limit` elements and `limit` tuples.
pub fn power_fits(a: &Structure, m: u32, limit: usize) -> bool {
    let limit = limit as u128;
    power_size(a.size, m).is_some_and(|n| n <= limit)
        && power_tuple_count(a, m).is_some_and(|t| t <= limit)
}

/// The `m`-th power of `a`, refusing to build more than `node_budget`
/// elements or tuples.
pub fn power(a: &Structure, m: u32, node_budget: usize) -> Result<Structure> {
    if m == 0 {
        return Err(Error::Precondition("power exponent must be positive".into()));
    }
    let limit = node_budget as u128;
    let required = power_size(a.size, m).unwrap_or(u128::MAX);
    if required > limit {
        return Err(Error::BudgetExceeded {
            what: "power elements",
            required,
            limit,
        });
    }
    let tuples = power_tuple_count(a, m).unwrap_or(u128::MAX);
    if tuples > limit {
        return Err(Error::BudgetExceeded {
            what: "power tuples",
            required: tuples,
            limit,
        });
    }
    let m = m as usize;
    let n = required as usize;
    let mut out = Structure::new(a.signature.clone(), n)?;
    for (r, rel) in a.relations.iter().enumerate() {
        let tuples: Vec<&Tuple> = rel.iter().collect();
        if tuples.is_empty() {
            continue;
        }
        let arity = a.signature.arity(r);
        // odometer over m-sequences of tuples
        let mut choice = vec![0usize; m];
        loop {
            let t: Tuple = (0..arity)
                .map(|k| choice.iter().fold(0, |acc, &c| acc * a.size + tuples[c][k]))
                .collect();
            out.relations[r].insert(t);
            let mut pos = m;
            loop {
                if pos == 0 {
                    break;
                }
                pos -= 1;
                choice[pos] += 1;
                if choice[pos] < tuples.len() {
                    break;
                }
                choice[pos] = 0;
                if pos == 0 {
                    pos = usize::MAX;
                    break;
                }
            }
            if pos == usize::MAX {
                break;
            }
        }
    }
    Ok(out)
}

/// `a + b`; elements of `b` are shifted by `|A|`.
pub fn disjoint_union(a: &Structure, b: &Structure) -> Result<Structure> {
    a.check_same_signature(b)?;
    let mut out = Structure::new(a.signature.clone(), a.size + b.size)?;
    for r in 0..a.relations.len() {
        out.relations[r].extend(a.relations[r].iter().cloned());
        out.relations[r].extend(
            b.relations[r]
                .iter()
                .map(|t| t.iter().map(|&e| e + a.size).collect::<Tuple>()),
        );
    }
    Ok(out)
}

/// Substructure induced by `elements` (0-based), re-indexed in increasing order.
pub fn induced_substructure(a: &Structure, elements: &BTreeSet<usize>) -> Result<Structure> {
    if elements.is_empty() {
        return Err(Error::EmptySubset);
    }
    if let Some(&e) = elements.iter().find(|&&e| e >= a.size) {
        return Err(Error::OutOfRange {
            element: e + 1,
            size: a.size,
        });
    }
    let mut index = vec![usize::MAX; a.size];
    for (i, &e) in elements.iter().enumerate() {
        index[e] = i;
    }
    let mut out = Structure::new(a.signature.clone(), elements.len())?;
    for (r, rel) in a.relations.iter().enumerate() {
        for t in rel {
            if t.iter().all(|&e| index[e] != usize::MAX) {
                out.relations[r].insert(t.iter().map(|&e| index[e]).collect());
            }
        }
    }
    Ok(out)
}

/// A weak substructure together with its embedding into the parent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Substructure {
    pub structure: Structure,
    /// `embedding[i]` is the parent element corresponding to element `i`.
    pub embedding: Vec<usize>,
}

impl Substructure {
    pub fn whole(a: &Structure) -> Self {
        Substructure {
            structure: a.clone(),
            embedding: (0..a.size).collect(),
        }
    }

    /// Facts expressed in parent labels.
    pub fn parent_facts(&self) -> BTreeSet<(usize, Tuple)> {
        self.structure
            .facts()
            .map(|(r, t)| (r, t.iter().map(|&e| self.embedding[e]).collect()))
            .collect()
    }

    /// `true` if `self` is a weak substructure of `other` (same parent).
    pub fn is_contained_in(&self, other: &Substructure) -> bool {
        self.embedding.iter().all(|e| other.embedding.contains(e))
            && self.parent_facts().is_subset(&other.parent_facts())
    }

    /// Whether every parent tuple over the chosen elements was kept.
    pub fn is_induced_in(&self, parent: &Structure) -> bool {
        let set: BTreeSet<usize> = self.embedding.iter().copied().collect();
        match induced_substructure(parent, &set) {
            Ok(ind) => ind == self.structure,
            Err(_) => false,
        }
    }

    /// Re-expresses a substructure of `self.structure` as a substructure of
    /// `self`'s parent.
    pub fn compose(&self, inner: &Substructure) -> Substructure {
        Substructure {
            structure: inner.structure.clone(),
            embedding: inner.embedding.iter().map(|&e| self.embedding[e]).collect(),
        }
    }
}

/// Induced substructure with embedding metadata.
pub fn induced(a: &Structure, elements: &BTreeSet<usize>) -> Result<Substructure> {
    Ok(Substructure {
        structure: induced_substructure(a, elements)?,
        embedding: elements.iter().copied().collect(),
    })
}

/// Streams every weak substructure (non-empty element subset plus a subset of
/// the induced tuples), ordered by element count, then tuple count, then
/// lexicographically.
pub fn enumerate_weak_substructures(a: &Structure) -> WeakSubstructures<'_> {
    WeakSubstructures::new(a)
}

/// An element subset with the facts it induces.
type Slice = (Vec<usize>, Vec<(usize, Tuple)>);

pub struct WeakSubstructures<'a> {
    parent: &'a Structure,
    k: usize,
    // element subsets of size k with their induced facts
    layer: Vec<Slice>,
    count: usize,
    max_count: usize,
    subset: usize,
    combo: Option<Vec<usize>>,
}

impl<'a> WeakSubstructures<'a> {
    fn new(parent: &'a Structure) -> Self {
        let mut it = WeakSubstructures {
            parent,
            k: 0,
            layer: Vec::new(),
            count: 0,
            max_count: 0,
            subset: 0,
            combo: None,
        };
        it.next_layer();
        it
    }

    fn next_layer(&mut self) -> bool {
        self.k += 1;
        if self.k > self.parent.size {
            return false;
        }
        self.layer = combinations(self.parent.size, self.k)
            .into_iter()
            .map(|elems| {
                let set: BTreeSet<usize> = elems.iter().copied().collect();
                let facts = self
                    .parent
                    .facts()
                    .filter(|(_, t)| t.iter().all(|e| set.contains(e)))
                    .map(|(r, t)| (r, t.clone()))
                    .collect();
                (elems, facts)
            })
            .collect();
        self.max_count = self.layer.iter().map(|(_, f)| f.len()).max().unwrap_or(0);
        self.count = 0;
        self.subset = 0;
        self.combo = None;
        true
    }

    fn build(&self, elems: &[usize], facts: &[(usize, Tuple)], pick: &[usize]) -> Substructure {
        let mut index = vec![usize::MAX; self.parent.size];
        for (i, &e) in elems.iter().enumerate() {
            index[e] = i;
        }
        let mut s = Structure::new(self.parent.signature.clone(), elems.len())
            .expect("non-empty subset");
        for &p in pick {
            let (r, t) = &facts[p];
            s.relations[*r].insert(t.iter().map(|&e| index[e]).collect());
        }
        Substructure {
            structure: s,
            embedding: elems.to_vec(),
        }
    }
}

impl Iterator for WeakSubstructures<'_> {
    type Item = Substructure;

    fn next(&mut self) -> Option<Substructure> {
        loop {
            if self.k > self.parent.size {
                return None;
            }
            if self.count > self.max_count {
                if !self.next_layer() {
                    return None;
                }
                continue;
            }
            if self.subset >= self.layer.len() {
                self.subset = 0;
                self.count += 1;
                continue;
            }
            let nfacts = self.layer[self.subset].1.len();
            if self.count > nfacts {
                self.subset += 1;
                continue;
            }
            let next_combo = match self.combo.take() {
                None => Some((0..self.count).collect::<Vec<_>>()),
                Some(mut c) => {
                    if advance_combination(&mut c, nfacts) {
                        Some(c)
                    } else {
                        None
                    }
                }
            };
            match next_combo {
                Some(c) => {
                    let (elems, facts) = &self.layer[self.subset];
                    let item = self.build(elems, facts, &c);
                    self.combo = Some(c);
                    return Some(item);
                }
                None => {
                    self.subset += 1;
                }
            }
        }
    }
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub(crate) fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut c: Vec<usize> = (0..k).collect();
    loop {
        out.push(c.clone());
        if !advance_combination(&mut c, n) {
            return out;
        }
    }
}

fn advance_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Each relation replaced by its complement within the full tuple space.
pub fn complement(a: &Structure) -> Structure {
    let mut out = Structure::new(a.signature.clone(), a.size).expect("non-empty");
    for (r, rel) in a.relations.iter().enumerate() {
        let arity = a.signature.arity(r);
        let total = a.size.pow(arity as u32);
        for idx in 0..total {
            let t = power_coordinates(a.size, arity, idx);
            if !rel.contains(&t) {
                out.relations[r].insert(t);
            }
        }
    }
    out
}

/// Elements that occur in no tuple of any relation.
pub fn isolated_elements(a: &Structure) -> BTreeSet<usize> {
    let mut used = vec![false; a.size];
    for (_, t) in a.facts() {
        for &e in t {
            used[e] = true;
        }
    }
    (0..a.size).filter(|&e| !used[e]).collect()
}

// ---------------------------------------------------------------------------
// Isomorphism

fn profiles(s: &Structure) -> Vec<Vec<usize>> {
    let width: usize = s.signature.symbols.iter().map(|x| x.arity + 1).sum();
    let mut prof = vec![vec![0usize; width]; s.size];
    let mut base = 0;
    for (r, rel) in s.relations.iter().enumerate() {
        let arity = s.signature.arity(r);
        for t in rel {
            for (k, &e) in t.iter().enumerate() {
                prof[e][base + k] += 1;
            }
            if t.iter().all(|&e| e == t[0]) {
                prof[t[0]][base + arity] += 1;
            }
        }
        base += arity + 1;
    }
    prof
}

fn incident(s: &Structure) -> Vec<Vec<(usize, Tuple)>> {
    let mut inc = vec![Vec::new(); s.size];
    for (r, t) in s.facts() {
        let mut seen: Vec<usize> = t.clone();
        seen.sort_unstable();
        seen.dedup();
        for e in seen {
            inc[e].push((r, t.clone()));
        }
    }
    inc
}

/// Visits every isomorphism `a -> b` in lexicographic order until `visit`
/// returns `false`.
pub fn for_each_isomorphism(
    a: &Structure,
    b: &Structure,
    mut visit: impl FnMut(&[usize]) -> bool,
) -> Result<()> {
    a.check_same_signature(b)?;
    if a.size != b.size
        || a
            .relations
            .iter()
            .zip(&b.relations)
            .any(|(x, y)| x.len() != y.len())
    {
        return Ok(());
    }
    let pa = profiles(a);
    let pb = profiles(b);
    let ia = incident(a);
    let ib = incident(b);
    let n = a.size;
    let mut map = vec![usize::MAX; n];
    let mut inv = vec![usize::MAX; n];
    iso_rec(a, b, &pa, &pb, &ia, &ib, 0, &mut map, &mut inv, &mut visit);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn iso_rec(
    a: &Structure,
    b: &Structure,
    pa: &[Vec<usize>],
    pb: &[Vec<usize>],
    ia: &[Vec<(usize, Tuple)>],
    ib: &[Vec<(usize, Tuple)>],
    i: usize,
    map: &mut [usize],
    inv: &mut [usize],
    visit: &mut impl FnMut(&[usize]) -> bool,
) -> bool {
    if i == a.size {
        return visit(map);
    }
    for v in 0..b.size {
        if inv[v] != usize::MAX || pa[i] != pb[v] {
            continue;
        }
        map[i] = v;
        inv[v] = i;
        let ok = ia[i].iter().all(|(r, t)| {
            t.iter().any(|&e| map[e] == usize::MAX) || {
                let img: Tuple = t.iter().map(|&e| map[e]).collect();
                b.holds(*r, &img)
            }
        }) && ib[v].iter().all(|(r, t)| {
            t.iter().any(|&e| inv[e] == usize::MAX) || {
                let pre: Tuple = t.iter().map(|&e| inv[e]).collect();
                a.holds(*r, &pre)
            }
        });
        if ok && !iso_rec(a, b, pa, pb, ia, ib, i + 1, map, inv, visit) {
            map[i] = usize::MAX;
            inv[v] = usize::MAX;
            return false;
        }
        map[i] = usize::MAX;
        inv[v] = usize::MAX;
    }
    true
}

/// Lexicographically least isomorphism `a -> b`, if any.
pub fn is_isomorphic(a: &Structure, b: &Structure) -> Result<Option<Vec<usize>>> {
    let mut found = None;
    for_each_isomorphism(a, b, |m| {
        found = Some(m.to_vec());
        false
    })?;
    Ok(found)
}

/// Relabels `a` by the permutation `perm` (element `i` becomes `perm[i]`).
pub fn relabel(a: &Structure, perm: &[usize]) -> Structure {
    let mut out = Structure::new(a.signature.clone(), a.size).expect("non-empty");
    for (r, t) in a.facts() {
        out.relations[r].insert(t.iter().map(|&e| perm[e]).collect());
    }
    out
}

/// A canonical representative of the isomorphism class, by brute force over
/// all relabellings. Only meant for small domains.
pub fn canonical_form(a: &Structure) -> Structure {
    let n = a.size;
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best: Option<Vec<(usize, Tuple)>> = None;
    let mut best_perm = perm.clone();
    loop {
        let mut facts: Vec<(usize, Tuple)> = a
            .facts()
            .map(|(r, t)| (r, t.iter().map(|&e| perm[e]).collect()))
            .collect();
        facts.sort();
        if best.as_ref().is_none_or(|b| facts < *b) {
            best = Some(facts);
            best_perm = perm.clone();
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    relabel(a, &best_perm)
}

pub(crate) fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}
