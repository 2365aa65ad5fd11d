//! Prenex positive first-order sentences: syntax, fragments, evaluation and
//! the canonical sentences attached to a structure.

mod canonical;
mod check;

pub use canonical::{
    canonical_psi, canonical_query, canonical_theta, canonical_universal_word,
    minimal_proper_ph_sentences, satisfies_no_proper_ph, ProperPhReport, UniversalWord,
};
pub use check::{model_check, model_check_relativized, CheckOutcome, Relativization, StrategyStep};

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::structure::Signature;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quantifier {
    Forall,
    Exists,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Atom {
    Rel { symbol: String, args: Vec<String> },
    Eq(String, String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Matrix {
    Atom(Atom),
    /// Conjunction; the empty conjunction is `true`.
    And(Vec<Matrix>),
    Or(Vec<Matrix>),
}

impl Matrix {
    pub fn truth() -> Self {
        Matrix::And(Vec::new())
    }

    pub fn rel(symbol: &str, args: &[&str]) -> Self {
        Matrix::Atom(Atom::Rel {
            symbol: symbol.to_string(),
            args: args.iter().map(|s| s.to_string()).collect(),
        })
    }

    /// Conjunction that flattens nested conjunctions and collapses a single child.
    pub fn and(parts: Vec<Matrix>) -> Self {
        let mut flat = Vec::new();
        for p in parts {
            match p {
                Matrix::And(inner) => flat.extend(inner),
                other => flat.push(other),
            }
        }
        if flat.len() == 1 {
            flat.pop().unwrap()
        } else {
            Matrix::And(flat)
        }
    }

    /// Disjunction that flattens nested disjunctions and collapses a single child.
    pub fn or(parts: Vec<Matrix>) -> Self {
        let mut flat = Vec::new();
        for p in parts {
            match p {
                Matrix::Or(inner) => flat.extend(inner),
                other => flat.push(other),
            }
        }
        if flat.len() == 1 {
            flat.pop().unwrap()
        } else {
            Matrix::Or(flat)
        }
    }

    fn visit_atoms<'a>(&'a self, f: &mut impl FnMut(&'a Atom)) {
        match self {
            Matrix::Atom(a) => f(a),
            Matrix::And(ps) | Matrix::Or(ps) => ps.iter().for_each(|p| p.visit_atoms(f)),
        }
    }

    fn has_or(&self) -> bool {
        match self {
            Matrix::Atom(_) => false,
            Matrix::And(ps) => ps.iter().any(Matrix::has_or),
            Matrix::Or(ps) => ps.len() != 1 || ps.iter().any(Matrix::has_or),
        }
    }

    pub fn atom_count(&self) -> usize {
        let mut n = 0;
        self.visit_atoms(&mut |_| n += 1);
        n
    }
}

/// Fragments, from weakest to strongest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FragmentTag {
    /// `{exists, and}`
    Pp,
    /// `{exists, forall, and}`
    Ph,
    /// `{exists, forall, and, or}`
    Pef,
    /// `{exists, forall, and, =}`
    PhEq,
    /// `{exists, forall, and, or, =}`: all of positive logic in prenex form.
    Pefe,
}

impl fmt::Display for FragmentTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FragmentTag::Pp => "pp",
            FragmentTag::Ph => "ph",
            FragmentTag::Pef => "pef",
            FragmentTag::PhEq => "ph-eq",
            FragmentTag::Pefe => "pefe",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Formula {
    pub prefix: Vec<(Quantifier, String)>,
    pub matrix: Matrix,
}

impl Formula {
    /// Builds a sentence, checking that every matrix variable is bound.
    pub fn new(prefix: Vec<(Quantifier, String)>, matrix: Matrix) -> Result<Self> {
        let f = Formula { prefix, matrix };
        let bound: BTreeSet<&str> = f.prefix.iter().map(|(_, v)| v.as_str()).collect();
        for v in f.matrix_variables() {
            if !bound.contains(v.as_str()) {
                return Err(Error::UnboundVariable(v));
            }
        }
        Ok(f)
    }

    pub fn matrix_variables(&self) -> BTreeSet<String> {
        let mut vars = BTreeSet::new();
        self.matrix.visit_atoms(&mut |a| match a {
            Atom::Rel { args, .. } => vars.extend(args.iter().cloned()),
            Atom::Eq(x, y) => {
                vars.insert(x.clone());
                vars.insert(y.clone());
            }
        });
        vars
    }

    /// The least fragment containing the sentence.
    pub fn fragment(&self) -> FragmentTag {
        let universal = self.prefix.iter().any(|(q, _)| *q == Quantifier::Forall);
        let disjunction = self.matrix.has_or();
        let mut equality = false;
        self.matrix.visit_atoms(&mut |a| equality |= matches!(a, Atom::Eq(..)));
        match (equality, disjunction, universal) {
            (true, true, _) => FragmentTag::Pefe,
            (true, false, _) => FragmentTag::PhEq,
            (false, true, _) => FragmentTag::Pef,
            (false, false, true) => FragmentTag::Ph,
            (false, false, false) => FragmentTag::Pp,
        }
    }

    /// Every quantified variable occurs in some atom.
    pub fn is_proper(&self) -> bool {
        let used = self.matrix_variables();
        self.prefix.iter().all(|(_, v)| used.contains(v))
    }

    pub fn check_signature(&self, sig: &Signature) -> Result<()> {
        let mut err = None;
        self.matrix.visit_atoms(&mut |a| {
            if err.is_some() {
                return;
            }
            if let Atom::Rel { symbol, args } = a {
                match sig.index_of(symbol) {
                    None => err = Some(Error::UnknownSymbol(symbol.clone())),
                    Some(i) if sig.arity(i) != args.len() => {
                        err = Some(Error::ArityMismatch {
                            symbol: symbol.clone(),
                            expected: sig.arity(i),
                            found: args.len(),
                        })
                    }
                    _ => {}
                }
            }
        });
        err.map_or(Ok(()), Err)
    }
}

// ---------------------------------------------------------------------------
// Rendering

fn render_atom(a: &Atom) -> String {
    match a {
        Atom::Rel { symbol, args } => format!("{symbol}({})", args.join(",")),
        Atom::Eq(x, y) => format!("{x}={y}"),
    }
}

fn render_matrix(m: &Matrix) -> String {
    match m {
        Matrix::Atom(a) => render_atom(a),
        Matrix::And(ps) if ps.is_empty() => "true".to_string(),
        Matrix::Or(ps) if ps.is_empty() => "false".to_string(),
        Matrix::And(ps) => {
            let parts: Vec<String> = ps.iter().map(render_matrix).collect();
            format!("({})", parts.join(" & "))
        }
        Matrix::Or(ps) => {
            let parts: Vec<String> = ps.iter().map(render_matrix).collect();
            format!("({})", parts.join(" | "))
        }
    }
}

pub fn render_formula(f: &Formula) -> String {
    let mut out = String::new();
    for (q, v) in &f.prefix {
        let kw = match q {
            Quantifier::Forall => "forall",
            Quantifier::Exists => "exists",
        };
        out.push_str(&format!("{kw} {v} . "));
    }
    out.push_str(&render_matrix(&f.matrix));
    out
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_formula(self))
    }
}

// ---------------------------------------------------------------------------
// Parsing

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    LParen,
    RParen,
    Comma,
    Dot,
    And,
    Or,
    Eq,
}

struct Lexed {
    toks: Vec<(Tok, usize, usize)>,
}

fn lex(text: &str) -> Result<Lexed> {
    let mut toks = Vec::new();
    for (li, line) in text.lines().enumerate() {
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let col = i + 1;
            let simple = match c {
                '(' => Some(Tok::LParen),
                ')' => Some(Tok::RParen),
                ',' => Some(Tok::Comma),
                '.' => Some(Tok::Dot),
                '&' => Some(Tok::And),
                '|' => Some(Tok::Or),
                '=' => Some(Tok::Eq),
                _ => None,
            };
            if let Some(t) = simple {
                toks.push((t, li + 1, col));
                i += 1;
            } else if c == '#' {
                break;
            } else if c.is_whitespace() {
                i += 1;
            } else if c.is_alphanumeric() || c == '_' {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                toks.push((Tok::Ident(chars[start..i].iter().collect()), li + 1, col));
            } else {
                return Err(Error::Syntax {
                    line: li + 1,
                    column: col,
                    message: format!("unexpected character `{c}`"),
                });
            }
        }
    }
    Ok(Lexed { toks })
}

struct Parser {
    toks: Vec<(Tok, usize, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn error(&self, message: &str) -> Error {
        let (line, column) = match self.toks.get(self.pos) {
            Some(&(_, l, c)) => (l, c),
            None => self
                .toks
                .last()
                .map_or((1, 1), |&(_, l, c)| (l, c + 1)),
        };
        Error::Syntax {
            line,
            column,
            message: message.to_string(),
        }
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<()> {
        if self.peek() == Some(&t) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected {what}")))
        }
    }

    fn ident(&mut self) -> Result<String> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.error("expected an identifier")),
        }
    }

    fn disjunction(&mut self) -> Result<Matrix> {
        let mut parts = vec![self.conjunction()?];
        while self.peek() == Some(&Tok::Or) {
            self.pos += 1;
            parts.push(self.conjunction()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            Matrix::Or(parts)
        })
    }

    fn conjunction(&mut self) -> Result<Matrix> {
        let mut parts = vec![self.primary()?];
        while self.peek() == Some(&Tok::And) {
            self.pos += 1;
            parts.push(self.primary()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            Matrix::And(parts)
        })
    }

    fn primary(&mut self) -> Result<Matrix> {
        if self.peek() == Some(&Tok::LParen) {
            self.pos += 1;
            let m = self.disjunction()?;
            self.expect(Tok::RParen, "`)`")?;
            return Ok(m);
        }
        let name = self.ident()?;
        match self.peek() {
            Some(Tok::LParen) => {
                self.pos += 1;
                let mut args = vec![self.ident()?];
                while self.peek() == Some(&Tok::Comma) {
                    self.pos += 1;
                    args.push(self.ident()?);
                }
                self.expect(Tok::RParen, "`)`")?;
                Ok(Matrix::Atom(Atom::Rel { symbol: name, args }))
            }
            Some(Tok::Eq) => {
                self.pos += 1;
                let rhs = self.ident()?;
                Ok(Matrix::Atom(Atom::Eq(name, rhs)))
            }
            _ if name == "true" => Ok(Matrix::truth()),
            _ if name == "false" => Ok(Matrix::Or(Vec::new())),
            _ => Err(self.error("expected `(` or `=` after identifier")),
        }
    }
}

/// Parses a prenex sentence and checks it against `sig`.
pub fn parse_formula(text: &str, sig: &Signature) -> Result<Formula> {
    let lexed = lex(text)?;
    let mut p = Parser {
        toks: lexed.toks,
        pos: 0,
    };
    let mut prefix = Vec::new();
    loop {
        match p.peek() {
            Some(Tok::Ident(k)) if k == "forall" || k == "exists" => {
                let q = if k == "forall" {
                    Quantifier::Forall
                } else {
                    Quantifier::Exists
                };
                p.pos += 1;
                let v = p.ident()?;
                p.expect(Tok::Dot, "`.` after quantified variable")?;
                prefix.push((q, v));
            }
            _ => break,
        }
    }
    let matrix = p.disjunction()?;
    if p.pos != p.toks.len() {
        return Err(p.error("unexpected trailing input"));
    }
    let f = Formula::new(prefix, matrix)?;
    f.check_signature(sig)?;
    Ok(f)
}
