//! Search budgets and three-valued decision results.

use std::fmt;

/// Limits shared by every search in the crate.
///
/// `nodes` counts explored search nodes (never wall-clock), `power_elements`
/// bounds the size of any materialized power, and `max_exponent` caps the
/// exponent scan of power-based containment checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    pub nodes: u64,
    pub power_elements: usize,
    pub max_exponent: u32,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            nodes: 10_000_000,
            power_elements: 1 << 20,
            max_exponent: 6,
        }
    }
}

impl Budget {
    pub fn with_nodes(mut self, nodes: u64) -> Self {
        self.nodes = nodes;
        self
    }

    pub fn with_power_elements(mut self, power_elements: usize) -> Self {
        self.power_elements = power_elements;
        self
    }

    pub fn with_max_exponent(mut self, max_exponent: u32) -> Self {
        self.max_exponent = max_exponent;
        self
    }
}

/// Why a `No` verdict is trustworthy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Certificate {
    /// The whole (finite) search space was explored.
    Exhaustion,
    /// Every exponent up to a sound bound was explored.
    ExhaustionUnderBound { bound: u128 },
    /// The source satisfies a sentence of the fragment that the target falsifies.
    CanonicalSentenceFailure { sentence: String },
}

impl fmt::Display for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Certificate::Exhaustion => write!(f, "exhaustion"),
            Certificate::ExhaustionUnderBound { bound } => {
                write!(f, "exhaustion-under-bound({bound})")
            }
            Certificate::CanonicalSentenceFailure { sentence } => {
                write!(f, "canonical-sentence-failure({sentence})")
            }
        }
    }
}

/// What ran out when a verdict is `Unknown`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Exhausted {
    pub explored: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict<T> {
    Yes(T),
    No(Certificate),
    Unknown(Exhausted),
}

impl<T> Verdict<T> {
    pub fn is_yes(&self) -> bool {
        matches!(self, Verdict::Yes(_))
    }

    pub fn is_no(&self) -> bool {
        matches!(self, Verdict::No(_))
    }

    pub fn is_unknown(&self) -> bool {
        matches!(self, Verdict::Unknown(_))
    }

    pub fn kind(&self) -> VerdictKind {
        match self {
            Verdict::Yes(_) => VerdictKind::Yes,
            Verdict::No(_) => VerdictKind::No,
            Verdict::Unknown(_) => VerdictKind::Unknown,
        }
    }

    pub fn witness(&self) -> Option<&T> {
        match self {
            Verdict::Yes(w) => Some(w),
            _ => None,
        }
    }

    pub fn into_witness(self) -> Option<T> {
        match self {
            Verdict::Yes(w) => Some(w),
            _ => None,
        }
    }

    pub fn map<U>(self, f: impl FnOnce(T) -> U) -> Verdict<U> {
        match self {
            Verdict::Yes(w) => Verdict::Yes(f(w)),
            Verdict::No(c) => Verdict::No(c),
            Verdict::Unknown(e) => Verdict::Unknown(e),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VerdictKind {
    Yes,
    No,
    Unknown,
}

impl fmt::Display for VerdictKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VerdictKind::Yes => "yes",
            VerdictKind::No => "no",
            VerdictKind::Unknown => "unknown",
        })
    }
}

/// Node counter shared by one top-level search.
#[derive(Debug, Clone)]
pub(crate) struct Meter {
    limit: u64,
    spent: u64,
}

impl Meter {
    pub(crate) fn new(limit: u64) -> Self {
        Meter { limit, spent: 0 }
    }

    /// Counts one node; `false` once the limit is reached.
    pub(crate) fn tick(&mut self) -> bool {
        self.spent += 1;
        self.spent <= self.limit
    }

    pub(crate) fn spent(&self) -> u64 {
        self.spent
    }

    pub(crate) fn exhausted(&self, reason: impl Into<String>) -> Exhausted {
        Exhausted {
            explored: self.spent,
            reason: reason.into(),
        }
    }
}
