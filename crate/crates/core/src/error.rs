use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("element {element} is out of range for a domain of size {size}")]
    OutOfRange { element: usize, size: usize },
    #[error("symbol `{symbol}` has arity {expected} but was given {found} arguments")]
    ArityMismatch {
        symbol: String,
        expected: usize,
        found: usize,
    },
    #[error("duplicate signature symbol `{0}`")]
    DuplicateSymbol(String),
    #[error("unknown relation symbol `{0}`")]
    UnknownSymbol(String),
    #[error("variable `{0}` is not bound by the quantifier prefix")]
    UnboundVariable(String),
    #[error("arity of `{0}` must be at least 1")]
    ZeroArity(String),
    #[error("structures must have a non-empty domain")]
    EmptyDomain,
    #[error("element set must be non-empty")]
    EmptySubset,
    #[error("signature mismatch")]
    SignatureMismatch,
    #[error("budget exceeded: {what} needs {required}, limit is {limit}")]
    BudgetExceeded {
        what: &'static str,
        required: u128,
        limit: u128,
    },
    #[error("signature is not all-unary")]
    NotUnary,
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("unknown fixture `{0}`")]
    UnknownFixture(String),
    #[error("undecided after {explored} search nodes: {reason}")]
    Unknown { explored: u64, reason: String },
    #[error("internal invariant violated: {0}")]
    InvariantViolation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
