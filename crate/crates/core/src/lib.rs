pub mod containment;
pub mod cores;
pub mod corpus;
pub mod error;
pub mod graphs;
pub mod logic;
pub mod morphism;
mod search;
pub mod structure;
pub mod verdict;

pub use error::{Error, Result};
pub use structure::{Signature, Structure, Substructure};
pub use verdict::{Budget, Certificate, Exhausted, Verdict, VerdictKind};
