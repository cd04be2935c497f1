//! Finite relational structures, quantifier-free formulas, permutations and
//! type fingerprints.

mod automorphism;
mod fingerprint;
mod formula;
pub mod jsonl;
mod permutation;
mod signature;
mod structure;

use thiserror::Error;

pub use automorphism::{
    automorphisms, automorphisms_bounded, automorphisms_brute_force, group_dcl_trivial,
    group_dcl_trivial_bounded, BRUTE_FORCE_BOUND, DEFAULT_AUTOMORPHISM_BOUND,
};
pub use fingerprint::{argument_patterns, qf_fingerprint, TypeFingerprint};
pub use formula::{eval_qf, QfFormula};
pub use permutation::{apply_permutation, Permutation};
pub use signature::{Signature, Symbol, SymbolFamily};
pub use structure::FiniteStructure;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LogicError {
    #[error("size mismatch: expected {expected}, found {found}")]
    SizeMismatch { expected: usize, found: usize },
    #[error("symbol {symbol} has arity {expected}, got {found} arguments")]
    ArityMismatch {
        symbol: String,
        expected: usize,
        found: usize,
    },
    #[error("variable x{var} is unbound by a tuple of length {tuple_len}")]
    UnboundVariable { var: usize, tuple_len: usize },
    #[error("element {element} is outside the domain of size {domain}")]
    ElementOutOfDomain { element: usize, domain: usize },
    #[error("domain size {size} exceeds the bound {bound}")]
    BoundExceeded { size: usize, bound: usize },
    #[error("unknown symbol {0}")]
    UnknownSymbol(String),
    #[error("duplicate symbol {0}")]
    DuplicateSymbol(String),
    #[error("not a permutation: {0:?}")]
    InvalidPermutation(Vec<usize>),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("json error: {0}")]
    Json(String),
}
