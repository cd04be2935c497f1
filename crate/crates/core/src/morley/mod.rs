//! Morleyization: a fragment theory becomes a `Π₂⁻` theory in an expanded
//! language plus a family of quantifier-free types to omit.

mod expand;
mod formula;
mod theory;

use thiserror::Error;

use crate::logic::LogicError;

pub use expand::{
    canonical_expand, realizations, satisfies, universal_violations, verify_reduct_roundtrip,
};
pub use formula::{FragmentFormula, IndexTerm, RelRef};
pub use theory::{
    check_pi2minus, infer_signature, morleyize, morleyize_bounded, ClosureNode, DefiningAxiom,
    Literal, Morleyization, NodeKind, OmittedType, Pi2MinusTheory, PrenexSentence, QPattern,
    Quantifier, DEFAULT_FREE_VARIABLE_BOUND,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MorleyError {
    #[error(transparent)]
    Logic(#[from] LogicError),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unknown relation symbol {0}")]
    UnknownSymbol(String),
    #[error("symbol {symbol} has arity {expected}, used with {found} arguments")]
    ArityMismatch {
        symbol: String,
        expected: usize,
        found: usize,
    },
    #[error("relation index is not bound by any scheme in {0}")]
    UnboundIndex(String),
    #[error("{formula} has {count} free variables, more than the bound {bound}")]
    FreeVariableBound {
        formula: String,
        count: usize,
        bound: usize,
    },
    #[error("not a sentence: {0}")]
    NotASentence(String),
    #[error("not a scheme: {0}")]
    NotAScheme(String),
}
