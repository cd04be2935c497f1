//! Per-subset randomness, the AHK sampler interface and Monte Carlo
//! estimators.

mod estimate;
mod sampler;
mod seed;

use thiserror::Error;

use crate::logic::LogicError;

pub use estimate::{
    audit_reads, coherence_check, coherence_sweep, dissociation_test, dissociation_test_on,
    estimate_measure, estimate_positive_types, invariance_test, studentize, CoherenceCondition,
    CoherenceFailure, CoherenceReport, DissociationReport, GapReport, PositiveType, ReadAudit,
    StatReport, DEFAULT_SIGMA,
};
pub use sampler::{sample, sample_on, type_at, type_function, AhkSampler, XiFamily};
pub use seed::{xi, SeedKey, Uniform};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AhkError {
    #[error(transparent)]
    Logic(#[from] LogicError),
    #[error("label {0} appears twice in a tuple")]
    RepeatedLabel(usize),
    #[error("tuples overlap at label {0}")]
    OverlappingTuples(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
