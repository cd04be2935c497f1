//! Measured structures as inverse limits of finite stages built along a
//! guide model, with point sampling and finite-partition rescaling.

mod guide;
mod kaleidoscope;
mod rescale;
mod sample;
mod stage;

pub use num_rational::BigRational;
use thiserror::Error;

use crate::logic::LogicError;
use crate::morley::MorleyError;

pub use guide::{class_count, equality_pattern, equality_patterns, GuideModel, Handle};
pub use kaleidoscope::{
    kaleidoscope_guide, kaleidoscope_theory, KaleidoscopeGuide, PREDICATE_PREFIX,
};
pub use rescale::{split_cells, stored_weights, Weight, WeightCell};
pub use sample::{
    marginal_counts, LimitHandle, LimitSampler, PathPoint, SampledStructure, StructureAudit,
};
pub use stage::{
    advance_stage, initial_report, schedule_entry, schedule_slot, stage_invariants, stage_summary,
    strong_witness_check, CheckOutcome, ScheduleEntry, Stage, StageLog, StageReport,
};

#[derive(Debug, Error)]
pub enum LimitError {
    #[error(transparent)]
    Logic(#[from] LogicError),
    #[error(transparent)]
    Morley(#[from] MorleyError),
    #[error("copy {copy} of element {original} changes the type at stage {stage}: {query}")]
    DaggerViolation {
        stage: usize,
        original: Handle,
        copy: Handle,
        query: String,
    },
    #[error("no witness for {sentence} on {tuple:?}")]
    NoWitness {
        sentence: String,
        tuple: Vec<Handle>,
    },
    #[error("no refuting formula of type {q} found for {tuple:?}")]
    NoRefutation { q: usize, tuple: Vec<Handle> },
    #[error("points {i} and {j} still collide at depth {depth}")]
    Collision { i: usize, j: usize, depth: usize },
    #[error("invalid weight: {0}")]
    InvalidWeight(String),
    #[error("cell {cell} has zero weight")]
    ZeroWeight { cell: usize },
    #[error("unsupported formula for this guide: {0}")]
    Unsupported(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("manifest: {0}")]
    Manifest(String),
}
