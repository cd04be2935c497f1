//! Invariant measures on countable relational structures: exchangeable
//! samplers, statistical audits, Morleyization and inverse-limit builds.

pub mod ahk;
pub mod gallery;
pub mod limit;
pub mod logic;
pub mod morley;
pub mod sexpr;
pub mod stats;
