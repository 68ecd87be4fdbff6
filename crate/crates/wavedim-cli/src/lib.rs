//! Command-line laboratory on top of the `wavedim` library: configuration
//! files, γ-sweep orchestration, inequality campaigns, flat-file
//! persistence, scaling-law fits, and report emission.
//!
//! All emitted CSV and JSON payloads are byte-deterministic for a fixed
//! config and seed; wall-clock timestamps go to a separate metadata file
//! so re-runs can be compared bytewise.

// Validation guards negate comparisons so that NaN also fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod ineq_cmd;
pub mod report;
pub mod sweep;

pub use error::{CliError, CliResult};
