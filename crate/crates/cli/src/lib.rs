//! Command-line experiment runner for the `otsm` library.
//!
//! The binary wraps four experiments (uncoded BER, union bound, PSD/OOBE and
//! coded BER) behind TOML configs with deterministic seeding, provenance
//! headers and per-point checkpointing.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;
pub mod selftest;
pub mod stats;

pub use commands::{CliError, CliResult, Context};
pub use config::{load, ExperimentConfig, LoadedConfig, Preset};
