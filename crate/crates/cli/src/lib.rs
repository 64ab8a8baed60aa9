//! Configuration and subcommands behind the `nesh` binary.

// NaN-rejecting `!(x > 0.0)` checks are deliberate
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;

pub use config::RunConfig;
