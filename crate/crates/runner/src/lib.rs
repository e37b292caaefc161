//! Config-driven experiments over the `grl-core` lab: single-agent runs, sequence prediction,
//! repeated games and one-shot value queries, with seeded, byte-reproducible CSV/JSON output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod literal;
pub mod output;
pub mod run;
pub mod sweep;
pub mod values;

pub use config::{Config, Experiment, Kind, Seeds};
pub use error::RunError;
