//! Batch experiment runner for the `ddzo` optimizers.
//!
//! A run is described by one TOML file (see [`config`]); [`runner::run_experiment`]
//! executes every (method, instance, seed) job and writes CSV traces plus a
//! summary that [`summary::summarize`] can rebuild from the traces alone.

pub mod config;
pub mod error;
pub mod instance;
pub mod runner;
pub mod summary;

pub use config::RunConfig;
pub use error::{CliError, Result};
pub use runner::{run_experiment, validate, Outcome};
pub use summary::{summarize, SummaryRow};
