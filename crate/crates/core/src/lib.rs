//! Zeroth-order stochastic optimization when the sampling distribution
//! depends on the decision.
//!
//! The main entry point is [`o2nc::run_o2nc`], an online-to-non-convex
//! conversion driven by either a two-point or a one-point residual gradient
//! estimator. [`sgd::run_sgd`] is the mini-batch SGD baseline and
//! [`schedules`] turns known problem constants into parameter choices.

pub mod error;
pub mod estimators;
pub mod o2nc;
pub mod oracle;
pub mod problem_spec;
pub mod problems;
pub mod random;
pub mod schedules;
pub mod sgd;
pub mod smoothing;
pub mod vector;

pub use error::{Error, Result};
pub use estimators::{BaselineKind, GradientEstimate, ResidualState};
pub use o2nc::{goldstein_certificate, run_o2nc, EstimatorOption, O2NCConfig, RunTrace, TraceDetail};
pub use oracle::{noisy_value_oracle, QueryCounter, Sampler, StochasticOracle};
pub use problem_spec::ProblemSpec;
pub use random::{make_rng, RandomSource};
pub use schedules::{clamp_budget, Schedule};
pub use sgd::{run_sgd, SGDConfig, SgdEstimator};
pub use smoothing::SmoothingParams;
pub use vector::DecisionVector;
