//! Online-to-non-convex conversion driven by zeroth-order estimates.
//!
//! Iterations are grouped into `K` blocks of `M`. Inside a block the
//! displacement `delta_t` is learned by projected online gradient descent on
//! the ball of radius `D = delta / M`; it is reset to zero at every block
//! start. Gradients are queried at the random interpolation point
//! `y_t = x_{t-1} + s_t delta_t` and the output is the mean of the `y_t` of a
//! uniformly chosen block.

use crate::error::{invalid, Error, Result};
use crate::estimators::{one_point_residual, two_point, ResidualState};
use crate::oracle::StochasticOracle;
use crate::random::RandomSource;
use crate::smoothing::{mc_smoothed_gradient, SmoothingParams};
use crate::vector::DecisionVector;

/// Which estimator builds `g_t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorOption {
    /// Option I: two-point estimator, two queries per iteration.
    TwoPoint,
    /// Option II: one-point residual estimator, one query per iteration plus
    /// one initialization query.
    OnePointResidual,
}

impl EstimatorOption {
    /// Closed-form query count for a horizon of `t` iterations.
    pub fn total_queries(&self, horizon: u64) -> u64 {
        match self {
            EstimatorOption::TwoPoint => 2 * horizon,
            EstimatorOption::OnePointResidual => horizon + 1,
        }
    }
}

/// How much per-iteration state a trace keeps. `y_t` is always stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TraceDetail {
    #[default]
    Full,
    /// Drops `x_t`, `delta_t` and `g_t`.
    Compact,
}

#[derive(Debug, Clone, PartialEq)]
pub struct O2NCConfig {
    pub delta: f64,
    pub block_len: usize,
    pub n_blocks: usize,
    pub step_size: f64,
    pub option: EstimatorOption,
    /// Initial point `x_0`; the origin when `None`.
    pub start: Option<DecisionVector>,
    pub detail: TraceDetail,
}

impl O2NCConfig {
    pub fn new(
        delta: f64,
        block_len: usize,
        n_blocks: usize,
        step_size: f64,
        option: EstimatorOption,
    ) -> Result<Self> {
        let cfg = Self {
            delta,
            block_len,
            n_blocks,
            step_size,
            option,
            start: None,
            detail: TraceDetail::Full,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_start(mut self, start: DecisionVector) -> Self {
        self.start = Some(start);
        self
    }

    pub fn with_detail(mut self, detail: TraceDetail) -> Self {
        self.detail = detail;
        self
    }

    /// `D = delta / M`.
    pub fn inner_radius(&self) -> f64 {
        self.delta / self.block_len as f64
    }

    /// `T = K M`.
    pub fn horizon(&self) -> usize {
        self.n_blocks * self.block_len
    }

    pub fn predicted_queries(&self) -> u64 {
        self.option.total_queries(self.horizon() as u64)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(invalid("delta", format!("must be > 0, got {}", self.delta)));
        }
        if self.block_len == 0 {
            return Err(invalid("block_len", "must be >= 1"));
        }
        if self.n_blocks == 0 {
            return Err(invalid("n_blocks", "must be >= 1"));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(invalid("step_size", format!("must be > 0, got {}", self.step_size)));
        }
        if let Some(s) = &self.start {
            if !s.is_finite() {
                return Err(Error::NonFinite {
                    context: "start point".into(),
                });
            }
        }
        Ok(())
    }
}

/// Euclidean projection onto the closed ball of radius `radius` at the origin.
pub fn project_ball(v: &DecisionVector, radius: f64) -> DecisionVector {
    assert!(radius >= 0.0, "projection radius must be >= 0");
    let n = v.norm();
    if n <= radius {
        v.clone()
    } else {
        v.scaled(radius / n)
    }
}

/// One iteration of a run. `t` counts from 1 for O2NC and from 0 for SGD.
#[derive(Debug, Clone, PartialEq)]
pub struct IterRecord {
    pub t: usize,
    /// The point whose gradient was estimated: `y_t` for O2NC, `x_t` for SGD.
    pub y: DecisionVector,
    pub x: Option<DecisionVector>,
    /// Displacement used at this iteration (`delta_t`, or `-eta g_t` for SGD).
    pub step: Option<DecisionVector>,
    pub step_norm: f64,
    /// Interpolation draw `s_t`; zero for SGD.
    pub s: f64,
    pub g: Option<DecisionVector>,
    /// Oracle queries consumed by the run up to and including this iteration.
    pub queries: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub records: Vec<IterRecord>,
    pub block_len: usize,
    /// Zero-based index of the selected output block.
    pub output_block: usize,
    /// Mean of the query points of the output block.
    pub output: DecisionVector,
    pub last_iterate: DecisionVector,
    pub start: DecisionVector,
    pub queries: u64,
}

impl RunTrace {
    pub fn n_blocks(&self) -> usize {
        self.records.len() / self.block_len
    }

    pub fn block(&self, k: usize) -> &[IterRecord] {
        &self.records[k * self.block_len..(k + 1) * self.block_len]
    }

    pub fn block_mean(&self, k: usize) -> DecisionVector {
        DecisionVector::mean(self.block(k).iter().map(|r| &r.y)).expect("blocks are non-empty")
    }

    pub fn output_points(&self) -> impl Iterator<Item = &DecisionVector> {
        self.block(self.output_block).iter().map(|r| &r.y)
    }
}

fn abort(iteration: usize, err: Error) -> Error {
    Error::Aborted {
        iteration,
        reason: err.to_string(),
    }
}

/// Runs ZO-O2NC for `K M` iterations. Uses exactly `2T` oracle queries with
/// the two-point option and `T + 1` with the residual option.
pub fn run_o2nc(cfg: &O2NCConfig, oracle: &mut StochasticOracle, rng: &mut RandomSource) -> Result<RunTrace> {
    cfg.validate()?;
    let d = oracle.dim();
    let start = cfg.start.clone().unwrap_or_else(|| DecisionVector::zeros(d));
    if start.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: start.dim(),
        });
    }
    let radius = cfg.inner_radius();
    let base_queries = oracle.queries();
    let full = cfg.detail == TraceDetail::Full;

    let mut residual = match cfg.option {
        EstimatorOption::OnePointResidual => {
            Some(ResidualState::initialize(&start, cfg.delta, oracle, rng).map_err(|e| abort(0, e))?.0)
        }
        EstimatorOption::TwoPoint => None,
    };

    let mut x = start.clone();
    let mut records = Vec::with_capacity(cfg.horizon());
    for k in 0..cfg.n_blocks {
        let mut step = DecisionVector::zeros(d);
        for m in 0..cfg.block_len {
            let t = k * cfg.block_len + m + 1;
            let s = rng.uniform();
            let y = x.add_scaled(s, &step);
            x.axpy(1.0, &step);
            let est = match residual.as_mut() {
                Some(state) => one_point_residual(&y, cfg.delta, oracle, state, rng),
                None => two_point(&y, cfg.delta, oracle, rng),
            }
            .map_err(|e| abort(t, e))?;
            let next = project_ball(&step.add_scaled(-cfg.step_size, &est.g), radius);
            if !next.is_finite() {
                return Err(abort(
                    t,
                    Error::NonFinite {
                        context: "displacement update".into(),
                    },
                ));
            }
            records.push(IterRecord {
                t,
                step_norm: step.norm(),
                x: full.then(|| x.clone()),
                step: full.then(|| step.clone()),
                g: full.then_some(est.g),
                s,
                y,
                queries: oracle.queries() - base_queries,
            });
            step = next;
        }
    }

    let output_block = rng.index(cfg.n_blocks);
    let mut trace = RunTrace {
        records,
        block_len: cfg.block_len,
        output_block,
        output: DecisionVector::zeros(d),
        last_iterate: x,
        start,
        queries: oracle.queries() - base_queries,
    };
    trace.output = trace.block_mean(output_block);
    Ok(trace)
}

/// Norm of the block-averaged smoothed gradient at the output block.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub value: f64,
    pub mean_gradient: DecisionVector,
    /// Coordinatewise standard error of `mean_gradient`.
    pub std_error: Vec<f64>,
}

/// Estimates `|| (1/M) sum_{t in output block} grad f_delta(y_t) ||` with
/// `mc_smoothed_gradient` at every block point. Each point draws from its
/// own stream forked from `rng`.
pub fn goldstein_certificate<F>(
    trace: &RunTrace,
    f: F,
    p: &SmoothingParams,
    rng: &mut RandomSource,
) -> Result<Certificate>
where
    F: Fn(&[f64]) -> f64,
{
    certificate_at(trace.output_points(), &f, p, rng)
}

/// Certificate for an arbitrary non-empty set of points.
pub fn certificate_at<'a, I, F>(points: I, f: &F, p: &SmoothingParams, rng: &mut RandomSource) -> Result<Certificate>
where
    I: IntoIterator<Item = &'a DecisionVector>,
    F: Fn(&[f64]) -> f64,
{
    let mut sum: Option<DecisionVector> = None;
    let mut var_sum: Vec<f64> = Vec::new();
    let mut n = 0usize;
    for y in points {
        let mut sub = rng.fork();
        let g = mc_smoothed_gradient(f, y, p, &mut sub)?;
        match sum.as_mut() {
            Some(acc) => acc.axpy(1.0, &g.mean),
            None => {
                var_sum = vec![0.0; g.mean.dim()];
                sum = Some(g.mean.clone());
            }
        }
        for (v, se) in var_sum.iter_mut().zip(&g.std_error) {
            *v += se * se;
        }
        n += 1;
    }
    let mut mean = sum.ok_or_else(|| invalid("points", "certificate needs at least one point"))?;
    mean.scale_mut(1.0 / n as f64);
    Ok(Certificate {
        value: mean.norm(),
        std_error: var_sum.iter().map(|v| v.sqrt() / n as f64).collect(),
        mean_gradient: mean,
    })
}
