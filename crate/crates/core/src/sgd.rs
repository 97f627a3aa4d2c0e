//! Mini-batch two-point SGD on the smoothed surrogate, the comparison
//! baseline for Goldstein stationarity. The same loop can run any of the
//! textbook baseline estimators.

use crate::error::{invalid, Error, Result};
use crate::estimators::{baseline_estimate, minibatch_two_point, two_point_moment_bound, BaselineKind};
use crate::o2nc::{IterRecord, RunTrace, TraceDetail};
use crate::oracle::StochasticOracle;
use crate::problem_spec::ProblemSpec;
use crate::random::RandomSource;
use crate::vector::DecisionVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SgdEstimator {
    /// Mini-batch two-point sphere estimator with radius `delta`.
    MinibatchTwoPoint,
    /// A baseline estimator with smoothing parameter `delta`, averaged over
    /// the batch.
    Baseline(BaselineKind),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SGDConfig {
    pub delta: f64,
    pub batch: usize,
    pub iterations: usize,
    pub step_size: f64,
    pub estimator: SgdEstimator,
    pub start: Option<DecisionVector>,
    pub detail: TraceDetail,
}

impl SGDConfig {
    pub fn new(delta: f64, batch: usize, iterations: usize, step_size: f64) -> Result<Self> {
        let cfg = Self {
            delta,
            batch,
            iterations,
            step_size,
            estimator: SgdEstimator::MinibatchTwoPoint,
            start: None,
            detail: TraceDetail::Full,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_estimator(mut self, estimator: SgdEstimator) -> Self {
        self.estimator = estimator;
        self
    }

    pub fn with_start(mut self, start: DecisionVector) -> Self {
        self.start = Some(start);
        self
    }

    pub fn with_detail(mut self, detail: TraceDetail) -> Self {
        self.detail = detail;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(invalid("delta", format!("must be > 0, got {}", self.delta)));
        }
        if self.batch == 0 {
            return Err(invalid("batch", "must be >= 1"));
        }
        if self.iterations == 0 {
            return Err(invalid("iterations", "must be >= 1"));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(invalid("step_size", format!("must be > 0, got {}", self.step_size)));
        }
        Ok(())
    }

    /// Queries per iteration for a problem of dimension `dim`.
    pub fn queries_per_iteration(&self, dim: usize) -> u64 {
        let per_estimate = match self.estimator {
            SgdEstimator::MinibatchTwoPoint => 2,
            SgdEstimator::Baseline(kind) => kind.queries_per_estimate(dim),
        };
        per_estimate * self.batch as u64
    }

    /// `2 B T` for the two-point estimator.
    pub fn predicted_queries(&self, dim: usize) -> u64 {
        self.queries_per_iteration(dim) * self.iterations as u64
    }

    /// `beta_delta = c sqrt(d) L / delta`.
    pub fn smoothness(&self, spec: &ProblemSpec) -> f64 {
        smoothness(spec, self.delta)
    }

    /// `V_delta = d^2 sigma^2 / (2 delta^2) + 16 sqrt(2 pi) d L^2`.
    pub fn variance_bound(&self, spec: &ProblemSpec) -> f64 {
        two_point_moment_bound(spec.dimension, spec.noise_bound, self.delta, spec.lipschitz)
    }

    /// Checks `eta <= 1 / beta_delta`, the admissible step for descent on `f_delta`.
    pub fn check_step(&self, spec: &ProblemSpec) -> Result<()> {
        let beta = self.smoothness(spec);
        if self.step_size * beta <= 1.0 {
            Ok(())
        } else {
            Err(invalid(
                "step_size",
                format!("{} exceeds 1/beta_delta = {}", self.step_size, 1.0 / beta),
            ))
        }
    }
}

pub(crate) fn smoothness(spec: &ProblemSpec, delta: f64) -> f64 {
    spec.smoothing_constant * (spec.dimension as f64).sqrt() * spec.lipschitz / delta
}

/// Runs `T` SGD steps `x_{t+1} = x_t - eta g_t` and returns `x_{t_out}` with
/// `t_out ~ Unif{0..T-1}` as output. Two-point runs use exactly `2 B T` queries.
pub fn run_sgd(cfg: &SGDConfig, oracle: &mut StochasticOracle, rng: &mut RandomSource) -> Result<RunTrace> {
    cfg.validate()?;
    let d = oracle.dim();
    let start = cfg.start.clone().unwrap_or_else(|| DecisionVector::zeros(d));
    if start.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: start.dim(),
        });
    }
    let full = cfg.detail == TraceDetail::Full;
    let base_queries = oracle.queries();
    let abort = |t: usize, e: Error| Error::Aborted {
        iteration: t,
        reason: e.to_string(),
    };

    let mut x = start.clone();
    let mut records = Vec::with_capacity(cfg.iterations);
    for t in 0..cfg.iterations {
        let g = match cfg.estimator {
            SgdEstimator::MinibatchTwoPoint => minibatch_two_point(&x, cfg.delta, cfg.batch, oracle, rng)
                .map_err(|e| abort(t, e))?
                .g,
            SgdEstimator::Baseline(kind) => {
                let mut acc = DecisionVector::zeros(d);
                for _ in 0..cfg.batch {
                    let e = baseline_estimate(kind, &x, cfg.delta, oracle, rng).map_err(|e| abort(t, e))?;
                    acc.axpy(1.0, &e.g);
                }
                acc.scale_mut(1.0 / cfg.batch as f64);
                acc
            }
        };
        let step = g.scaled(-cfg.step_size);
        let next = x.add_scaled(1.0, &step);
        if !next.is_finite() {
            return Err(abort(
                t,
                Error::NonFinite {
                    context: "SGD update".into(),
                },
            ));
        }
        records.push(IterRecord {
            t,
            y: x.clone(),
            x: full.then(|| x.clone()),
            step_norm: step.norm(),
            step: full.then_some(step),
            s: 0.0,
            g: full.then_some(g),
            queries: oracle.queries() - base_queries,
        });
        x = next;
    }

    let t_out = rng.index(cfg.iterations);
    Ok(RunTrace {
        output: records[t_out].y.clone(),
        records,
        block_len: 1,
        output_block: t_out,
        last_iterate: x,
        start,
        queries: oracle.queries() - base_queries,
    })
}
