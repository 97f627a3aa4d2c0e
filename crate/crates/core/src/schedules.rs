//! Closed-form parameter schedules.
//!
//! O2NC (nonsmooth, `(delta, eps)`-Goldstein target):
//!
//! ```text
//! M   = ceil(16 G^2 / eps^2)
//! eta = D / (G sqrt(M)),   D = delta / M
//! T   = M ceil(2 (gamma + delta L) / (delta eps))
//! ```
//!
//! with `G^2 = d^2 sigma^2 / (2 delta^2) + 16 sqrt(2 pi) d L^2` for the
//! two-point option and `G^2 = 6 d^2 sigma^2 / delta^2 + 385 d^2 L^2` for the
//! residual option. Smooth targets pick `delta` from `L_g` or `L_H` and run
//! the nonsmooth schedule at accuracy `eps / 2`. The SGD baseline uses
//! `eta = 1 / beta_delta`, `B = ceil(2 V_delta / eps^2)`,
//! `T = ceil(4 beta_delta (gamma + delta L) / eps^2)`.

use crate::error::{invalid, Error, Result};
use crate::estimators::SPHERE_CONST;
use crate::o2nc::{EstimatorOption, O2NCConfig};
use crate::problem_spec::ProblemSpec;
use crate::sgd::{smoothness, SGDConfig};

/// Coefficients of the Lipschitz terms in the second-moment constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentConstants {
    /// Coefficient of `d L^2` in `G_I^2` (and `V_delta`).
    pub two_point_lipschitz: f64,
    /// Coefficient of `d^2 L^2` in `G_II^2`.
    pub residual_lipschitz: f64,
}

impl Default for MomentConstants {
    fn default() -> Self {
        Self {
            two_point_lipschitz: SPHERE_CONST,
            residual_lipschitz: 385.0,
        }
    }
}

impl MomentConstants {
    /// The smaller constants printed alongside the complexity statement
    /// (`2 d L^2` and `42 d^2 L^2`).
    pub fn compact() -> Self {
        Self {
            two_point_lipschitz: 2.0,
            residual_lipschitz: 42.0,
        }
    }

    pub fn g_squared(&self, spec: &ProblemSpec, delta: f64, option: EstimatorOption) -> f64 {
        let d = spec.dimension as f64;
        let (s2, l2) = (spec.noise_bound * spec.noise_bound, spec.lipschitz * spec.lipschitz);
        match option {
            EstimatorOption::TwoPoint => d * d * s2 / (2.0 * delta * delta) + self.two_point_lipschitz * d * l2,
            EstimatorOption::OnePointResidual => 6.0 * d * d * s2 / (delta * delta) + self.residual_lipschitz * d * d * l2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKind {
    O2nc(EstimatorOption),
    Sgd,
}

/// Which smoothness assumption picks `delta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmoothMode {
    /// `delta = eps / (4 L_g)`.
    GradientLipschitz,
    /// `delta = sqrt(eps / (2 L_H))`.
    HessianLipschitz,
}

/// Record of a budget clamp: the schedule before clamping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClampInfo {
    pub cap: u64,
    pub theoretical_queries: u64,
    pub theoretical_horizon: u64,
    pub theoretical_block_len: u64,
    pub theoretical_batch: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub kind: ScheduleKind,
    pub delta: f64,
    /// Accuracy the formulas were evaluated at.
    pub epsilon: f64,
    /// `M` for O2NC, 1 for SGD.
    pub block_len: u64,
    /// `K` for O2NC, equal to `T` for SGD.
    pub n_blocks: u64,
    /// `T`.
    pub horizon: u64,
    /// `B` for SGD, 1 for O2NC.
    pub batch: u64,
    pub step_size: f64,
    /// `G^2` for O2NC, `V_delta` for SGD.
    pub moment_bound: f64,
    /// `beta_delta` for SGD.
    pub smoothness: Option<f64>,
    pub predicted_queries: u64,
    pub clamp: Option<ClampInfo>,
}

impl Schedule {
    pub fn is_clamped(&self) -> bool {
        self.clamp.is_some()
    }

    pub fn o2nc_config(&self) -> Result<O2NCConfig> {
        match self.kind {
            ScheduleKind::O2nc(option) => O2NCConfig::new(
                self.delta,
                to_usize(self.block_len)?,
                to_usize(self.n_blocks)?,
                self.step_size,
                option,
            ),
            ScheduleKind::Sgd => Err(invalid("kind", "schedule is for SGD, not O2NC")),
        }
    }

    pub fn sgd_config(&self) -> Result<SGDConfig> {
        match self.kind {
            ScheduleKind::Sgd => SGDConfig::new(self.delta, to_usize(self.batch)?, to_usize(self.horizon)?, self.step_size),
            ScheduleKind::O2nc(_) => Err(invalid("kind", "schedule is for O2NC, not SGD")),
        }
    }
}

fn to_usize(v: u64) -> Result<usize> {
    usize::try_from(v).map_err(|_| invalid("schedule", format!("{v} does not fit in usize")))
}

/// Ceiling that treats values within `1e-12` relative of an integer as that
/// integer, so decimal inputs such as `2 / 0.4` do not gain a spurious unit.
pub(crate) fn ceil_int(x: f64, name: &'static str) -> Result<u64> {
    if !x.is_finite() || x < 0.0 {
        return Err(invalid(name, format!("cannot take ceiling of {x}")));
    }
    let r = x.round();
    let c = if (x - r).abs() <= 1e-12 * r.max(1.0) { r } else { x.ceil() };
    if c >= 2f64.powi(62) {
        return Err(invalid(name, format!("value {x} overflows the schedule range")));
    }
    Ok((c as u64).max(1))
}

fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(name, format!("must be > 0, got {v}")))
    }
}

/// O2NC schedule at smoothing radius `delta` and accuracy `eps`, default constants.
pub fn schedule_theorem2(spec: &ProblemSpec, delta: f64, eps: f64, option: EstimatorOption) -> Result<Schedule> {
    schedule_theorem2_with(spec, delta, eps, option, &MomentConstants::default())
}

pub fn schedule_theorem2_with(
    spec: &ProblemSpec,
    delta: f64,
    eps: f64,
    option: EstimatorOption,
    constants: &MomentConstants,
) -> Result<Schedule> {
    spec.validate()?;
    check_positive("delta", delta)?;
    check_positive("epsilon", eps)?;
    let g2 = constants.g_squared(spec, delta, option);
    let block_len = ceil_int(16.0 * g2 / (eps * eps), "block_len")?;
    let n_blocks = ceil_int(2.0 * (spec.gap / delta + spec.lipschitz) / eps, "n_blocks")?;
    let horizon = block_len
        .checked_mul(n_blocks)
        .ok_or_else(|| invalid("horizon", "overflows u64"))?;
    Ok(Schedule {
        kind: ScheduleKind::O2nc(option),
        delta,
        epsilon: eps,
        block_len,
        n_blocks,
        horizon,
        batch: 1,
        step_size: o2nc_step(delta, g2, block_len),
        moment_bound: g2,
        smoothness: None,
        predicted_queries: option.total_queries(horizon),
        clamp: None,
    })
}

/// `eta = D / (G sqrt(M))` with `D = delta / M`.
fn o2nc_step(delta: f64, g2: f64, block_len: u64) -> f64 {
    let m = block_len as f64;
    delta / m / (g2.sqrt() * m.sqrt())
}

/// Schedule targeting a `(radius, eps)`-Goldstein point. With `halve_radius`
/// the algorithm runs at smoothing radius `radius / 2`, which is what makes
/// the guarantee hold at `radius` itself.
pub fn schedule_goldstein(
    spec: &ProblemSpec,
    radius: f64,
    eps: f64,
    option: EstimatorOption,
    halve_radius: bool,
) -> Result<Schedule> {
    let delta = if halve_radius { radius / 2.0 } else { radius };
    schedule_theorem2(spec, delta, eps, option)
}

/// Smoothing radius for an `eps`-stationary target under the given mode.
pub fn smooth_delta(spec: &ProblemSpec, eps: f64, mode: SmoothMode) -> Result<f64> {
    check_positive("epsilon", eps)?;
    match mode {
        SmoothMode::GradientLipschitz => {
            let lg = spec.grad_lipschitz.ok_or(Error::MissingConstant("grad_lipschitz"))?;
            Ok(eps / (4.0 * lg))
        }
        SmoothMode::HessianLipschitz => {
            let lh = spec.hess_lipschitz.ok_or(Error::MissingConstant("hess_lipschitz"))?;
            Ok((eps / (2.0 * lh)).sqrt())
        }
    }
}

/// Schedule for an `eps`-stationary point of a smooth objective.
pub fn schedule_smooth(spec: &ProblemSpec, eps: f64, mode: SmoothMode, option: EstimatorOption) -> Result<Schedule> {
    spec.validate()?;
    let delta = smooth_delta(spec, eps, mode)?;
    schedule_theorem2(spec, delta, eps / 2.0, option)
}

/// Mini-batch two-point SGD schedule.
pub fn schedule_sgd(spec: &ProblemSpec, delta: f64, eps: f64) -> Result<Schedule> {
    spec.validate()?;
    check_positive("delta", delta)?;
    check_positive("epsilon", eps)?;
    let constants = MomentConstants::default();
    let v = constants.g_squared(spec, delta, EstimatorOption::TwoPoint);
    let beta = smoothness(spec, delta);
    let batch = ceil_int(2.0 * v / (eps * eps), "batch")?;
    let horizon = ceil_int(4.0 * beta * (spec.gap + delta * spec.lipschitz) / (eps * eps), "iterations")?;
    let predicted = batch
        .checked_mul(horizon)
        .and_then(|bt| bt.checked_mul(2))
        .ok_or_else(|| invalid("predicted_queries", "overflows u64"))?;
    Ok(Schedule {
        kind: ScheduleKind::Sgd,
        delta,
        epsilon: eps,
        block_len: 1,
        n_blocks: horizon,
        horizon,
        batch,
        step_size: 1.0 / beta,
        moment_bound: v,
        smoothness: Some(beta),
        predicted_queries: predicted,
        clamp: None,
    })
}

/// Shrinks a schedule to fit `max_queries`.
///
/// O2NC keeps `M` and `eta` and drops blocks; SGD keeps `B` and `eta` and
/// drops iterations. If not even one block (one iteration) fits, the block
/// length (batch) is cut to fit a single block and, for O2NC, `eta` is
/// recomputed from the new `M`. Fails only when `max_queries < 2`, below the
/// cost of any run.
pub fn clamp_budget(s: &Schedule, max_queries: u64) -> Result<Schedule> {
    if s.predicted_queries <= max_queries {
        return Ok(s.clone());
    }
    if max_queries < 2 {
        return Err(invalid("max_queries", "every method needs at least 2 queries"));
    }
    let info = ClampInfo {
        cap: max_queries,
        theoretical_queries: s.predicted_queries,
        theoretical_horizon: s.horizon,
        theoretical_block_len: s.block_len,
        theoretical_batch: s.batch,
    };
    let mut out = s.clone();
    match s.kind {
        ScheduleKind::O2nc(option) => {
            let (per_block, budget) = match option {
                EstimatorOption::TwoPoint => (2 * s.block_len, max_queries),
                EstimatorOption::OnePointResidual => (s.block_len, max_queries - 1),
            };
            let k = budget / per_block;
            if k >= 1 {
                out.n_blocks = k;
            } else {
                out.block_len = match option {
                    EstimatorOption::TwoPoint => max_queries / 2,
                    EstimatorOption::OnePointResidual => max_queries - 1,
                };
                out.n_blocks = 1;
                out.step_size = o2nc_step(s.delta, s.moment_bound, out.block_len);
            }
            out.horizon = out.block_len * out.n_blocks;
            out.predicted_queries = option.total_queries(out.horizon);
        }
        ScheduleKind::Sgd => {
            let t = max_queries / (2 * s.batch);
            if t >= 1 {
                out.horizon = t;
            } else {
                out.batch = max_queries / 2;
                out.horizon = 1;
            }
            out.n_blocks = out.horizon;
            out.predicted_queries = 2 * out.batch * out.horizon;
        }
    }
    out.clamp = Some(info);
    Ok(out)
}
