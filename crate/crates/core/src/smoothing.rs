//! Uniform sphere/ball sampling and Monte-Carlo evaluation of the smoothed
//! surrogate `f_delta(x) = E_{u ~ Unif(B^d)} f(x + delta u)` and its gradient.

use crate::error::{invalid, Error, Result};
use crate::random::RandomSource;
use crate::vector::DecisionVector;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingParams {
    pub delta: f64,
    pub mc_samples: usize,
}

impl SmoothingParams {
    pub fn new(delta: f64, mc_samples: usize) -> Result<Self> {
        let p = Self { delta, mc_samples };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(invalid("delta", format!("must be > 0, got {}", self.delta)));
        }
        if self.mc_samples == 0 {
            return Err(invalid("mc_samples", "must be >= 1"));
        }
        Ok(())
    }
}

/// A Monte-Carlo mean with its empirical standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McValue {
    pub mean: f64,
    pub std_error: f64,
}

/// Coordinatewise Monte-Carlo mean of a vector quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct McGradient {
    pub mean: DecisionVector,
    pub std_error: Vec<f64>,
}

/// Uniform direction on the unit sphere `S^{d-1}`: a normalized Gaussian
/// vector. All-zero Gaussian draws are redrawn.
pub fn sample_sphere(d: usize, rng: &mut RandomSource) -> DecisionVector {
    assert!(d >= 1, "sphere dimension must be >= 1");
    loop {
        let mut v: Vec<f64> = (0..d).map(|_| rng.standard_normal()).collect();
        let n = crate::vector::norm(&v);
        if n > 0.0 {
            v.iter_mut().for_each(|c| *c /= n);
            return DecisionVector::from_raw(v);
        }
    }
}

/// Uniform point in the closed unit ball: a sphere direction scaled by
/// radius `U^{1/d}`.
pub fn sample_ball(d: usize, rng: &mut RandomSource) -> DecisionVector {
    let mut u = sample_sphere(d, rng);
    let r = rng.uniform().powf(1.0 / d as f64);
    u.scale_mut(r);
    u
}

fn finite(v: f64, context: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite {
            context: context.to_string(),
        })
    }
}

/// Streaming mean/variance accumulator (Welford).
#[derive(Debug, Default, Clone, Copy)]
struct Moments {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.n += 1;
        let d = v - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (v - self.mean);
    }

    fn sample_variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    fn std_error(&self) -> f64 {
        (self.sample_variance() / self.n as f64).sqrt()
    }

    fn summary(&self) -> McValue {
        McValue {
            mean: self.mean,
            std_error: self.std_error(),
        }
    }
}

/// Monte-Carlo estimate of `f_delta(x)` from `mc_samples` ball draws.
pub fn mc_smoothed_value<F>(
    f: F,
    x: &[f64],
    p: &SmoothingParams,
    rng: &mut RandomSource,
) -> Result<McValue>
where
    F: Fn(&[f64]) -> f64,
{
    p.validate()?;
    let base = DecisionVector::try_from(x)?;
    let mut acc = Moments::default();
    for _ in 0..p.mc_samples {
        let u = sample_ball(base.dim(), rng);
        acc.push(finite(f(&base.add_scaled(p.delta, &u)), "smoothed value")?);
    }
    Ok(acc.summary())
}

/// Smoothed values at two points under common random numbers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedValues {
    pub at_x: McValue,
    pub at_y: McValue,
    /// Estimate of `f_delta(x) - f_delta(y)` with its paired standard error.
    pub difference: McValue,
}

/// Evaluates `f_delta` at `x` and `y` with the same ball draws, so the
/// estimated difference carries only the paired sampling error.
pub fn mc_smoothed_value_pair<F>(
    f: F,
    x: &[f64],
    y: &[f64],
    p: &SmoothingParams,
    rng: &mut RandomSource,
) -> Result<PairedValues>
where
    F: Fn(&[f64]) -> f64,
{
    p.validate()?;
    let bx = DecisionVector::try_from(x)?;
    let by = DecisionVector::try_from(y)?;
    if bx.dim() != by.dim() {
        return Err(Error::DimensionMismatch {
            expected: bx.dim(),
            got: by.dim(),
        });
    }
    let (mut ax, mut ay, mut diff) = (Moments::default(), Moments::default(), Moments::default());
    for _ in 0..p.mc_samples {
        let u = sample_ball(bx.dim(), rng);
        let fx = finite(f(&bx.add_scaled(p.delta, &u)), "smoothed value")?;
        let fy = finite(f(&by.add_scaled(p.delta, &u)), "smoothed value")?;
        ax.push(fx);
        ay.push(fy);
        diff.push(fx - fy);
    }
    Ok(PairedValues {
        at_x: ax.summary(),
        at_y: ay.summary(),
        difference: diff.summary(),
    })
}

/// Monte-Carlo estimate of `grad f_delta(x) = (d/delta) E_{u ~ Unif(S^{d-1})}[f(x + delta u) u]`.
///
/// Each of the `mc_samples` draws uses the antithetic pair `(u, -u)`:
/// the sample is `(d / 2 delta) (f(x + delta u) - f(x - delta u)) u`, the
/// average of the formula at `u` and `-u`. Same expectation, far smaller
/// variance when `|f|` is large relative to its variation over the ball.
pub fn mc_smoothed_gradient<F>(
    f: F,
    x: &[f64],
    p: &SmoothingParams,
    rng: &mut RandomSource,
) -> Result<McGradient>
where
    F: Fn(&[f64]) -> f64,
{
    p.validate()?;
    let base = DecisionVector::try_from(x)?;
    let d = base.dim();
    let scale = d as f64 / (2.0 * p.delta);
    let mut acc = vec![Moments::default(); d];
    for _ in 0..p.mc_samples {
        let u = sample_sphere(d, rng);
        let plus = finite(f(&base.add_scaled(p.delta, &u)), "smoothed gradient")?;
        let minus = finite(f(&base.add_scaled(-p.delta, &u)), "smoothed gradient")?;
        let w = scale * (plus - minus);
        for (m, ui) in acc.iter_mut().zip(u.iter()) {
            m.push(w * ui);
        }
    }
    Ok(McGradient {
        mean: DecisionVector::from_raw(acc.iter().map(|m| m.mean).collect()),
        std_error: acc.iter().map(Moments::std_error).collect(),
    })
}

/// Unbiased sample variance of `h(u)` over `n_samples` uniform sphere draws.
pub fn variance_on_sphere<H>(h: H, d: usize, n_samples: usize, rng: &mut RandomSource) -> Result<f64>
where
    H: Fn(&[f64]) -> f64,
{
    if n_samples < 2 {
        return Err(invalid("n_samples", "must be >= 2"));
    }
    let mut acc = Moments::default();
    for _ in 0..n_samples {
        let u = sample_sphere(d, rng);
        acc.push(h(&u));
    }
    Ok(acc.sample_variance())
}

/// Right-hand side of the sphere concentration bound
/// `Var h(u) <= 16 sqrt(2 pi) rho^2 / d` for `rho`-Lipschitz `h`.
pub fn sphere_variance_bound(rho: f64, d: usize) -> f64 {
    16.0 * (2.0 * std::f64::consts::PI).sqrt() * rho * rho / d as f64
}
