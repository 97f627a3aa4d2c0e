//! The stochastic zeroth-order oracle.
//!
//! A [`Sampler`] describes the decision-dependent law: given `x` it draws
//! `xi ~ Xi(x)` and returns `F(x; xi)`. [`StochasticOracle`] wraps a sampler
//! and counts every query; algorithms only ever see the counted wrapper.

use crate::error::{invalid, Error, Result};
use crate::random::RandomSource;

/// One draw of `F(x; xi)` with `xi ~ Xi(x)`.
pub trait Sampler: Send + Sync {
    fn dim(&self) -> usize;

    fn draw(&self, x: &[f64], rng: &mut RandomSource) -> f64;
}

/// Monotone count of oracle calls.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct QueryCounter {
    total: u64,
}

impl QueryCounter {
    pub fn total(&self) -> u64 {
        self.total
    }

    fn bump(&mut self) {
        self.total += 1;
    }
}

pub struct StochasticOracle {
    sampler: Box<dyn Sampler>,
    counter: QueryCounter,
}

impl StochasticOracle {
    pub fn new(sampler: impl Sampler + 'static) -> Self {
        Self::from_boxed(Box::new(sampler))
    }

    pub fn from_boxed(sampler: Box<dyn Sampler>) -> Self {
        Self {
            sampler,
            counter: QueryCounter::default(),
        }
    }

    pub fn dim(&self) -> usize {
        self.sampler.dim()
    }

    /// Queries the oracle once. Every call counts, including failed ones.
    pub fn sample(&mut self, x: &[f64], rng: &mut RandomSource) -> Result<f64> {
        self.counter.bump();
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let value = self.sampler.draw(x, rng);
        if !value.is_finite() {
            return Err(Error::NonFinite {
                context: "oracle feedback".into(),
            });
        }
        Ok(value)
    }

    pub fn counter(&self) -> QueryCounter {
        self.counter
    }

    pub fn queries(&self) -> u64 {
        self.counter.total()
    }

    /// The underlying law, for evaluation draws that must not be counted.
    pub fn sampler(&self) -> &dyn Sampler {
        self.sampler.as_ref()
    }
}

impl std::fmt::Debug for StochasticOracle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StochasticOracle")
            .field("dim", &self.dim())
            .field("queries", &self.queries())
            .finish()
    }
}

/// `F(x; z) = f(x) + sigma * z` with `z` standard normal.
pub struct NoisyValue<F> {
    dim: usize,
    f: F,
    sigma: f64,
}

impl<F> Sampler for NoisyValue<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn draw(&self, x: &[f64], rng: &mut RandomSource) -> f64 {
        let value = (self.f)(x);
        if self.sigma == 0.0 {
            value
        } else {
            value + self.sigma * rng.standard_normal()
        }
    }
}

/// Oracle whose feedback is `f(x)` plus Gaussian noise of standard deviation
/// `sigma`, so the noise variance is exactly `sigma^2`.
pub fn noisy_value_oracle<F>(dim: usize, f: F, sigma: f64) -> Result<StochasticOracle>
where
    F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
{
    if dim == 0 {
        return Err(invalid("dim", "must be >= 1"));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(invalid("sigma", format!("must be finite and >= 0, got {sigma}")));
    }
    Ok(StochasticOracle::new(NoisyValue { dim, f, sigma }))
}

/// Averages `n` uncounted draws of the sampler at `x`.
pub fn mc_objective(sampler: &dyn Sampler, x: &[f64], n: usize, rng: &mut RandomSource) -> f64 {
    assert!(n >= 1);
    (0..n).map(|_| sampler.draw(x, rng)).sum::<f64>() / n as f64
}
