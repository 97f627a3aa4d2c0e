//! Synthetic objectives with known constants, used as ground truth.

use std::sync::Arc;

use crate::error::{invalid, Result};
use crate::oracle::{noisy_value_oracle, Sampler, StochasticOracle};
use crate::problem_spec::ProblemSpec;
use crate::random::{make_rng, RandomSource};
use crate::vector::{dot, norm, DecisionVector};

/// Radius of the ball on which quadratic test functions advertise `L`.
pub const DEFAULT_DOMAIN_RADIUS: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub enum TestKind {
    /// `a . x`
    Linear { a: Vec<f64> },
    /// `||x||`
    Norm,
    /// `||x - center||^2`
    Quadratic { center: Vec<f64> },
    /// `sum_i |x_i|`
    AbsSum,
    /// `E_{xi ~ N(theta + eps A x, sigma^2 I)} [xi . x] = theta . x + eps x^T A x`.
    /// `a` is row-major `d x d`.
    PerformativeQuadratic { theta: Vec<f64>, eps: f64, a: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    pub kind: TestKind,
    pub dim: usize,
    /// Lipschitz constant, valid globally or on `domain_radius` when set.
    pub lipschitz: f64,
    pub grad_lipschitz: Option<f64>,
    pub hess_lipschitz: Option<f64>,
    pub domain_radius: Option<f64>,
}

impl TestFunction {
    pub fn new(kind: TestKind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dim", "must be >= 1"));
        }
        let r = DEFAULT_DOMAIN_RADIUS;
        let f = match &kind {
            TestKind::Linear { a } => {
                check_len("a", a, dim)?;
                Self::with_constants(kind.clone(), dim, norm(a), None, None)
            }
            TestKind::Norm => Self::with_constants(kind.clone(), dim, 1.0, None, None),
            TestKind::Quadratic { center } => {
                check_len("center", center, dim)?;
                let mut f = Self::with_constants(kind.clone(), dim, 2.0 * (r + norm(center)), Some(2.0), None);
                f.domain_radius = Some(r);
                f
            }
            TestKind::AbsSum => Self::with_constants(kind.clone(), dim, (dim as f64).sqrt(), None, None),
            TestKind::PerformativeQuadratic { theta, eps, a } => {
                check_len("theta", theta, dim)?;
                if a.len() != dim * dim {
                    return Err(invalid("a", format!("expected {} entries, got {}", dim * dim, a.len())));
                }
                if !eps.is_finite() {
                    return Err(invalid("eps", "must be finite"));
                }
                let sym_frob = (0..dim)
                    .flat_map(|i| (0..dim).map(move |j| (i, j)))
                    .map(|(i, j)| {
                        let s = a[i * dim + j] + a[j * dim + i];
                        s * s
                    })
                    .sum::<f64>()
                    .sqrt();
                let lg = eps.abs() * sym_frob;
                let mut f = Self::with_constants(
                    kind.clone(),
                    dim,
                    norm(theta) + lg * r,
                    (lg > 0.0).then_some(lg),
                    None,
                );
                f.domain_radius = Some(r);
                f
            }
        };
        Ok(f)
    }

    fn with_constants(kind: TestKind, dim: usize, l: f64, lg: Option<f64>, lh: Option<f64>) -> Self {
        Self {
            kind,
            dim,
            lipschitz: l,
            grad_lipschitz: lg,
            hess_lipschitz: lh,
            domain_radius: None,
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match &self.kind {
            TestKind::Linear { a } => dot(a, x),
            TestKind::Norm => norm(x),
            TestKind::Quadratic { center } => x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum(),
            TestKind::AbsSum => x.iter().map(|v| v.abs()).sum(),
            TestKind::PerformativeQuadratic { theta, eps, a } => dot(theta, x) + eps * quad_form(a, x),
        }
    }

    /// Exact gradient where the function is differentiable everywhere.
    pub fn gradient(&self, x: &[f64]) -> Option<DecisionVector> {
        let g = match &self.kind {
            TestKind::Linear { a } => a.clone(),
            TestKind::Quadratic { center } => x.iter().zip(center).map(|(a, b)| 2.0 * (a - b)).collect(),
            TestKind::PerformativeQuadratic { theta, eps, a } => {
                let d = self.dim;
                (0..d)
                    .map(|i| {
                        let sym: f64 = (0..d).map(|j| (a[i * d + j] + a[j * d + i]) * x[j]).sum();
                        theta[i] + eps * sym
                    })
                    .collect()
            }
            TestKind::Norm | TestKind::AbsSum => return None,
        };
        Some(DecisionVector::from_raw(g))
    }

    /// Exact `grad f_delta`. Smoothing leaves gradients of linear and
    /// quadratic functions unchanged.
    pub fn smoothed_gradient(&self, x: &[f64], _delta: f64) -> Option<DecisionVector> {
        self.gradient(x)
    }

    /// Known minimizer / stationary point, when one exists in closed form.
    pub fn stationary_point(&self) -> Option<DecisionVector> {
        match &self.kind {
            TestKind::Norm | TestKind::AbsSum => Some(DecisionVector::zeros(self.dim)),
            TestKind::Quadratic { center } => Some(DecisionVector::from_raw(center.clone())),
            TestKind::Linear { .. } => None,
            TestKind::PerformativeQuadratic { theta, eps, a } => {
                // Solve eps (A + A^T) x = -theta by Gaussian elimination.
                let d = self.dim;
                let mut m: Vec<f64> = (0..d * d).map(|k| eps * (a[k] + a[(k % d) * d + k / d])).collect();
                let mut rhs: Vec<f64> = theta.iter().map(|t| -t).collect();
                solve_in_place(&mut m, &mut rhs, d).map(DecisionVector::from_raw)
            }
        }
    }

    /// Problem constants for schedule construction.
    pub fn problem_spec(&self, noise_bound: f64, gap: f64) -> Result<ProblemSpec> {
        let mut spec = ProblemSpec::new(self.dim, self.lipschitz, noise_bound, gap)?;
        spec.grad_lipschitz = self.grad_lipschitz;
        spec.hess_lipschitz = self.hess_lipschitz;
        spec.validate()?;
        Ok(spec)
    }
}

fn check_len(name: &'static str, v: &[f64], dim: usize) -> Result<()> {
    if v.len() != dim {
        return Err(invalid(name, format!("expected length {dim}, got {}", v.len())));
    }
    if v.iter().any(|c| !c.is_finite()) {
        return Err(invalid(name, "entries must be finite"));
    }
    Ok(())
}

fn quad_form(a: &[f64], x: &[f64]) -> f64 {
    let d = x.len();
    (0..d).map(|i| x[i] * (0..d).map(|j| a[i * d + j] * x[j]).sum::<f64>()).sum()
}

fn solve_in_place(m: &mut [f64], rhs: &mut [f64], d: usize) -> Option<Vec<f64>> {
    for col in 0..d {
        let pivot = (col..d).max_by(|&i, &j| m[i * d + col].abs().total_cmp(&m[j * d + col].abs()))?;
        if m[pivot * d + col].abs() < 1e-14 {
            return None;
        }
        for k in 0..d {
            m.swap(col * d + k, pivot * d + k);
        }
        rhs.swap(col, pivot);
        for row in 0..d {
            if row != col {
                let factor = m[row * d + col] / m[col * d + col];
                for k in 0..d {
                    m[row * d + k] -= factor * m[col * d + k];
                }
                rhs[row] -= factor * rhs[col];
            }
        }
    }
    Some((0..d).map(|i| rhs[i] / m[i * d + i]).collect())
}

/// `F(x; xi) = xi . x` with `xi ~ N(theta + eps A x, sigma^2 I)`.
#[derive(Debug, Clone)]
pub struct PerformativeSampler {
    theta: Vec<f64>,
    eps: f64,
    a: Vec<f64>,
    sigma: f64,
}

impl Sampler for PerformativeSampler {
    fn dim(&self) -> usize {
        self.theta.len()
    }

    fn draw(&self, x: &[f64], rng: &mut RandomSource) -> f64 {
        let d = self.theta.len();
        (0..d)
            .map(|i| {
                let mean = self.theta[i] + self.eps * (0..d).map(|j| self.a[i * d + j] * x[j]).sum::<f64>();
                (mean + self.sigma * rng.standard_normal()) * x[i]
            })
            .sum()
    }
}

/// Which synthetic instance to build.
#[derive(Debug, Clone, PartialEq)]
pub enum SyntheticKind {
    Fixed(TestKind),
    /// Linear with `a ~ N(0, I)` drawn from the seed.
    RandomLinear,
    /// Quadratic with center `~ N(0, I)` drawn from the seed.
    RandomQuadratic,
}

/// Builds a test function and its oracle. Non-performative kinds use
/// `f(x) + sigma z`; the performative quadratic uses its own
/// decision-dependent law with per-coordinate noise `sigma`.
pub fn synthetic_instance(kind: &SyntheticKind, dim: usize, sigma: f64, seed: u64) -> Result<(TestFunction, StochasticOracle)> {
    let mut rng = make_rng(seed);
    let kind = match kind {
        SyntheticKind::Fixed(k) => k.clone(),
        SyntheticKind::RandomLinear => TestKind::Linear {
            a: (0..dim).map(|_| rng.standard_normal()).collect(),
        },
        SyntheticKind::RandomQuadratic => TestKind::Quadratic {
            center: (0..dim).map(|_| rng.standard_normal()).collect(),
        },
    };
    let f = TestFunction::new(kind, dim)?;
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(invalid("sigma", format!("must be >= 0, got {sigma}")));
    }
    let oracle = match &f.kind {
        TestKind::PerformativeQuadratic { theta, eps, a } => StochasticOracle::new(PerformativeSampler {
            theta: theta.clone(),
            eps: *eps,
            a: a.clone(),
            sigma,
        }),
        _ => {
            let shared = Arc::new(f.clone());
            noisy_value_oracle(dim, move |x: &[f64]| shared.value(x), sigma)?
        }
    };
    Ok((f, oracle))
}

/// Identity matrix, row-major.
pub fn identity(dim: usize) -> Vec<f64> {
    (0..dim * dim).map(|k| if k % (dim + 1) == 0 { 1.0 } else { 0.0 }).collect()
}
