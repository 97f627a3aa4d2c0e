//! Zeroth-order gradient estimators of `grad f_delta`.
//!
//! Every query goes through a fresh call to the oracle, so under a
//! decision-dependent law the `+` and `-` evaluations of the two-point
//! estimator see independent draws from `Xi(y + delta u)` and `Xi(y - delta u)`.

use crate::error::{invalid, Error, Result};
use crate::oracle::StochasticOracle;
use crate::random::RandomSource;
use crate::smoothing::sample_sphere;
use crate::vector::DecisionVector;

#[derive(Debug, Clone, PartialEq)]
pub struct GradientEstimate {
    pub g: DecisionVector,
    pub queries_used: u64,
    /// The fresh feedback value `F(y + delta u; xi)`; set only by the
    /// one-point residual estimator.
    pub carried_feedback: Option<f64>,
    /// Direction used. For batched and coordinate estimators this is the
    /// last direction drawn.
    pub direction: DecisionVector,
}

/// Previous feedback value `h_{t-1}` for the one-point residual estimator.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResidualState {
    prev_value: Option<f64>,
}

impl ResidualState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Initializes the state with one oracle query at `y + delta u`,
    /// `u ~ Unif(S^{d-1})`.
    pub fn initialize(
        y: &[f64],
        delta: f64,
        oracle: &mut StochasticOracle,
        rng: &mut RandomSource,
    ) -> Result<(Self, DecisionVector)> {
        check_delta(delta)?;
        let u = sample_sphere(y.len(), rng);
        let point = DecisionVector::try_from(y)?.add_scaled(delta, &u);
        let h = oracle.sample(&point, rng)?;
        Ok((Self { prev_value: Some(h) }, u))
    }

    /// State seeded with a known previous feedback value.
    pub fn with_value(prev_value: f64) -> Self {
        Self {
            prev_value: Some(prev_value),
        }
    }

    pub fn prev_value(&self) -> Option<f64> {
        self.prev_value
    }

    pub fn is_initialized(&self) -> bool {
        self.prev_value.is_some()
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta.is_finite() {
        Ok(())
    } else {
        Err(invalid("delta", format!("must be > 0, got {delta}")))
    }
}

fn checked(g: DecisionVector) -> Result<DecisionVector> {
    if g.is_finite() {
        Ok(g)
    } else {
        Err(Error::NonFinite {
            context: "gradient estimate".into(),
        })
    }
}

/// Two-point sphere estimator `(d / 2 delta) (F(y + delta u) - F(y - delta u)) u`.
pub fn two_point(
    y: &[f64],
    delta: f64,
    oracle: &mut StochasticOracle,
    rng: &mut RandomSource,
) -> Result<GradientEstimate> {
    check_delta(delta)?;
    let base = DecisionVector::try_from(y)?;
    let u = sample_sphere(base.dim(), rng);
    let plus = oracle.sample(&base.add_scaled(delta, &u), rng)?;
    let minus = oracle.sample(&base.add_scaled(-delta, &u), rng)?;
    let g = u.scaled(base.dim() as f64 / (2.0 * delta) * (plus - minus));
    Ok(GradientEstimate {
        g: checked(g)?,
        queries_used: 2,
        carried_feedback: None,
        direction: u,
    })
}

/// One-point residual estimator `(d / delta) (F(y + delta u) - h_prev) u`.
///
/// Makes one fresh query and replaces `state`'s previous value with it.
pub fn one_point_residual(
    y: &[f64],
    delta: f64,
    oracle: &mut StochasticOracle,
    state: &mut ResidualState,
    rng: &mut RandomSource,
) -> Result<GradientEstimate> {
    check_delta(delta)?;
    let prev = state.prev_value.ok_or(Error::Uninitialized)?;
    let base = DecisionVector::try_from(y)?;
    let u = sample_sphere(base.dim(), rng);
    let h = oracle.sample(&base.add_scaled(delta, &u), rng)?;
    state.prev_value = Some(h);
    let g = u.scaled(base.dim() as f64 / delta * (h - prev));
    Ok(GradientEstimate {
        g: checked(g)?,
        queries_used: 1,
        carried_feedback: Some(h),
        direction: u,
    })
}

/// Average of `batch` independent two-point estimates at `x`.
pub fn minibatch_two_point(
    x: &[f64],
    delta: f64,
    batch: usize,
    oracle: &mut StochasticOracle,
    rng: &mut RandomSource,
) -> Result<GradientEstimate> {
    if batch == 0 {
        return Err(invalid("batch", "must be >= 1"));
    }
    let mut first = two_point(x, delta, oracle, rng)?;
    for _ in 1..batch {
        let next = two_point(x, delta, oracle, rng)?;
        first.g.axpy(1.0, &next.g);
        first.direction = next.direction;
    }
    first.g.scale_mut(1.0 / batch as f64);
    first.queries_used = 2 * batch as u64;
    Ok(first)
}

/// Textbook comparison estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaselineKind {
    /// Central differences along every coordinate; `2d` queries.
    Coordinate,
    /// `(F(x + mu z) - F(x - mu z)) / (2 mu) z`, `z` standard normal; 2 queries.
    Gaussian,
    /// The two-point sphere estimator with radius `mu`; 2 queries.
    Sphere,
    /// `(d / mu) F(x + mu u) u`; 1 query.
    PlainOnePoint,
}

impl BaselineKind {
    pub fn queries_per_estimate(&self, dim: usize) -> u64 {
        match self {
            BaselineKind::Coordinate => 2 * dim as u64,
            BaselineKind::Gaussian | BaselineKind::Sphere => 2,
            BaselineKind::PlainOnePoint => 1,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BaselineKind::Coordinate => "coordinate",
            BaselineKind::Gaussian => "gaussian",
            BaselineKind::Sphere => "sphere",
            BaselineKind::PlainOnePoint => "one_point",
        }
    }
}

impl std::str::FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coordinate" | "coordinate_2pt" => Ok(BaselineKind::Coordinate),
            "gaussian" | "gaussian_2pt" => Ok(BaselineKind::Gaussian),
            "sphere" | "sphere_2pt" => Ok(BaselineKind::Sphere),
            "one_point" | "plain_1pt" => Ok(BaselineKind::PlainOnePoint),
            other => Err(invalid("kind", format!("unknown baseline estimator `{other}`"))),
        }
    }
}

pub fn baseline_estimate(
    kind: BaselineKind,
    x: &[f64],
    mu: f64,
    oracle: &mut StochasticOracle,
    rng: &mut RandomSource,
) -> Result<GradientEstimate> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(invalid("mu", format!("must be > 0, got {mu}")));
    }
    let base = DecisionVector::try_from(x)?;
    let d = base.dim();
    match kind {
        BaselineKind::Sphere => two_point(x, mu, oracle, rng),
        BaselineKind::Coordinate => {
            let mut g = DecisionVector::zeros(d);
            let mut coords = vec![0.0; d];
            for i in 0..d {
                let e = DecisionVector::basis(d, i);
                let plus = oracle.sample(&base.add_scaled(mu, &e), rng)?;
                let minus = oracle.sample(&base.add_scaled(-mu, &e), rng)?;
                coords[i] = (plus - minus) / (2.0 * mu);
            }
            g.axpy(1.0, &coords);
            Ok(GradientEstimate {
                g: checked(g)?,
                queries_used: 2 * d as u64,
                carried_feedback: None,
                direction: DecisionVector::basis(d, d - 1),
            })
        }
        BaselineKind::Gaussian => {
            let z = DecisionVector::from_raw((0..d).map(|_| rng.standard_normal()).collect());
            let plus = oracle.sample(&base.add_scaled(mu, &z), rng)?;
            let minus = oracle.sample(&base.add_scaled(-mu, &z), rng)?;
            Ok(GradientEstimate {
                g: checked(z.scaled((plus - minus) / (2.0 * mu)))?,
                queries_used: 2,
                carried_feedback: None,
                direction: z,
            })
        }
        BaselineKind::PlainOnePoint => {
            let u = sample_sphere(d, rng);
            let value = oracle.sample(&base.add_scaled(mu, &u), rng)?;
            Ok(GradientEstimate {
                g: checked(u.scaled(d as f64 / mu * value))?,
                queries_used: 1,
                carried_feedback: None,
                direction: u,
            })
        }
    }
}

/// Two-point second-moment bound `d^2 sigma^2 / (2 delta^2) + c_L d L^2`,
/// with `c_L = 16 sqrt(2 pi)` by default.
pub fn two_point_moment_bound(d: usize, sigma: f64, delta: f64, lipschitz: f64) -> f64 {
    let d = d as f64;
    d * d * sigma * sigma / (2.0 * delta * delta) + SPHERE_CONST * d * lipschitz * lipschitz
}

/// One-point residual second-moment bound with an explicit drift term
/// `E||y_t - y_{t-1}||^2`.
pub fn one_point_moment_bound(d: usize, sigma: f64, delta: f64, lipschitz: f64, drift_sq: f64) -> f64 {
    let d = d as f64;
    6.0 * d * d * sigma * sigma / (delta * delta)
        + 9.0 * SPHERE_CONST * d * lipschitz * lipschitz
        + 6.0 * d * d * lipschitz * lipschitz / (delta * delta) * drift_sq
}

/// `16 sqrt(2 pi)`.
pub(crate) const SPHERE_CONST: f64 = 16.0 * 2.506_628_274_631_000_7;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::noisy_value_oracle;
    use crate::random::make_rng;

    fn linear(a: Vec<f64>) -> impl Fn(&[f64]) -> f64 + Send + Sync {
        move |x: &[f64]| a.iter().zip(x).map(|(ai, xi)| ai * xi).sum()
    }

    #[test]
    fn sphere_const_matches_pi() {
        assert!((SPHERE_CONST - 16.0 * (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-13);
        assert!((SPHERE_CONST * 2.0 - 80.212).abs() < 1e-3);
    }

    #[test]
    fn constant_function_gives_zero() {
        let mut o = noisy_value_oracle(3, |_| 7.0, 0.0).unwrap();
        let mut rng = make_rng(0);
        let y = [0.1, 0.2, 0.3];
        assert!(two_point(&y, 0.5, &mut o, &mut rng).unwrap().g.iter().all(|v| *v == 0.0));
        assert!(minibatch_two_point(&y, 0.5, 4, &mut o, &mut rng).unwrap().g.iter().all(|v| *v == 0.0));
        let (mut state, _) = ResidualState::initialize(&y, 0.5, &mut o, &mut rng).unwrap();
        for _ in 0..5 {
            let e = one_point_residual(&y, 0.5, &mut o, &mut state, &mut rng).unwrap();
            assert!(e.g.iter().all(|v| *v == 0.0));
        }
        let e = baseline_estimate(BaselineKind::Gaussian, &y, 0.3, &mut o, &mut rng).unwrap();
        assert!(e.g.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn two_point_linear_is_projection() {
        let a = vec![1.0, -2.0];
        let mut o = noisy_value_oracle(2, linear(a.clone()), 0.0).unwrap();
        let mut rng = make_rng(4);
        let e = two_point(&[0.5, 0.5], 0.2, &mut o, &mut rng).unwrap();
        let au = a[0] * e.direction[0] + a[1] * e.direction[1];
        for i in 0..2 {
            assert!((e.g[i] - 2.0 * au * e.direction[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn residual_direct_arithmetic() {
        let mut o = noisy_value_oracle(1, |x: &[f64]| x[0], 0.0).unwrap();
        let mut state = ResidualState::with_value(0.3);
        // In d = 1 the direction is +-1; scan seeds for a +1 draw.
        let mut found = false;
        for seed in 0..20 {
            let mut rng = make_rng(seed);
            let mut s = state.clone();
            let e = one_point_residual(&[0.0], 1.0, &mut o, &mut s, &mut rng).unwrap();
            if e.direction[0] > 0.0 {
                assert!((e.g[0] - 0.7).abs() < 1e-15);
                assert_eq!(e.carried_feedback, Some(1.0));
                assert_eq!(s.prev_value(), Some(1.0));
                state = s;
                found = true;
                break;
            }
        }
        assert!(found);
        assert_eq!(state.prev_value(), Some(1.0));
    }

    #[test]
    fn residual_requires_initialization() {
        let mut o = noisy_value_oracle(1, |_| 0.0, 0.0).unwrap();
        let mut rng = make_rng(0);
        let mut state = ResidualState::new();
        assert_eq!(
            one_point_residual(&[0.0], 1.0, &mut o, &mut state, &mut rng),
            Err(Error::Uninitialized)
        );
    }

    #[test]
    fn coordinate_exact_on_linear() {
        let a = vec![0.5, -1.5, 2.0];
        let mut o = noisy_value_oracle(3, linear(a.clone()), 0.0).unwrap();
        let mut rng = make_rng(0);
        for mu in [1e-3, 0.1, 3.0] {
            let e = baseline_estimate(BaselineKind::Coordinate, &[1.0, 2.0, 3.0], mu, &mut o, &mut rng).unwrap();
            for i in 0..3 {
                assert!((e.g[i] - a[i]).abs() < 1e-9);
            }
            assert_eq!(e.queries_used, 6);
        }
    }

    #[test]
    fn reported_queries_match_counter() {
        let mut o = noisy_value_oracle(4, |x: &[f64]| x[0].abs(), 0.1).unwrap();
        let mut rng = make_rng(8);
        let y = [0.1; 4];
        let check = |o: &mut StochasticOracle, f: &mut dyn FnMut(&mut StochasticOracle) -> GradientEstimate| {
            let before = o.queries();
            let e = f(o);
            assert_eq!(o.queries() - before, e.queries_used);
        };
        check(&mut o, &mut |o| two_point(&y, 0.1, o, &mut rng.clone()).unwrap());
        check(&mut o, &mut |o| minibatch_two_point(&y, 0.1, 5, o, &mut rng.clone()).unwrap());
        for kind in [BaselineKind::Coordinate, BaselineKind::Gaussian, BaselineKind::Sphere, BaselineKind::PlainOnePoint] {
            check(&mut o, &mut |o| baseline_estimate(kind, &y, 0.1, o, &mut rng.clone()).unwrap());
            assert_eq!(kind.queries_per_estimate(4), match kind {
                BaselineKind::Coordinate => 8,
                BaselineKind::PlainOnePoint => 1,
                _ => 2,
            });
        }
        let (mut state, _) = ResidualState::initialize(&y, 0.1, &mut o, &mut rng).unwrap();
        check(&mut o, &mut |o| one_point_residual(&y, 0.1, o, &mut state, &mut rng.clone()).unwrap());
    }

    #[test]
    fn invalid_parameters() {
        let mut o = noisy_value_oracle(1, |_| 0.0, 0.0).unwrap();
        let mut rng = make_rng(0);
        assert!(two_point(&[0.0], 0.0, &mut o, &mut rng).is_err());
        assert!(minibatch_two_point(&[0.0], 1.0, 0, &mut o, &mut rng).is_err());
        assert!(baseline_estimate(BaselineKind::Sphere, &[0.0], -1.0, &mut o, &mut rng).is_err());
        assert!("bogus".parse::<BaselineKind>().is_err());
        assert_eq!("plain_1pt".parse::<BaselineKind>().unwrap(), BaselineKind::PlainOnePoint);
    }
}
