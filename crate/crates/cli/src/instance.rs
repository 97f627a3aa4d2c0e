//! Builds problem instances from a [`ProblemConfig`]: the oracle factory,
//! the exact (or Monte-Carlo) objective used for reporting, the start point
//! and the constants handed to schedules.

use std::sync::Arc;

use ddzo::oracle::mc_objective;
use ddzo::problems::io::{read_pricing, read_strategic_records};
use ddzo::problems::pricing::{pricing_oracle, PricingInstance, DEFAULT_BUYERS, DEFAULT_PRODUCTS};
use ddzo::problems::strategic::{strategic_oracle, StrategicInstance, DEFAULT_TAU, STRATEGIC_DIM};
use ddzo::problems::test_functions::{identity, synthetic_instance, SyntheticKind, TestFunction, TestKind};
use ddzo::{make_rng, DecisionVector, ProblemSpec, RandomSource, StochasticOracle};

use crate::config::{ProblemConfig, ProblemKind};
use crate::error::{CliError, Result};

pub const DEFAULT_N_TRAIN: usize = 1000;
pub const DEFAULT_N_TEST: usize = 250;
/// Half-width of the box on which black-box Lipschitz constants are estimated.
pub const DEFAULT_LIPSCHITZ_RADIUS: f64 = 0.5;
const LIPSCHITZ_PAIRS: usize = 200;
const NOISE_SAMPLES: usize = 2000;

/// Where a problem constant came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Config,
    Exact,
    Estimated,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Config => "config",
            Source::Exact => "exact",
            Source::Estimated => "estimated",
        }
    }
}

/// Problem constants with provenance. `gap` is `None` when it cannot be
/// determined, in which case schedules are unavailable.
#[derive(Debug, Clone, PartialEq)]
pub struct Constants {
    pub lipschitz: (f64, Source),
    pub noise_bound: (f64, Source),
    pub gap: Option<(f64, Source)>,
    pub grad_lipschitz: Option<f64>,
    pub hess_lipschitz: Option<f64>,
}

impl Constants {
    pub fn spec(&self, dim: usize) -> Result<ProblemSpec> {
        let (gap, _) = self.gap.ok_or_else(|| CliError::Config {
            field: "problem.gap".into(),
            reason: "schedules need the initial gap; set `gap` for this problem".into(),
        })?;
        let mut spec = ProblemSpec::new(dim, self.lipschitz.0, self.noise_bound.0, gap)?;
        if let Some(lg) = self.grad_lipschitz {
            spec = spec.with_grad_lipschitz(lg)?;
        }
        if let Some(lh) = self.hess_lipschitz {
            spec = spec.with_hess_lipschitz(lh)?;
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone)]
pub enum Model {
    Test { f: TestFunction, sigma: f64 },
    Strategic(Arc<StrategicInstance>),
    Pricing(Arc<PricingInstance>),
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub name: String,
    pub model: Model,
    pub start: DecisionVector,
    pub constants: Constants,
}

impl Instance {
    pub fn dim(&self) -> usize {
        self.start.dim()
    }

    /// A fresh counted oracle for one run.
    pub fn oracle(&self) -> Result<StochasticOracle> {
        Ok(match &self.model {
            Model::Test { f, sigma } => synthetic_instance(&SyntheticKind::Fixed(f.kind.clone()), f.dim, *sigma, 0)?.1,
            Model::Strategic(inst) => strategic_oracle(inst.clone()),
            Model::Pricing(inst) => pricing_oracle(inst.clone()),
        })
    }

    /// Closed-form objective, when one exists.
    pub fn exact_objective(&self, x: &[f64]) -> Option<f64> {
        match &self.model {
            Model::Test { f, .. } => Some(f.value(x)),
            Model::Strategic(inst) => Some(inst.train_loss(x)),
            Model::Pricing(_) => None,
        }
    }

    /// Reported objective: exact where available, otherwise the mean of
    /// `samples` fresh draws that never touch a query counter.
    pub fn report_objective(&self, x: &[f64], samples: usize, rng: &mut RandomSource) -> Result<f64> {
        if let Some(v) = self.exact_objective(x) {
            return Ok(v);
        }
        let oracle = self.oracle()?;
        Ok(mc_objective(oracle.sampler(), x, samples, rng))
    }

    /// Deterministic objective for the problem itself, used for certificates.
    pub fn test_function(&self) -> Option<&TestFunction> {
        match &self.model {
            Model::Test { f, .. } => Some(f),
            _ => None,
        }
    }

    fn deterministic_value(&self, x: &[f64]) -> f64 {
        match &self.model {
            Model::Test { f, .. } => f.value(x),
            Model::Strategic(inst) => inst.train_loss(x),
            Model::Pricing(inst) => inst.expected_negative_profit(x),
        }
    }
}

fn start_point(cfg: &ProblemConfig, dim: usize, default: f64) -> Result<DecisionVector> {
    let coords = match (&cfg.start, cfg.start_value) {
        (Some(v), _) => {
            if v.len() != dim {
                return Err(CliError::Config {
                    field: "problem.start".into(),
                    reason: format!("expected {dim} coordinates, got {}", v.len()),
                });
            }
            v.clone()
        }
        (None, Some(c)) => vec![c; dim],
        (None, None) => vec![default; dim],
    };
    DecisionVector::new(coords).map_err(|e| CliError::Config {
        field: "problem.start".into(),
        reason: e.to_string(),
    })
}

/// Builds every instance the config describes, in config order.
pub fn build_instances(cfg: &ProblemConfig) -> Result<Vec<Instance>> {
    match cfg.kind {
        ProblemKind::Strategic => build_strategic(cfg),
        ProblemKind::Pricing => build_pricing(cfg),
        _ => Ok(vec![build_test(cfg)?]),
    }
}

fn test_kind(cfg: &ProblemConfig) -> Result<(TestKind, usize)> {
    let missing = |f: &str| CliError::Config {
        field: format!("problem.{f}"),
        reason: "required".into(),
    };
    Ok(match cfg.kind {
        ProblemKind::Linear => {
            let a = cfg.a.clone().ok_or_else(|| missing("a"))?;
            let d = a.len();
            (TestKind::Linear { a }, d)
        }
        ProblemKind::Norm => (TestKind::Norm, cfg.dim.ok_or_else(|| missing("dim"))?),
        ProblemKind::AbsSum => (TestKind::AbsSum, cfg.dim.ok_or_else(|| missing("dim"))?),
        ProblemKind::Quadratic => {
            let center = cfg.center.clone().ok_or_else(|| missing("center"))?;
            let d = center.len();
            (TestKind::Quadratic { center }, d)
        }
        ProblemKind::PerformativeQuadratic => {
            let theta = cfg.theta.clone().ok_or_else(|| missing("theta"))?;
            let d = theta.len();
            let a = match &cfg.matrix {
                Some(rows) => rows.concat(),
                None => identity(d),
            };
            let eps = cfg.eps_perf.ok_or_else(|| missing("eps_perf"))?;
            (TestKind::PerformativeQuadratic { theta, eps, a }, d)
        }
        ProblemKind::Strategic | ProblemKind::Pricing => unreachable!("not a test function"),
    })
}

fn build_test(cfg: &ProblemConfig) -> Result<Instance> {
    let (kind, dim) = test_kind(cfg)?;
    let f = TestFunction::new(kind, dim)?;
    let start = start_point(cfg, dim, 0.0)?;
    let lipschitz = match cfg.lipschitz {
        Some(l) => (l, Source::Config),
        None => (f.lipschitz, Source::Exact),
    };
    let mut instance = Instance {
        name: cfg.kind.name().to_string(),
        model: Model::Test { f: f.clone(), sigma: cfg.sigma },
        start,
        constants: Constants {
            lipschitz,
            noise_bound: (cfg.sigma, Source::Exact),
            gap: None,
            grad_lipschitz: cfg.grad_lipschitz.or(f.grad_lipschitz),
            hess_lipschitz: cfg.hess_lipschitz.or(f.hess_lipschitz),
        },
    };
    let is_performative = matches!(f.kind, TestKind::PerformativeQuadratic { .. });
    instance.constants.noise_bound = match cfg.noise_bound {
        Some(s) => (s, Source::Config),
        // The performative noise scales with the decision, so measure it.
        None if is_performative => (estimate_noise(&instance, 0)?, Source::Estimated),
        None => (cfg.sigma, Source::Exact),
    };
    let f_start = f.value(&instance.start);
    instance.constants.gap = match cfg.gap {
        Some(g) => Some((g, Source::Config)),
        None => match &f.kind {
            TestKind::Linear { .. } => None,
            TestKind::Norm | TestKind::AbsSum | TestKind::Quadratic { .. } => Some((f_start, Source::Exact)),
            // Exact only when the stationary point is the minimizer; with a
            // positive definite shift it is.
            TestKind::PerformativeQuadratic { .. } => f
                .stationary_point()
                .map(|x| (f_start - f.value(&x)).max(0.0))
                .map(|g| (g, Source::Exact)),
        },
    };
    Ok(instance)
}

fn instance_seeds(cfg: &ProblemConfig) -> Vec<u64> {
    cfg.instances.clone().unwrap_or_else(|| vec![0])
}

fn file_stem(path: &std::path::Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "file".into())
}

fn build_strategic(cfg: &ProblemConfig) -> Result<Vec<Instance>> {
    let tau = cfg.tau.unwrap_or(DEFAULT_TAU);
    let models: Vec<(String, StrategicInstance)> = match &cfg.records {
        Some(path) => {
            let train = read_strategic_records(path)?;
            let test = match &cfg.test_records {
                Some(p) => read_strategic_records(p)?,
                None => Vec::new(),
            };
            vec![(file_stem(path), StrategicInstance::from_raw(train, test, tau)?)]
        }
        None => instance_seeds(cfg)
            .into_iter()
            .map(|s| {
                let n_train = cfg.n_train.unwrap_or(DEFAULT_N_TRAIN);
                let n_test = cfg.n_test.unwrap_or(DEFAULT_N_TEST);
                Ok((format!("instance_{s}"), StrategicInstance::synthetic(n_train, n_test, tau, s)?))
            })
            .collect::<Result<_>>()?,
    };
    models
        .into_iter()
        .enumerate()
        .map(|(k, (name, inst))| {
            let start = start_point(cfg, STRATEGIC_DIM, 1.0)?;
            let loss0 = inst.train_loss(&start);
            let mut instance = Instance {
                name,
                model: Model::Strategic(Arc::new(inst)),
                start,
                constants: placeholder_constants(cfg),
            };
            // The hinge loss is non-negative, so its value at the start bounds the gap.
            instance.constants.gap = Some(cfg.gap.map_or((loss0, Source::Exact), |g| (g, Source::Config)));
            fill_black_box(&mut instance, cfg, k as u64)?;
            Ok(instance)
        })
        .collect()
}

fn build_pricing(cfg: &ProblemConfig) -> Result<Vec<Instance>> {
    let m = cfg.buyers.unwrap_or(DEFAULT_BUYERS);
    let models: Vec<(String, PricingInstance)> = match &cfg.prices {
        Some(path) => {
            let file = read_pricing(path)?;
            let inst = match file.rho {
                Some(rho) => PricingInstance::new(file.theta, rho, m)?,
                None => PricingInstance::with_seeded_rho(file.theta, m, 0)?,
            };
            vec![(file_stem(path), inst)]
        }
        None => {
            let n = cfg.products.unwrap_or(DEFAULT_PRODUCTS);
            instance_seeds(cfg)
                .into_iter()
                .map(|s| Ok((format!("instance_{s}"), PricingInstance::synthetic(n, m, s)?)))
                .collect::<Result<_>>()?
        }
    };
    models
        .into_iter()
        .enumerate()
        .map(|(k, (name, inst))| {
            let start = start_point(cfg, inst.n_products(), 0.5)?;
            let mut instance = Instance {
                name,
                model: Model::Pricing(Arc::new(inst)),
                start,
                constants: placeholder_constants(cfg),
            };
            instance.constants.gap = cfg.gap.map(|g| (g, Source::Config));
            fill_black_box(&mut instance, cfg, k as u64)?;
            Ok(instance)
        })
        .collect()
}

fn placeholder_constants(cfg: &ProblemConfig) -> Constants {
    Constants {
        lipschitz: (f64::NAN, Source::Estimated),
        noise_bound: (f64::NAN, Source::Estimated),
        gap: None,
        grad_lipschitz: cfg.grad_lipschitz,
        hess_lipschitz: cfg.hess_lipschitz,
    }
}

/// Fills `L`, `sigma` and (when still unknown) the gap of a black-box
/// instance. Estimates use the deterministic objective on random pairs in a
/// box around the start, and uncounted oracle draws at the start.
fn fill_black_box(instance: &mut Instance, cfg: &ProblemConfig, salt: u64) -> Result<()> {
    let radius = cfg.lipschitz_radius.unwrap_or(DEFAULT_LIPSCHITZ_RADIUS);
    let mut rng = make_rng(0x5eed_0000 ^ salt);
    let d = instance.dim();
    let x0 = instance.start.clone();
    let f0 = instance.deterministic_value(&x0);
    let mut slope: f64 = 0.0;
    let mut lowest = f0;
    for _ in 0..LIPSCHITZ_PAIRS {
        let a: Vec<f64> = (0..d).map(|i| x0[i] + rng.uniform_range(-radius, radius)).collect();
        let b: Vec<f64> = (0..d).map(|i| a[i] + rng.uniform_range(-0.05, 0.05) * radius).collect();
        let (fa, fb) = (instance.deterministic_value(&a), instance.deterministic_value(&b));
        let dist = DecisionVector::new(a.clone())?.distance(&b);
        if dist > 0.0 {
            slope = slope.max((fa - fb).abs() / dist);
        }
        lowest = lowest.min(fa).min(fb);
    }
    instance.constants.lipschitz = match cfg.lipschitz {
        Some(l) => (l, Source::Config),
        // A zero slope would make every schedule degenerate.
        None => (slope.max(1e-12), Source::Estimated),
    };
    instance.constants.noise_bound = match cfg.noise_bound {
        Some(s) => (s, Source::Config),
        None => (estimate_noise(instance, salt)?, Source::Estimated),
    };
    if instance.constants.gap.is_none() {
        instance.constants.gap = Some((f0 - lowest, Source::Estimated));
    }
    Ok(())
}

fn estimate_noise(instance: &Instance, salt: u64) -> Result<f64> {
    let oracle = instance.oracle()?;
    let mut rng = make_rng(0x0015_e000 ^ salt);
    let draws: Vec<f64> = (0..NOISE_SAMPLES).map(|_| oracle.sampler().draw(&instance.start, &mut rng)).collect();
    let mean = draws.iter().sum::<f64>() / draws.len() as f64;
    let var = draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64;
    Ok(var.sqrt())
}
