//! Run configuration: one TOML file with a `[problem]` table, one or more
//! `[[method]]` tables and an optional `[run]` table.
//!
//! ```toml
//! [problem]
//! kind = "norm"
//! dim = 2
//! sigma = 0.1
//! start = [1.0, 1.0]
//!
//! [[method]]
//! name = "o2nc_opt1"
//! delta = 0.05
//! block_len = 20
//! step_size = 0.002
//! budget = 100000
//!
//! [[method]]
//! name = "o2nc_opt2"
//! [method.schedule]
//! epsilon = 0.5
//! delta = 0.1
//! budget = 100000
//!
//! [run]
//! seeds = [0, 1, 2]
//! output = "out"
//! ```

use std::path::{Path, PathBuf};

use ddzo::schedules::SmoothMode;
use ddzo::{BaselineKind, EstimatorOption};
use serde::Deserialize;

use crate::error::{CliError, Result};

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "DDZO_WORKERS";

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    #[serde(rename = "method")]
    pub methods: Vec<MethodConfig>,
    #[serde(default)]
    pub run: RunSettings,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Linear,
    Norm,
    Quadratic,
    AbsSum,
    PerformativeQuadratic,
    Strategic,
    Pricing,
}

impl ProblemKind {
    pub fn is_test_function(self) -> bool {
        !matches!(self, ProblemKind::Strategic | ProblemKind::Pricing)
    }

    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Linear => "linear",
            ProblemKind::Norm => "norm",
            ProblemKind::Quadratic => "quadratic",
            ProblemKind::AbsSum => "abs_sum",
            ProblemKind::PerformativeQuadratic => "performative_quadratic",
            ProblemKind::Strategic => "strategic",
            ProblemKind::Pricing => "pricing",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub kind: ProblemKind,
    /// Dimension of norm / abs_sum problems; inferred elsewhere.
    pub dim: Option<usize>,
    /// Standard deviation of the additive noise (test functions) or of the
    /// decision-dependent draw (performative quadratic).
    #[serde(default)]
    pub sigma: f64,
    /// Initial point. Mutually exclusive with `start_value`.
    pub start: Option<Vec<f64>>,
    /// Initial point with every coordinate equal to this value.
    pub start_value: Option<f64>,

    /// Linear coefficients.
    pub a: Option<Vec<f64>>,
    /// Quadratic center.
    pub center: Option<Vec<f64>>,
    /// Performative base mean.
    pub theta: Option<Vec<f64>>,
    /// Performative shift strength.
    pub eps_perf: Option<f64>,
    /// Performative shift matrix, rows; identity when absent.
    pub matrix: Option<Vec<Vec<f64>>>,

    /// Overrides for schedule construction.
    pub lipschitz: Option<f64>,
    pub noise_bound: Option<f64>,
    pub gap: Option<f64>,
    pub grad_lipschitz: Option<f64>,
    pub hess_lipschitz: Option<f64>,
    /// Half-width of the box around the start point on which black-box
    /// Lipschitz constants are estimated.
    pub lipschitz_radius: Option<f64>,

    /// Instance seeds for synthetic strategic / pricing instances.
    pub instances: Option<Vec<u64>>,
    /// Strategic training records file; replaces synthetic instances.
    pub records: Option<PathBuf>,
    pub test_records: Option<PathBuf>,
    pub n_train: Option<usize>,
    pub n_test: Option<usize>,
    pub tau: Option<f64>,
    /// Pricing reference-price file; replaces synthetic instances.
    pub prices: Option<PathBuf>,
    pub products: Option<usize>,
    pub buyers: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    O2ncOpt1,
    O2ncOpt2,
    SgdBaseline,
    SgdCoordinate,
    SgdGaussian,
    SgdSphere,
    SgdOnePoint,
}

impl MethodName {
    pub fn as_str(self) -> &'static str {
        match self {
            MethodName::O2ncOpt1 => "o2nc_opt1",
            MethodName::O2ncOpt2 => "o2nc_opt2",
            MethodName::SgdBaseline => "sgd_baseline",
            MethodName::SgdCoordinate => "sgd_coordinate",
            MethodName::SgdGaussian => "sgd_gaussian",
            MethodName::SgdSphere => "sgd_sphere",
            MethodName::SgdOnePoint => "sgd_one_point",
        }
    }

    pub fn o2nc_option(self) -> Option<EstimatorOption> {
        match self {
            MethodName::O2ncOpt1 => Some(EstimatorOption::TwoPoint),
            MethodName::O2ncOpt2 => Some(EstimatorOption::OnePointResidual),
            _ => None,
        }
    }

    /// Swapped-in estimator for the SGD variants; `None` for the mini-batch
    /// two-point baseline and for O2NC.
    pub fn baseline(self) -> Option<BaselineKind> {
        match self {
            MethodName::SgdCoordinate => Some(BaselineKind::Coordinate),
            MethodName::SgdGaussian => Some(BaselineKind::Gaussian),
            MethodName::SgdSphere => Some(BaselineKind::Sphere),
            MethodName::SgdOnePoint => Some(BaselineKind::PlainOnePoint),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    pub name: MethodName,
    /// Output label; defaults to the method name. Needed when one method
    /// appears twice with different parameters.
    pub label: Option<String>,
    pub delta: Option<f64>,
    pub block_len: Option<usize>,
    pub n_blocks: Option<usize>,
    pub step_size: Option<f64>,
    pub batch: Option<usize>,
    pub iterations: Option<usize>,
    /// Query cap for explicit parameters; fills in or shortens the horizon.
    pub budget: Option<u64>,
    pub schedule: Option<ScheduleConfig>,
}

impl MethodConfig {
    pub fn label(&self) -> &str {
        self.label.as_deref().unwrap_or(self.name.as_str())
    }

    fn has_explicit(&self) -> bool {
        self.delta.is_some()
            || self.block_len.is_some()
            || self.n_blocks.is_some()
            || self.step_size.is_some()
            || self.batch.is_some()
            || self.iterations.is_some()
            || self.budget.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleMode {
    #[default]
    Nonsmooth,
    GradientLipschitz,
    HessianLipschitz,
}

impl ScheduleMode {
    pub fn smooth(self) -> Option<SmoothMode> {
        match self {
            ScheduleMode::Nonsmooth => None,
            ScheduleMode::GradientLipschitz => Some(SmoothMode::GradientLipschitz),
            ScheduleMode::HessianLipschitz => Some(SmoothMode::HessianLipschitz),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantSet {
    /// Constants from the full second-moment bounds.
    #[default]
    Lemma,
    /// Smaller constants from the complexity statement.
    Compact,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub epsilon: f64,
    #[serde(default)]
    pub mode: ScheduleMode,
    /// Goldstein radius for nonsmooth O2NC; smoothing radius for SGD.
    pub delta: Option<f64>,
    /// Run the nonsmooth schedule at `delta / 2` so the guarantee holds at
    /// radius `delta`.
    #[serde(default = "default_true")]
    pub halve_radius: bool,
    pub budget: Option<u64>,
    #[serde(default)]
    pub constants: ConstantSet,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportPoint {
    /// The final iterate `x_T`.
    #[default]
    Last,
    /// The randomized output (`ybar_{k_out}` or `x_{t_out}`).
    Output,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSettings {
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    pub workers: Option<usize>,
    /// Iterations between objective checkpoints; `ceil(T / 200)` when absent.
    pub checkpoint_every: Option<usize>,
    #[serde(default = "default_eval_samples")]
    pub eval_samples: usize,
    /// Monte-Carlo samples per point for certificates; 0 disables them.
    #[serde(default = "default_certificate_samples")]
    pub certificate_samples: usize,
    #[serde(default)]
    pub report_point: ReportPoint,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn default_eval_samples() -> usize {
    1000
}

fn default_certificate_samples() -> usize {
    10_000
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            seeds: default_seeds(),
            output: default_output(),
            workers: None,
            checkpoint_every: None,
            eval_samples: default_eval_samples(),
            certificate_samples: default_certificate_samples(),
            report_point: ReportPoint::default(),
        }
    }
}

fn bad(field: impl Into<String>, reason: impl Into<String>) -> CliError {
    CliError::Config {
        field: field.into(),
        reason: reason.into(),
    }
}

fn positive(field: &str, v: Option<f64>) -> Result<()> {
    match v {
        Some(x) if !(x > 0.0 && x.is_finite()) => Err(bad(field, format!("must be > 0, got {x}"))),
        _ => Ok(()),
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file. A relative `run.output` resolves against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| e.in_file(path))?;
        let base = path.parent().unwrap_or(Path::new("."));
        if cfg.run.output.is_relative() {
            cfg.run.output = base.join(&cfg.run.output);
        }
        for p in [&mut cfg.problem.records, &mut cfg.problem.test_records, &mut cfg.problem.prices]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.problem.validate()?;
        if self.methods.is_empty() {
            return Err(bad("method", "at least one [[method]] table is required"));
        }
        let mut labels = std::collections::HashSet::new();
        for (i, m) in self.methods.iter().enumerate() {
            m.validate(i)?;
            if !labels.insert(m.label()) {
                return Err(bad(
                    format!("method[{i}].label"),
                    format!("duplicate label `{}`; set distinct labels", m.label()),
                ));
            }
        }
        let r = &self.run;
        if r.seeds.is_empty() {
            return Err(bad("run.seeds", "at least one seed is required"));
        }
        let mut sorted = r.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != r.seeds.len() {
            return Err(bad("run.seeds", "seeds must be distinct"));
        }
        if r.workers == Some(0) {
            return Err(bad("run.workers", "must be >= 1"));
        }
        if r.checkpoint_every == Some(0) {
            return Err(bad("run.checkpoint_every", "must be >= 1"));
        }
        if r.eval_samples == 0 {
            return Err(bad("run.eval_samples", "must be >= 1"));
        }
        Ok(())
    }

    /// Worker count: config, then the environment, then all cores.
    pub fn workers(&self) -> Result<Option<usize>> {
        if let Some(w) = self.run.workers {
            return Ok(Some(w));
        }
        match std::env::var(WORKERS_ENV) {
            Ok(v) => v
                .trim()
                .parse::<usize>()
                .ok()
                .filter(|w| *w >= 1)
                .map(Some)
                .ok_or_else(|| bad(WORKERS_ENV, format!("expected a positive integer, got `{v}`"))),
            Err(_) => Ok(None),
        }
    }
}

impl ProblemConfig {
    fn validate(&self) -> Result<()> {
        use ProblemKind::*;
        let kind = self.kind;
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(bad("problem.sigma", format!("must be >= 0, got {}", self.sigma)));
        }
        if self.start.is_some() && self.start_value.is_some() {
            return Err(bad("problem.start", "give `start` or `start_value`, not both"));
        }
        for (name, v) in [
            ("problem.lipschitz", self.lipschitz),
            ("problem.grad_lipschitz", self.grad_lipschitz),
            ("problem.hess_lipschitz", self.hess_lipschitz),
            ("problem.lipschitz_radius", self.lipschitz_radius),
            ("problem.tau", self.tau),
        ] {
            positive(name, v)?;
        }
        for (name, v) in [("problem.noise_bound", self.noise_bound), ("problem.gap", self.gap)] {
            if let Some(x) = v {
                if !(x >= 0.0 && x.is_finite()) {
                    return Err(bad(name, format!("must be >= 0, got {x}")));
                }
            }
        }

        let allowed: &[&str] = match kind {
            Linear => &["a"],
            Norm | AbsSum => &["dim"],
            Quadratic => &["center"],
            PerformativeQuadratic => &["theta", "eps_perf", "matrix"],
            Strategic => &["instances", "records", "test_records", "n_train", "n_test", "tau"],
            Pricing => &["instances", "prices", "products", "buyers"],
        };
        let present = [
            ("dim", self.dim.is_some()),
            ("a", self.a.is_some()),
            ("center", self.center.is_some()),
            ("theta", self.theta.is_some()),
            ("eps_perf", self.eps_perf.is_some()),
            ("matrix", self.matrix.is_some()),
            ("instances", self.instances.is_some()),
            ("records", self.records.is_some()),
            ("test_records", self.test_records.is_some()),
            ("n_train", self.n_train.is_some()),
            ("n_test", self.n_test.is_some()),
            ("tau", self.tau.is_some()),
            ("prices", self.prices.is_some()),
            ("products", self.products.is_some()),
            ("buyers", self.buyers.is_some()),
        ];
        for (name, set) in present {
            if set && !allowed.contains(&name) {
                return Err(bad(format!("problem.{name}"), format!("not used by kind `{}`", kind.name())));
            }
        }
        let need = |name: &str, set: bool| if set { Ok(()) } else { Err(bad(format!("problem.{name}"), format!("required for kind `{}`", kind.name()))) };
        match kind {
            Linear => need("a", self.a.is_some())?,
            Norm | AbsSum => need("dim", self.dim.is_some())?,
            Quadratic => need("center", self.center.is_some())?,
            PerformativeQuadratic => {
                need("theta", self.theta.is_some())?;
                need("eps_perf", self.eps_perf.is_some())?;
            }
            Strategic | Pricing => {}
        }
        if self.dim == Some(0) {
            return Err(bad("problem.dim", "must be >= 1"));
        }
        if let (Some(m), Some(theta)) = (&self.matrix, &self.theta) {
            let d = theta.len();
            if m.len() != d || m.iter().any(|row| row.len() != d) {
                return Err(bad("problem.matrix", format!("must be {d} x {d}")));
            }
        }
        if self.instances.is_some() && (self.records.is_some() || self.prices.is_some()) {
            return Err(bad("problem.instances", "synthetic instance seeds cannot be combined with a data file"));
        }
        if self.test_records.is_some() && self.records.is_none() {
            return Err(bad("problem.test_records", "requires `records`"));
        }
        if matches!(self.instances.as_deref(), Some([])) {
            return Err(bad("problem.instances", "at least one instance seed is required"));
        }
        Ok(())
    }

    /// Problem dimension, when the config alone determines it.
    pub fn dimension(&self) -> Option<usize> {
        match self.kind {
            ProblemKind::Linear => self.a.as_ref().map(Vec::len),
            ProblemKind::Norm | ProblemKind::AbsSum => self.dim,
            ProblemKind::Quadratic => self.center.as_ref().map(Vec::len),
            ProblemKind::PerformativeQuadratic => self.theta.as_ref().map(Vec::len),
            ProblemKind::Strategic => Some(ddzo::problems::strategic::STRATEGIC_DIM),
            ProblemKind::Pricing => None,
        }
    }
}

impl MethodConfig {
    fn validate(&self, i: usize) -> Result<()> {
        let field = |f: &str| format!("method[{i}].{f}");
        let is_o2nc = self.name.o2nc_option().is_some();
        match (&self.schedule, self.has_explicit()) {
            (Some(_), true) => {
                return Err(bad(
                    field("schedule"),
                    "give either explicit parameters or a [method.schedule] table, not both",
                ))
            }
            (None, false) => {
                return Err(bad(
                    field("schedule"),
                    "give either explicit parameters or a [method.schedule] table",
                ))
            }
            _ => {}
        }
        if let Some(label) = &self.label {
            if label.is_empty() || label.contains(['/', '\\', ',']) || label.starts_with('.') {
                return Err(bad(field("label"), "must be non-empty without `/`, `\\` or `,`"));
            }
        }
        if let Some(s) = &self.schedule {
            positive(&field("schedule.epsilon"), Some(s.epsilon))?;
            positive(&field("schedule.delta"), s.delta)?;
            if s.budget == Some(0) {
                return Err(bad(field("schedule.budget"), "must be >= 1"));
            }
            if s.mode == ScheduleMode::Nonsmooth && s.delta.is_none() {
                return Err(bad(field("schedule.delta"), "required for the nonsmooth schedule"));
            }
            if !is_o2nc {
                if s.mode != ScheduleMode::Nonsmooth {
                    return Err(bad(field("schedule.mode"), "SGD schedules take an explicit `delta`"));
                }
                if s.constants != ConstantSet::Lemma {
                    return Err(bad(field("schedule.constants"), "SGD schedules use the lemma constants"));
                }
            } else if s.mode != ScheduleMode::Nonsmooth && s.delta.is_some() {
                return Err(bad(field("schedule.delta"), "smooth schedules pick delta themselves"));
            }
            return Ok(());
        }
        let need = |name: &str, set: bool| if set { Ok(()) } else { Err(bad(field(name), "required for explicit parameters")) };
        let forbid = |name: &str, set: bool| {
            if set {
                Err(bad(field(name), format!("not used by `{}`", self.name.as_str())))
            } else {
                Ok(())
            }
        };
        need("delta", self.delta.is_some())?;
        need("step_size", self.step_size.is_some())?;
        positive(&field("delta"), self.delta)?;
        positive(&field("step_size"), self.step_size)?;
        if self.budget == Some(0) {
            return Err(bad(field("budget"), "must be >= 1"));
        }
        if is_o2nc {
            forbid("batch", self.batch.is_some())?;
            forbid("iterations", self.iterations.is_some())?;
            need("block_len", self.block_len.is_some())?;
            if self.block_len == Some(0) {
                return Err(bad(field("block_len"), "must be >= 1"));
            }
            if self.n_blocks.is_none() && self.budget.is_none() {
                return Err(bad(field("n_blocks"), "give `n_blocks`, `budget`, or both"));
            }
            if self.n_blocks == Some(0) {
                return Err(bad(field("n_blocks"), "must be >= 1"));
            }
        } else {
            forbid("block_len", self.block_len.is_some())?;
            forbid("n_blocks", self.n_blocks.is_some())?;
            if self.batch == Some(0) {
                return Err(bad(field("batch"), "must be >= 1"));
            }
            if self.iterations.is_none() && self.budget.is_none() {
                return Err(bad(field("iterations"), "give `iterations`, `budget`, or both"));
            }
            if self.iterations == Some(0) {
                return Err(bad(field("iterations"), "must be >= 1"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[problem]
kind = "norm"
dim = 2
sigma = 0.1
start = [1.0, 1.0]

[[method]]
name = "o2nc_opt1"
delta = 0.05
block_len = 10
step_size = 0.01
budget = 1000
"#;

    #[test]
    fn parses_a_minimal_config() {
        let cfg = RunConfig::from_toml(BASE).unwrap();
        assert_eq!(cfg.problem.kind, ProblemKind::Norm);
        assert_eq!(cfg.methods[0].label(), "o2nc_opt1");
        assert_eq!(cfg.run.seeds, vec![0]);
        assert_eq!(cfg.run.eval_samples, 1000);
    }

    #[test]
    fn unknown_keys_are_reported_with_location() {
        let err = RunConfig::from_toml(&BASE.replace("sigma = 0.1", "sigma = 0.1\nsigmaa = 2")).unwrap_err().to_string();
        assert!(err.contains("sigmaa") && err.contains("line"), "{err}");
    }

    #[test]
    fn explicit_and_schedule_are_exclusive() {
        let both = format!("{BASE}\n[method.schedule]\nepsilon = 0.5\ndelta = 0.1\n");
        let err = RunConfig::from_toml(&both).unwrap_err().to_string();
        assert!(err.contains("method[0].schedule"), "{err}");
        let neither = BASE
            .replace("delta = 0.05\n", "")
            .replace("block_len = 10\n", "")
            .replace("step_size = 0.01\n", "")
            .replace("budget = 1000\n", "");
        assert!(RunConfig::from_toml(&neither).is_err());
    }

    #[test]
    fn explicit_parameters_must_be_complete() {
        let err = RunConfig::from_toml(&BASE.replace("block_len = 10\n", "")).unwrap_err().to_string();
        assert!(err.contains("block_len"), "{err}");
        let err = RunConfig::from_toml(&BASE.replace("budget = 1000\n", "")).unwrap_err().to_string();
        assert!(err.contains("n_blocks"), "{err}");
        let sgd = BASE.replace("o2nc_opt1", "sgd_baseline");
        assert!(RunConfig::from_toml(&sgd).unwrap_err().to_string().contains("block_len"));
    }

    #[test]
    fn problem_fields_must_match_kind() {
        let err = RunConfig::from_toml(&BASE.replace("dim = 2", "dim = 2\ntau = 2.0")).unwrap_err().to_string();
        assert!(err.contains("problem.tau"), "{err}");
        let err = RunConfig::from_toml(&BASE.replace("dim = 2\n", "")).unwrap_err().to_string();
        assert!(err.contains("problem.dim"), "{err}");
    }

    #[test]
    fn duplicate_labels_and_seeds_are_rejected() {
        let twice = format!("{BASE}{}", &BASE[BASE.find("[[method]]").unwrap()..]);
        assert!(RunConfig::from_toml(&twice).unwrap_err().to_string().contains("duplicate"));
        let seeds = format!("{BASE}\n[run]\nseeds = [1, 1]\n");
        assert!(RunConfig::from_toml(&seeds).unwrap_err().to_string().contains("distinct"));
    }

    #[test]
    fn schedule_tables_parse() {
        let text = r#"
[problem]
kind = "quadratic"
center = [1.0, 0.0]

[[method]]
name = "o2nc_opt2"
[method.schedule]
epsilon = 0.4
mode = "gradient_lipschitz"
budget = 5000

[[method]]
name = "sgd_baseline"
[method.schedule]
epsilon = 0.5
delta = 0.1
"#;
        let cfg = RunConfig::from_toml(text).unwrap();
        let s = cfg.methods[0].schedule.as_ref().unwrap();
        assert_eq!(s.mode, ScheduleMode::GradientLipschitz);
        assert!(s.halve_radius);
        assert_eq!(s.constants, ConstantSet::Lemma);
    }
}
