//! Experiment execution: turns a validated config into concrete runs, executes
//! every (method, instance, seed) job on a worker pool and writes traces.
//!
//! Output layout under `run.output`:
//!
//! ```text
//! schedules.csv                      resolved parameters per method and instance
//! <label>/<instance>/seed_<s>.csv    t,queries,objective,step_norm,certificate
//! failures.csv                       seeds that aborted, with the reason
//! summary.csv                        method,week_or_instance,mean,std,queries
//! timing.txt                         wall time (not byte-stable)
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ddzo::o2nc::certificate_at;
use ddzo::schedules::{schedule_sgd, schedule_theorem2_with, smooth_delta, MomentConstants};
use ddzo::{
    clamp_budget, make_rng, run_o2nc, run_sgd, DecisionVector, EstimatorOption, O2NCConfig, RunTrace, SGDConfig,
    SgdEstimator, SmoothingParams, TraceDetail,
};
use rayon::prelude::*;

use crate::config::{ConstantSet, MethodConfig, ReportPoint, RunConfig, RunSettings, ScheduleMode};
use crate::error::{CliError, Result};
use crate::instance::{build_instances, Instance};
use crate::summary::{summarize, SummaryRow};

pub const TRACE_HEADER: &str = "t,queries,objective,step_norm,certificate";
pub const SCHEDULES_FILE: &str = "schedules.csv";
pub const FAILURES_FILE: &str = "failures.csv";
pub const TIMING_FILE: &str = "timing.txt";
pub const SCHEDULE_HEADER: [&str; 19] = [
    "method",
    "instance",
    "algorithm",
    "delta",
    "block_len",
    "n_blocks",
    "batch",
    "iterations",
    "step_size",
    "predicted_queries",
    "budget",
    "clamped",
    "unclamped_queries",
    "lipschitz",
    "lipschitz_source",
    "noise_bound",
    "noise_source",
    "gap",
    "gap_source",
];

#[derive(Debug, Clone, PartialEq)]
pub enum Runnable {
    O2nc(O2NCConfig),
    Sgd(SGDConfig),
}

impl Runnable {
    pub fn horizon(&self) -> usize {
        match self {
            Runnable::O2nc(c) => c.horizon(),
            Runnable::Sgd(c) => c.iterations,
        }
    }

    pub fn delta(&self) -> f64 {
        match self {
            Runnable::O2nc(c) => c.delta,
            Runnable::Sgd(c) => c.delta,
        }
    }

    pub fn predicted_queries(&self, dim: usize) -> u64 {
        match self {
            Runnable::O2nc(c) => c.predicted_queries(),
            Runnable::Sgd(c) => c.predicted_queries(dim),
        }
    }
}

/// One method resolved against one instance.
#[derive(Debug, Clone)]
pub struct Plan {
    pub label: String,
    pub instance: usize,
    pub run: Runnable,
    pub budget: Option<u64>,
    /// Query count before any budget cap, when a cap was applied.
    pub unclamped_queries: Option<u64>,
}

fn cfg_err(field: String, e: impl std::fmt::Display) -> CliError {
    CliError::Config {
        field,
        reason: e.to_string(),
    }
}

/// Resolves every method against every instance, in config order.
pub fn plan(cfg: &RunConfig, instances: &[Instance]) -> Result<Vec<Plan>> {
    let mut plans = Vec::new();
    for (i, m) in cfg.methods.iter().enumerate() {
        for (k, inst) in instances.iter().enumerate() {
            let p = plan_method(m, inst).map_err(|e| match e {
                CliError::Core(e) => cfg_err(format!("method[{i}] on {}", inst.name), e),
                other => other,
            })?;
            plans.push(Plan {
                label: m.label().to_string(),
                instance: k,
                ..p
            });
        }
    }
    Ok(plans)
}

fn plan_method(m: &MethodConfig, inst: &Instance) -> Result<Plan> {
    let d = inst.dim();
    let start = inst.start.clone();
    let estimator = m.name.baseline().map_or(SgdEstimator::MinibatchTwoPoint, SgdEstimator::Baseline);
    let plan = |run: Runnable, budget: Option<u64>, unclamped: Option<u64>| Plan {
        label: String::new(),
        instance: 0,
        run,
        budget,
        unclamped_queries: unclamped,
    };

    if let Some(s) = &m.schedule {
        let spec = inst.constants.spec(d)?;
        if let Some(option) = m.name.o2nc_option() {
            let constants = match s.constants {
                ConstantSet::Lemma => MomentConstants::default(),
                ConstantSet::Compact => MomentConstants::compact(),
            };
            let sched = match s.mode.smooth() {
                None => {
                    let radius = s.delta.expect("validated");
                    let delta = if s.halve_radius { radius / 2.0 } else { radius };
                    schedule_theorem2_with(&spec, delta, s.epsilon, option, &constants)?
                }
                Some(mode) => {
                    let delta = smooth_delta(&spec, s.epsilon, mode)?;
                    schedule_theorem2_with(&spec, delta, s.epsilon / 2.0, option, &constants)?
                }
            };
            let sched = match s.budget {
                Some(b) => clamp_budget(&sched, b)?,
                None => sched,
            };
            let unclamped = sched.clamp.map(|c| c.theoretical_queries);
            let run = sched.o2nc_config()?.with_start(start).with_detail(TraceDetail::Compact);
            return Ok(plan(Runnable::O2nc(run), s.budget, unclamped));
        }
        debug_assert_eq!(s.mode, ScheduleMode::Nonsmooth);
        let sched = schedule_sgd(&spec, s.delta.expect("validated"), s.epsilon)?;
        let mut run = sched
            .sgd_config()?
            .with_estimator(estimator)
            .with_start(start)
            .with_detail(TraceDetail::Compact);
        let full = run.predicted_queries(d);
        if let Some(b) = s.budget {
            if full > b {
                fit_sgd(&mut run, d, b)?;
            }
        }
        let unclamped = (run.predicted_queries(d) != full).then_some(full);
        return Ok(plan(Runnable::Sgd(run), s.budget, unclamped));
    }

    let delta = m.delta.expect("validated");
    let eta = m.step_size.expect("validated");
    if let Some(option) = m.name.o2nc_option() {
        let block_len = m.block_len.expect("validated");
        let mut n_blocks = m.n_blocks.unwrap_or(usize::MAX);
        let mut unclamped = None;
        if let Some(b) = m.budget {
            let per_block = match option {
                EstimatorOption::TwoPoint => 2 * block_len as u64,
                EstimatorOption::OnePointResidual => block_len as u64,
            };
            let usable = match option {
                EstimatorOption::TwoPoint => b,
                EstimatorOption::OnePointResidual => b.saturating_sub(1),
            };
            let fit = usize::try_from(usable / per_block).unwrap_or(usize::MAX);
            if fit == 0 {
                return Err(CliError::Config {
                    field: "budget".into(),
                    reason: format!("{b} queries do not cover one block of length {block_len}"),
                });
            }
            if fit < n_blocks {
                if m.n_blocks.is_some() {
                    unclamped = Some(option.total_queries((n_blocks * block_len) as u64));
                }
                n_blocks = fit;
            }
        }
        let run = O2NCConfig::new(delta, block_len, n_blocks, eta, option)?
            .with_start(start)
            .with_detail(TraceDetail::Compact);
        return Ok(plan(Runnable::O2nc(run), m.budget, unclamped));
    }

    let batch = m.batch.unwrap_or(1);
    let mut run = SGDConfig::new(delta, batch, m.iterations.unwrap_or(1), eta)?
        .with_estimator(estimator)
        .with_start(start)
        .with_detail(TraceDetail::Compact);
    let mut unclamped = None;
    if let Some(b) = m.budget {
        let per_iter = run.queries_per_iteration(d);
        let fit = usize::try_from(b / per_iter).unwrap_or(usize::MAX);
        if fit == 0 {
            return Err(CliError::Config {
                field: "budget".into(),
                reason: format!("{b} queries do not cover one iteration ({per_iter} queries)"),
            });
        }
        run.iterations = match m.iterations {
            Some(t) if t > fit => {
                unclamped = Some(run.predicted_queries(d));
                fit
            }
            Some(t) => t,
            None => fit,
        };
    }
    Ok(plan(Runnable::Sgd(run), m.budget, unclamped))
}

/// Caps SGD at `budget` queries: fewer iterations first, then a smaller batch.
fn fit_sgd(run: &mut SGDConfig, d: usize, budget: u64) -> Result<()> {
    let per_estimate = run.queries_per_iteration(d) / run.batch as u64;
    let t = budget / run.queries_per_iteration(d);
    if t >= 1 {
        run.iterations = t as usize;
        return Ok(());
    }
    let batch = budget / per_estimate;
    if batch == 0 {
        return Err(CliError::Config {
            field: "budget".into(),
            reason: format!("{budget} queries do not cover one estimate ({per_estimate} queries)"),
        });
    }
    run.batch = batch as usize;
    run.iterations = 1;
    Ok(())
}

/// Reads, validates and resolves a config without running anything.
pub fn validate(cfg: &RunConfig) -> Result<(Vec<Instance>, Vec<Plan>)> {
    cfg.validate()?;
    let instances = build_instances(&cfg.problem)?;
    let plans = plan(cfg, &instances)?;
    Ok((instances, plans))
}

/// SplitMix64 step; gives each (seed, stream) pair an unrelated seed.
fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const EVAL_STREAM: u64 = 1;
const CERT_STREAM: u64 = 2;

/// One trace row. `certificate` is `None` where none is computed.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: usize,
    pub queries: u64,
    pub objective: f64,
    pub step_norm: f64,
    pub certificate: Option<f64>,
}

pub fn trace_path(dir: &Path, label: &str, instance: &str, seed: u64) -> PathBuf {
    dir.join(label).join(instance).join(format!("seed_{seed}.csv"))
}

/// Runs one job and returns its trace rows. The optimizer's own counter is
/// checked against the closed-form query count before anything is reported.
pub fn run_job(plan: &Plan, inst: &Instance, seed: u64, settings: &RunSettings) -> Result<Vec<TraceRow>> {
    let mut rng = make_rng(seed);
    let mut eval_rng = make_rng(derive_seed(seed, EVAL_STREAM));
    let mut cert_rng = make_rng(derive_seed(seed, CERT_STREAM));
    let mut oracle = inst.oracle()?;
    let d = inst.dim();
    let trace: RunTrace = match &plan.run {
        Runnable::O2nc(c) => run_o2nc(c, &mut oracle, &mut rng)?,
        Runnable::Sgd(c) => run_sgd(c, &mut oracle, &mut rng)?,
    };
    let expected = plan.run.predicted_queries(d);
    if oracle.queries() != expected || trace.queries != expected {
        return Err(CliError::Output {
            path: PathBuf::from(&plan.label),
            reason: format!("query counter {} differs from the closed form {expected}", oracle.queries()),
        });
    }

    let horizon = plan.run.horizon();
    let every = settings.checkpoint_every.unwrap_or_else(|| horizon.div_ceil(200)).max(1);
    let samples = settings.eval_samples;
    let certify = |points: &mut dyn Iterator<Item = &DecisionVector>, rng: &mut ddzo::RandomSource| -> Result<Option<f64>> {
        match inst.test_function() {
            Some(f) if settings.certificate_samples > 0 => {
                let p = SmoothingParams::new(plan.run.delta(), settings.certificate_samples)?;
                Ok(Some(certificate_at(points, &|x: &[f64]| f.value(x), &p, rng)?.value))
            }
            _ => Ok(None),
        }
    };

    let mut rows = Vec::with_capacity(horizon / every + 2);
    rows.push(TraceRow {
        t: 0,
        queries: 0,
        objective: inst.report_objective(&trace.start, samples, &mut eval_rng)?,
        step_norm: 0.0,
        certificate: certify(&mut std::iter::once(&trace.start), &mut cert_rng)?,
    });
    // Row t is the state after t iterations: the last query point for O2NC,
    // the iterate x_t for SGD.
    let is_sgd = matches!(plan.run, Runnable::Sgd(_));
    for t in (every..horizon).step_by(every) {
        let done = &trace.records[t - 1];
        let point = if is_sgd { &trace.records[t].y } else { &done.y };
        rows.push(TraceRow {
            t,
            queries: done.queries,
            objective: inst.report_objective(point, samples, &mut eval_rng)?,
            step_norm: done.step_norm,
            certificate: None,
        });
    }
    let report = match settings.report_point {
        ReportPoint::Last => &trace.last_iterate,
        ReportPoint::Output => &trace.output,
    };
    let final_cert = if is_sgd {
        certify(&mut std::iter::once(&trace.output), &mut cert_rng)?
    } else {
        certify(&mut trace.output_points(), &mut cert_rng)?
    };
    rows.push(TraceRow {
        t: horizon,
        queries: trace.queries,
        objective: inst.report_objective(report, samples, &mut eval_rng)?,
        step_norm: trace.records.last().map_or(0.0, |r| r.step_norm),
        certificate: final_cert,
    });
    Ok(rows)
}

pub fn format_trace(rows: &[TraceRow]) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for r in rows {
        let cert = r.certificate.map(|c| c.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{},{},{}\n", r.t, r.queries, r.objective, r.step_norm, cert));
    }
    out
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn schedules_csv(cfg: &RunConfig, plans: &[Plan], instances: &[Instance]) -> String {
    let mut out = SCHEDULE_HEADER.join(",");
    out.push('\n');
    for p in plans {
        let inst = &instances[p.instance];
        let algorithm = cfg
            .methods
            .iter()
            .find(|m| m.label() == p.label)
            .map_or("", |m| m.name.as_str());
        let (block_len, n_blocks, batch) = match &p.run {
            Runnable::O2nc(c) => (c.block_len, c.n_blocks, 1),
            Runnable::Sgd(c) => (1, c.iterations, c.batch),
        };
        let c = &inst.constants;
        let step = match &p.run {
            Runnable::O2nc(c) => c.step_size,
            Runnable::Sgd(c) => c.step_size,
        };
        let fields = [
            p.label.clone(),
            inst.name.clone(),
            algorithm.to_string(),
            p.run.delta().to_string(),
            block_len.to_string(),
            n_blocks.to_string(),
            batch.to_string(),
            p.run.horizon().to_string(),
            step.to_string(),
            p.run.predicted_queries(inst.dim()).to_string(),
            opt(p.budget),
            p.unclamped_queries.is_some().to_string(),
            opt(p.unclamped_queries),
            c.lipschitz.0.to_string(),
            c.lipschitz.1.as_str().to_string(),
            c.noise_bound.0.to_string(),
            c.noise_bound.1.as_str().to_string(),
            opt(c.gap.map(|g| g.0)),
            opt(c.gap.map(|g| g.1.as_str())),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// A seed that aborted; the batch carries on without it.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub label: String,
    pub instance: String,
    pub seed: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub summary: Vec<SummaryRow>,
    pub failures: Vec<Failure>,
    pub output: PathBuf,
}

/// Runs every job of `cfg` and writes the output tree. Aborted seeds are
/// listed in `failures.csv` and left out of the summary.
pub fn run_experiment(cfg: &RunConfig) -> Result<Outcome> {
    let clock = Instant::now();
    let (instances, plans) = validate(cfg)?;
    let dir = cfg.run.output.clone();
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    write_file(&dir.join(SCHEDULES_FILE), &schedules_csv(cfg, &plans, &instances))?;

    let jobs: Vec<(&Plan, u64)> = plans.iter().flat_map(|p| cfg.run.seeds.iter().map(move |s| (p, *s))).collect();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cfg.workers()? {
        pool = pool.num_threads(w);
    }
    let pool = pool.build().map_err(|e| cfg_err("run.workers".into(), e))?;
    let results: Vec<Option<Failure>> = pool.install(|| {
        jobs.par_iter()
            .map(|(p, seed)| {
                let inst = &instances[p.instance];
                let path = trace_path(&dir, &p.label, &inst.name, *seed);
                let outcome = run_job(p, inst, *seed, &cfg.run).and_then(|rows| write_file(&path, &format_trace(&rows)));
                outcome.err().map(|e| {
                    let _ = fs::remove_file(&path);
                    Failure {
                        label: p.label.clone(),
                        instance: inst.name.clone(),
                        seed: *seed,
                        reason: e.to_string(),
                    }
                })
            })
            .collect()
    });
    let failures: Vec<Failure> = results.into_iter().flatten().collect();

    let mut text = String::from("method,instance,seed,reason\n");
    for f in &failures {
        let reason = f.reason.replace(['\n', ','], " ");
        text.push_str(&format!("{},{},{},{}\n", f.label, f.instance, f.seed, reason));
    }
    write_file(&dir.join(FAILURES_FILE), &text)?;

    let summary = summarize(&dir)?;
    let elapsed = clock.elapsed().as_secs_f64();
    write_file(
        &dir.join(TIMING_FILE),
        &format!("wall_seconds {elapsed:.3}\njobs {}\nfailed {}\n", jobs.len(), failures.len()),
    )?;
    Ok(Outcome {
        summary,
        failures,
        output: dir,
    })
}
