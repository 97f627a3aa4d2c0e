//! Summary table, recomputed from the emitted traces alone.

use std::fs;
use std::path::Path;

use crate::error::{CliError, Result};
use crate::runner::{TraceRow, SCHEDULES_FILE, TRACE_HEADER};

pub const SUMMARY_FILE: &str = "summary.csv";
pub const SUMMARY_HEADER: &str = "method,week_or_instance,mean,std,queries";

/// Final-objective statistics across the successful seeds of one method on
/// one instance. `std` is the sample standard deviation (0 for one seed);
/// `queries` is the largest per-seed total.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: String,
    pub instance: String,
    pub seeds: usize,
    pub mean: f64,
    pub std: f64,
    pub queries: u64,
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRow>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::output(path, e.to_string()))?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != TRACE_HEADER {
        return Err(CliError::output(path, format!("unexpected header `{}`", header.join(","))));
    }
    let bad = |what: &str, v: &str| CliError::output(path, format!("bad {what} `{v}`"));
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let cert = &rec[4];
        rows.push(TraceRow {
            t: rec[0].parse().map_err(|_| bad("t", &rec[0]))?,
            queries: rec[1].parse().map_err(|_| bad("queries", &rec[1]))?,
            objective: rec[2].parse().map_err(|_| bad("objective", &rec[2]))?,
            step_norm: rec[3].parse().map_err(|_| bad("step_norm", &rec[3]))?,
            certificate: if cert.is_empty() {
                None
            } else {
                Some(cert.parse().map_err(|_| bad("certificate", cert))?)
            },
        });
    }
    if rows.is_empty() {
        return Err(CliError::output(path, "no rows"));
    }
    Ok(rows)
}

/// `(method, instance)` pairs in run order, from `schedules.csv`.
fn pairs(dir: &Path) -> Result<Vec<(String, String)>> {
    let path = dir.join(SCHEDULES_FILE);
    let mut reader = csv::Reader::from_path(&path).map_err(|e| CliError::output(&path, e.to_string()))?;
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        if rec.len() < 2 {
            return Err(CliError::output(&path, "short row"));
        }
        out.push((rec[0].to_string(), rec[1].to_string()));
    }
    Ok(out)
}

/// Seeds with a trace file, in ascending order.
fn seeds_in(dir: &Path) -> Result<Vec<u64>> {
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let mut seeds = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| CliError::io(dir, e))? {
        let name = entry.map_err(|e| CliError::io(dir, e))?.file_name();
        let name = name.to_string_lossy();
        if let Some(s) = name.strip_prefix("seed_").and_then(|s| s.strip_suffix(".csv")) {
            seeds.push(s.parse::<u64>().map_err(|_| CliError::output(dir, format!("bad trace name `{name}`")))?);
        }
    }
    seeds.sort_unstable();
    Ok(seeds)
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Rebuilds the summary from an output directory and writes `summary.csv`.
pub fn summarize(dir: &Path) -> Result<Vec<SummaryRow>> {
    let mut rows = Vec::new();
    for (method, instance) in pairs(dir)? {
        let sub = dir.join(&method).join(&instance);
        let mut finals = Vec::new();
        let mut queries = 0;
        for seed in seeds_in(&sub)? {
            let trace = read_trace(&sub.join(format!("seed_{seed}.csv")))?;
            let last = trace.last().expect("non-empty");
            finals.push(last.objective);
            queries = queries.max(last.queries);
        }
        let (mean, std) = mean_std(&finals);
        rows.push(SummaryRow {
            method,
            instance,
            seeds: finals.len(),
            mean,
            std,
            queries,
        });
    }
    let path = dir.join(SUMMARY_FILE);
    fs::write(&path, format_summary(&rows)).map_err(|e| CliError::io(&path, e))?;
    Ok(rows)
}

pub fn format_summary(rows: &[SummaryRow]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!("{},{},{},{},{}\n", r.method, r.instance, r.mean, r.std, r.queries));
    }
    out
}
