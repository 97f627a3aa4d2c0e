//! Geometric invariants every O2NC trace must satisfy.

#![allow(dead_code)]

use ddzo::{O2NCConfig, RunTrace};

/// Relative slack for floating-point rounding in norm comparisons.
const ROUND: f64 = 1e-9;

/// Returns a description of every violated invariant; empty when the trace
/// is consistent with `cfg`.
pub fn o2nc_violations(trace: &RunTrace, cfg: &O2NCConfig) -> Vec<String> {
    let mut out = Vec::new();
    let radius = cfg.inner_radius();
    let delta = cfg.delta;
    let recs = &trace.records;
    if recs.len() != cfg.horizon() {
        out.push(format!("{} records for horizon {}", recs.len(), cfg.horizon()));
        return out;
    }
    if recs[0].y.as_slice() != trace.start.as_slice() {
        out.push("y_1 differs from x_0".into());
    }
    for (i, r) in recs.iter().enumerate() {
        if r.step_norm > radius * (1.0 + ROUND) {
            out.push(format!("t={}: |delta_t| = {} > D = {radius}", r.t, r.step_norm));
        }
        if i % cfg.block_len == 0 && r.step_norm != 0.0 {
            out.push(format!("t={}: displacement not reset at block start", r.t));
        }
        if i > 0 {
            let jump = r.y.distance(&recs[i - 1].y);
            if jump > 2.0 * radius * (1.0 + ROUND) {
                out.push(format!("t={}: |y_t - y_(t-1)| = {jump} > 2D", r.t));
            }
        }
    }
    for k in 0..trace.n_blocks() {
        let block = trace.block(k);
        for a in block {
            for b in block {
                let spread = a.y.distance(&b.y);
                if spread > delta * (1.0 + ROUND) {
                    out.push(format!("block {k}: spread {spread} > delta"));
                }
            }
        }
    }
    let mean = trace.block_mean(trace.output_block);
    if mean != trace.output {
        out.push("output is not the output block mean".into());
    }
    for r in trace.block(trace.output_block) {
        let gap = mean.distance(&r.y);
        if gap > delta * (1.0 + ROUND) {
            out.push(format!("t={}: |ybar - y_t| = {gap} > delta", r.t));
        }
    }
    out
}
