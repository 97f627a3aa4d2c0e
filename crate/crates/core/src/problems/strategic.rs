//! Strategic classification with a closed-form best response.
//!
//! The learner publishes a linear classifier `x = (x_feat, b)`. An agent
//! with features `w` that is rejected (`x_feat . w + b < 0`) moves to the
//! nearest point on the decision boundary if the squared movement cost is
//! at most the approval reward `tau`, and stays put otherwise. The loss is
//! the hinge loss on the post-response features.

use std::sync::Arc;

use crate::error::{invalid, Result};
use crate::oracle::{Sampler, StochasticOracle};
use crate::random::{make_rng, RandomSource};
use crate::vector::dot;

pub const N_FEATURES: usize = 11;
/// Classifier dimension: features plus bias.
pub const STRATEGIC_DIM: usize = N_FEATURES + 1;
pub const DEFAULT_TAU: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct StrategicRecord {
    pub features: Vec<f64>,
    /// `-1.0` or `+1.0`.
    pub label: f64,
}

impl StrategicRecord {
    pub fn new(features: Vec<f64>, label: f64) -> Result<Self> {
        if features.len() != N_FEATURES {
            return Err(invalid("features", format!("expected {N_FEATURES}, got {}", features.len())));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(invalid("features", "must be finite"));
        }
        if label != 1.0 && label != -1.0 {
            return Err(invalid("label", format!("must be -1 or +1, got {label}")));
        }
        Ok(Self { features, label })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategicInstance {
    /// Training records, standardized with the training statistics.
    pub train: Vec<StrategicRecord>,
    /// Held-out records, standardized with the training statistics.
    pub test: Vec<StrategicRecord>,
    pub tau: f64,
    pub feature_mean: Vec<f64>,
    pub feature_std: Vec<f64>,
}

impl StrategicInstance {
    /// Standardizes raw records with per-feature mean/std of `train`.
    /// Constant features keep unit scale.
    pub fn from_raw(train: Vec<StrategicRecord>, test: Vec<StrategicRecord>, tau: f64) -> Result<Self> {
        if train.is_empty() {
            return Err(invalid("train", "instance needs at least one training record"));
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(invalid("tau", format!("must be > 0, got {tau}")));
        }
        let n = train.len() as f64;
        let mean: Vec<f64> = (0..N_FEATURES)
            .map(|j| train.iter().map(|r| r.features[j]).sum::<f64>() / n)
            .collect();
        let std: Vec<f64> = (0..N_FEATURES)
            .map(|j| {
                let var = train.iter().map(|r| (r.features[j] - mean[j]).powi(2)).sum::<f64>() / n;
                if var > 0.0 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        let standardize = |recs: Vec<StrategicRecord>| -> Vec<StrategicRecord> {
            recs.into_iter()
                .map(|r| StrategicRecord {
                    features: r.features.iter().enumerate().map(|(j, v)| (v - mean[j]) / std[j]).collect(),
                    label: r.label,
                })
                .collect()
        };
        Ok(Self {
            train: standardize(train),
            test: standardize(test),
            tau,
            feature_mean: mean,
            feature_std: std,
        })
    }

    /// Gaussian features labeled by a noisy linear teacher, both drawn from `seed`.
    pub fn synthetic(n_train: usize, n_test: usize, tau: f64, seed: u64) -> Result<Self> {
        let raw = synthetic_records(n_train + n_test, seed);
        let (train, test) = raw.split_at(n_train);
        Self::from_raw(train.to_vec(), test.to_vec(), tau)
    }

    /// Exact mean post-response hinge loss over the training set.
    pub fn train_loss(&self, x: &[f64]) -> f64 {
        mean_loss(&self.train, x, self.tau)
    }

    pub fn test_loss(&self, x: &[f64]) -> f64 {
        mean_loss(&self.test, x, self.tau)
    }

    /// Fraction of held-out records whose post-response prediction matches
    /// the label. Scores of exactly zero count as approvals.
    pub fn test_accuracy(&self, x: &[f64]) -> f64 {
        if self.test.is_empty() {
            return f64::NAN;
        }
        let correct = self
            .test
            .iter()
            .filter(|r| {
                let w = strategic_response(x, &r.features, self.tau);
                let pred = if score(x, &w) >= 0.0 { 1.0 } else { -1.0 };
                pred == r.label
            })
            .count();
        correct as f64 / self.test.len() as f64
    }
}

fn synthetic_records(n: usize, seed: u64) -> Vec<StrategicRecord> {
    let mut rng = make_rng(seed);
    let teacher: Vec<f64> = (0..N_FEATURES).map(|_| rng.standard_normal()).collect();
    let teacher_norm = dot(&teacher, &teacher).sqrt();
    (0..n)
        .map(|_| {
            let w: Vec<f64> = (0..N_FEATURES).map(|_| 1.0 + rng.standard_normal()).collect();
            let margin = dot(&teacher, &w) / teacher_norm + 0.5 * rng.standard_normal();
            let label = if margin >= 0.0 { 1.0 } else { -1.0 };
            StrategicRecord { features: w, label }
        })
        .collect()
}

fn score(x: &[f64], w: &[f64]) -> f64 {
    dot(&x[..N_FEATURES], w) + x[N_FEATURES]
}

/// Best response of an agent with features `w_true` to classifier `x`.
pub fn strategic_response(x: &[f64], w_true: &[f64], tau: f64) -> Vec<f64> {
    debug_assert_eq!(x.len(), STRATEGIC_DIM);
    let feat = &x[..N_FEATURES];
    let feat_sq = dot(feat, feat);
    let s = score(x, w_true);
    if s >= 0.0 || feat_sq == 0.0 {
        return w_true.to_vec();
    }
    // ||w_proj - w_true||^2 = s^2 / ||x_feat||^2
    if s * s / feat_sq <= tau {
        w_true.iter().zip(feat).map(|(w, f)| w - s / feat_sq * f).collect()
    } else {
        w_true.to_vec()
    }
}

/// `max(0, 1 - y (x_feat . w~ + b))` after strategic response.
pub fn hinge_loss(x: &[f64], record: &StrategicRecord, tau: f64) -> f64 {
    let w = strategic_response(x, &record.features, tau);
    (1.0 - record.label * score(x, &w)).max(0.0)
}

fn mean_loss(records: &[StrategicRecord], x: &[f64], tau: f64) -> f64 {
    records.iter().map(|r| hinge_loss(x, r, tau)).sum::<f64>() / records.len() as f64
}

/// Samples a uniform training record and returns its post-response hinge loss.
#[derive(Debug, Clone)]
pub struct StrategicSampler {
    instance: Arc<StrategicInstance>,
}

impl Sampler for StrategicSampler {
    fn dim(&self) -> usize {
        STRATEGIC_DIM
    }

    fn draw(&self, x: &[f64], rng: &mut RandomSource) -> f64 {
        let record = &self.instance.train[rng.index(self.instance.train.len())];
        hinge_loss(x, record, self.instance.tau)
    }
}

pub fn strategic_oracle(instance: Arc<StrategicInstance>) -> StochasticOracle {
    StochasticOracle::new(StrategicSampler { instance })
}
