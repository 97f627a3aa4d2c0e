//! Multi-product pricing under multinomial-logit demand.
//!
//! Each of `m_buyer` buyers independently buys product `i` with probability
//! `p_i(x) = exp(g_i (theta_i - x_i)) / (a0 + sum_j exp(g_j (theta_j - x_j)))`
//! or nothing with probability `a0 / (...)`. The oracle returns negative
//! profit `-sum_i x_i xi_i + sum_i c_i(xi_i)` for the realized counts `xi`.

use std::sync::Arc;

use crate::error::{invalid, Result};
use crate::oracle::{Sampler, StochasticOracle};
use crate::random::{make_rng, RandomSource};

pub const DEFAULT_PRODUCTS: usize = 30;
pub const DEFAULT_BUYERS: usize = 120;

#[derive(Debug, Clone, PartialEq)]
pub struct PricingInstance {
    pub theta: Vec<f64>,
    pub m_buyer: usize,
    /// Outside-option weight, `0.1 n`.
    pub a0: f64,
    /// Price sensitivities `2 pi / (sqrt(6) theta_i)`.
    pub sensitivity: Vec<f64>,
    /// Cost thresholds `l = 0.5 m / n`, `u = 1.5 m / n`.
    pub lower: f64,
    pub upper: f64,
    /// Cost weights `w_i = rho_i theta_i`.
    pub cost_weight: Vec<f64>,
    pub rho: Vec<f64>,
}

impl PricingInstance {
    pub fn new(theta: Vec<f64>, rho: Vec<f64>, m_buyer: usize) -> Result<Self> {
        let n = theta.len();
        if n == 0 {
            return Err(invalid("theta", "need at least one product"));
        }
        if rho.len() != n {
            return Err(invalid("rho", format!("expected {n} entries, got {}", rho.len())));
        }
        if theta.iter().any(|t| !(0.1..=0.9).contains(t)) {
            return Err(invalid("theta", "reference prices must lie in [0.1, 0.9]"));
        }
        if rho.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(invalid("rho", "must be > 0"));
        }
        if m_buyer == 0 {
            return Err(invalid("m_buyer", "must be >= 1"));
        }
        let nf = n as f64;
        let m = m_buyer as f64;
        Ok(Self {
            a0: 0.1 * nf,
            sensitivity: theta
                .iter()
                .map(|t| 2.0 * std::f64::consts::PI / (6f64.sqrt() * t))
                .collect(),
            lower: 0.5 * m / nf,
            upper: 1.5 * m / nf,
            cost_weight: theta.iter().zip(&rho).map(|(t, r)| r * t).collect(),
            theta,
            rho,
            m_buyer,
        })
    }

    /// `theta ~ Unif[0.1, 0.9]^n` and `rho ~ Unif[0.25, 0.5]^n` from `seed`.
    pub fn synthetic(n: usize, m_buyer: usize, seed: u64) -> Result<Self> {
        let mut rng = make_rng(seed);
        let theta = (0..n).map(|_| rng.uniform_range(0.1, 0.9)).collect();
        let rho = (0..n).map(|_| rng.uniform_range(0.25, 0.5)).collect();
        Self::new(theta, rho, m_buyer)
    }

    /// Draws `rho` from `seed` for a given reference price vector.
    pub fn with_seeded_rho(theta: Vec<f64>, m_buyer: usize, seed: u64) -> Result<Self> {
        let mut rng = make_rng(seed);
        let rho = theta.iter().map(|_| rng.uniform_range(0.25, 0.5)).collect();
        Self::new(theta, rho, m_buyer)
    }

    pub fn n_products(&self) -> usize {
        self.theta.len()
    }

    /// Piecewise-linear production cost of `z` units of product `i`.
    pub fn cost(&self, i: usize, z: f64) -> f64 {
        let w = self.cost_weight[i];
        let (l, u) = (self.lower, self.upper);
        if z <= l {
            2.0 * w * z
        } else if z <= u {
            w * (z - l) + 2.0 * w * l
        } else {
            3.0 * w * (z - u) + w * (u - l) + 2.0 * w * l
        }
    }

    /// Negative profit for demand counts `xi`.
    pub fn negative_profit(&self, x: &[f64], xi: &[u32]) -> f64 {
        (0..self.n_products())
            .map(|i| {
                let z = xi[i] as f64;
                -x[i] * z + self.cost(i, z)
            })
            .sum()
    }

    /// Expected negative profit at `x`. Each count is marginally
    /// `Binomial(m_buyer, p_i(x))`, so the expectation is a finite sum per
    /// product.
    pub fn expected_negative_profit(&self, x: &[f64]) -> f64 {
        let probs = mnl_choice_probs(x, self);
        let m = self.m_buyer;
        (0..self.n_products())
            .map(|i| {
                let p = probs[i + 1];
                let revenue = x[i] * m as f64 * p;
                let cost: f64 = binomial_pmf(m, p)
                    .into_iter()
                    .enumerate()
                    .map(|(z, w)| w * self.cost(i, z as f64))
                    .sum();
                cost - revenue
            })
            .sum()
    }
}

/// `P(Z = z)` for `Z ~ Binomial(m, p)`, `z = 0..=m`, via log-space terms.
fn binomial_pmf(m: usize, p: f64) -> Vec<f64> {
    if p <= 0.0 {
        let mut v = vec![0.0; m + 1];
        v[0] = 1.0;
        return v;
    }
    if p >= 1.0 {
        let mut v = vec![0.0; m + 1];
        v[m] = 1.0;
        return v;
    }
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    let mut log_choose = 0.0;
    (0..=m)
        .map(|z| {
            if z > 0 {
                log_choose += ((m - z + 1) as f64).ln() - (z as f64).ln();
            }
            (log_choose + z as f64 * lp + (m - z) as f64 * lq).exp()
        })
        .collect()
}

/// Choice probabilities at prices `x`: index 0 is no purchase, index `i`
/// is product `i`. Computed with a max-shift so large exponents stay finite.
pub fn mnl_choice_probs(x: &[f64], inst: &PricingInstance) -> Vec<f64> {
    let n = inst.n_products();
    debug_assert_eq!(x.len(), n);
    let mut logits = Vec::with_capacity(n + 1);
    logits.push(inst.a0.ln());
    logits.extend((0..n).map(|i| inst.sensitivity[i] * (inst.theta[i] - x[i])));
    let shift = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = logits.iter().map(|v| (v - shift).exp()).collect();
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    probs
}

/// Demand counts from `m_buyer` independent categorical choices.
pub fn sample_demand(probs: &[f64], m_buyer: usize, rng: &mut RandomSource) -> Vec<u32> {
    let mut cumulative = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for p in probs {
        acc += p;
        cumulative.push(acc);
    }
    let n = probs.len() - 1;
    let mut counts = vec![0u32; n];
    for _ in 0..m_buyer {
        let u = rng.uniform() * acc;
        let k = cumulative.partition_point(|c| *c <= u).min(probs.len() - 1);
        if k > 0 {
            counts[k - 1] += 1;
        }
    }
    counts
}

#[derive(Debug, Clone)]
pub struct PricingSampler {
    instance: Arc<PricingInstance>,
}

impl Sampler for PricingSampler {
    fn dim(&self) -> usize {
        self.instance.n_products()
    }

    fn draw(&self, x: &[f64], rng: &mut RandomSource) -> f64 {
        let probs = mnl_choice_probs(x, &self.instance);
        let xi = sample_demand(&probs, self.instance.m_buyer, rng);
        self.instance.negative_profit(x, &xi)
    }
}

pub fn pricing_oracle(instance: Arc<PricingInstance>) -> StochasticOracle {
    StochasticOracle::new(PricingSampler { instance })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_cost_instance() -> PricingInstance {
        // theta = 0.5, rho = 2 gives w = 1 with n = 30, m = 120 thresholds (2, 6).
        PricingInstance::new(vec![0.5; 30], vec![2.0; 30], 120).unwrap()
    }

    #[test]
    fn constants_follow_the_model() {
        let inst = PricingInstance::synthetic(DEFAULT_PRODUCTS, DEFAULT_BUYERS, 1).unwrap();
        assert_eq!(inst.a0, 3.0);
        assert_eq!(inst.lower, 2.0);
        assert_eq!(inst.upper, 6.0);
        for i in 0..30 {
            assert!((0.1..=0.9).contains(&inst.theta[i]));
            assert!((0.25..=0.5).contains(&inst.rho[i]));
            assert!((inst.sensitivity[i] * 6f64.sqrt() * inst.theta[i] - 2.0 * std::f64::consts::PI).abs() < 1e-12);
        }
    }

    #[test]
    fn piecewise_cost() {
        let inst = unit_cost_instance();
        assert_eq!(inst.cost(0, 0.0), 0.0);
        assert_eq!(inst.cost(0, 2.0), 4.0);
        assert_eq!(inst.cost(0, 6.0), 8.0);
        assert_eq!(inst.cost(0, 8.0), 14.0);
    }

    #[test]
    fn probabilities_at_reference_prices() {
        let inst = PricingInstance::synthetic(30, 120, 4).unwrap();
        let p = mnl_choice_probs(&inst.theta, &inst);
        assert!((p[0] - 1.0 / 11.0).abs() < 1e-15);
        for pi in &p[1..] {
            assert!((pi - 1.0 / 33.0).abs() < 1e-15);
        }
    }

    #[test]
    fn probabilities_normalize_and_limit() {
        let inst = PricingInstance::synthetic(30, 120, 4).unwrap();
        let mut rng = make_rng(0);
        for _ in 0..200 {
            let x: Vec<f64> = (0..30).map(|_| rng.uniform_range(-50.0, 50.0)).collect();
            let p = mnl_choice_probs(&x, &inst);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(p.iter().all(|v| v.is_finite() && *v >= 0.0));
        }
        let p = mnl_choice_probs(&[1e6; 30], &inst);
        assert!((p[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cheaper_product_gains_share() {
        let inst = PricingInstance::synthetic(30, 120, 8).unwrap();
        let x = vec![0.5; 30];
        let base = mnl_choice_probs(&x, &inst);
        let mut cheaper = x.clone();
        cheaper[7] -= 0.1;
        assert!(mnl_choice_probs(&cheaper, &inst)[8] > base[8]);
    }

    #[test]
    fn prohibitive_prices_give_zero() {
        let inst = Arc::new(PricingInstance::synthetic(30, 120, 2).unwrap());
        let mut o = pricing_oracle(inst);
        let mut rng = make_rng(3);
        for _ in 0..100 {
            assert_eq!(o.sample(&[100.0; 30], &mut rng).unwrap(), 0.0);
        }
    }

    #[test]
    fn demand_counts_bounded() {
        let inst = PricingInstance::synthetic(30, 120, 2).unwrap();
        let probs = mnl_choice_probs(&[0.3; 30], &inst);
        let mut rng = make_rng(1);
        for _ in 0..100 {
            let xi = sample_demand(&probs, 120, &mut rng);
            assert!(xi.iter().sum::<u32>() <= 120);
        }
    }

    #[test]
    fn binomial_pmf_normalizes() {
        for p in [0.0, 1e-6, 0.01, 0.3, 0.99, 1.0] {
            let pmf = binomial_pmf(120, p);
            assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let mean: f64 = pmf.iter().enumerate().map(|(z, w)| z as f64 * w).sum();
            assert!((mean - 120.0 * p).abs() < 1e-9);
        }
    }

    #[test]
    fn expectation_at_prohibitive_prices_is_zero() {
        let inst = PricingInstance::synthetic(30, 120, 2).unwrap();
        assert!(inst.expected_negative_profit(&[100.0; 30]).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(PricingInstance::new(vec![1.5], vec![0.3], 10).is_err());
        assert!(PricingInstance::new(vec![0.5], vec![0.3, 0.3], 10).is_err());
        assert!(PricingInstance::new(vec![0.5], vec![0.3], 0).is_err());
    }
}
