//! Exact-arithmetic re-derivation of the closed-form schedules.
//!
//! Irrational factors (`sqrt(2 pi)`, `sqrt(d)`, square roots of moment
//! constants) are carried as rational enclosures `[lo, hi]` several dozen
//! digits wide; ceilings are exact whenever both ends round to the same
//! integer.

#![allow(dead_code)]

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// pi to 50 digits, enclosed by +-1e-50.
const PI_DIGITS: &str = "314159265358979323846264338327950288419716939937510";
const PI_SCALE_EXP: u32 = 50;

/// Decimal digits used for square-root enclosures.
const SQRT_DIGITS: u32 = 60;

pub fn rat(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite")
}

pub fn int(v: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

fn pow10(e: u32) -> BigInt {
    BigInt::from(10u32).pow(e)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Interval {
    pub lo: BigRational,
    pub hi: BigRational,
}

impl Interval {
    pub fn exact(v: BigRational) -> Self {
        Self { lo: v.clone(), hi: v }
    }

    pub fn pi() -> Self {
        let scale = pow10(PI_SCALE_EXP);
        let p: BigInt = PI_DIGITS.parse().unwrap();
        Self {
            lo: BigRational::new(p.clone() - 1, scale.clone()),
            hi: BigRational::new(p + 1, scale),
        }
    }

    /// Enclosure of `sqrt` of a non-negative interval.
    pub fn sqrt(&self) -> Self {
        assert!(!self.lo.is_negative());
        if self.lo == self.hi {
            if let Some(r) = exact_sqrt(&self.lo) {
                return Self::exact(r);
            }
        }
        Self {
            lo: sqrt_floor(&self.lo),
            hi: sqrt_ceil(&self.hi),
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        Self {
            lo: &self.lo + &o.lo,
            hi: &self.hi + &o.hi,
        }
    }

    /// Product of non-negative intervals.
    pub fn mul(&self, o: &Self) -> Self {
        assert!(!self.lo.is_negative() && !o.lo.is_negative());
        Self {
            lo: &self.lo * &o.lo,
            hi: &self.hi * &o.hi,
        }
    }

    pub fn scale(&self, k: &BigRational) -> Self {
        assert!(!k.is_negative());
        Self {
            lo: &self.lo * k,
            hi: &self.hi * k,
        }
    }

    /// `1 / self` for a strictly positive interval.
    pub fn recip(&self) -> Self {
        assert!(self.lo.is_positive());
        Self {
            lo: self.hi.recip(),
            hi: self.lo.recip(),
        }
    }

    /// Ceiling when it is determined by the enclosure.
    pub fn ceil(&self) -> Option<BigInt> {
        let a = ceil_rat(&self.lo);
        let b = ceil_rat(&self.hi);
        (a == b).then_some(a)
    }

    pub fn contains_f64(&self, v: f64, rel_tol: f64) -> bool {
        let x = rat(v);
        let slack = rat(rel_tol) * self.hi.abs();
        x >= &self.lo - &slack && x <= &self.hi + &slack
    }
}

pub fn ceil_rat(q: &BigRational) -> BigInt {
    let (n, d) = (q.numer(), q.denom());
    n.div_ceil(d)
}

/// Square root of a rational that is a perfect square.
fn exact_sqrt(q: &BigRational) -> Option<BigRational> {
    let (n, d) = (q.numer().sqrt(), q.denom().sqrt());
    (&n * &n == *q.numer() && &d * &d == *q.denom()).then(|| BigRational::new(n, d))
}

fn sqrt_floor(q: &BigRational) -> BigRational {
    let s = pow10(SQRT_DIGITS);
    let scaled = (q.numer() * &s * &s) / q.denom();
    BigRational::new(scaled.sqrt(), s)
}

fn sqrt_ceil(q: &BigRational) -> BigRational {
    let s = pow10(SQRT_DIGITS);
    let scaled = (q.numer() * &s * &s).div_ceil(q.denom());
    let r = scaled.sqrt();
    let r = if &r * &r == scaled { r } else { r + 1 };
    BigRational::new(r, s)
}

/// `sqrt(2 pi)` enclosure.
pub fn sqrt_two_pi() -> Interval {
    Interval::pi().scale(&int(2)).sqrt()
}

/// Problem and accuracy inputs for one schedule evaluation.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub d: u64,
    pub lipschitz: f64,
    pub sigma: f64,
    pub gap: f64,
    pub delta: f64,
    pub eps: f64,
}

/// Exact O2NC schedule pieces.
#[derive(Debug, Clone)]
pub struct ExactO2nc {
    pub g_squared: Interval,
    pub block_len: Option<BigInt>,
    pub n_blocks: BigInt,
    /// `eta^2 = D^2 / (G^2 M)` given the exact `M`.
    pub step_squared: Option<Interval>,
}

/// `residual = false`: `G^2 = d^2 s^2 / (2 delta^2) + 16 sqrt(2 pi) d L^2`.
/// `residual = true`: `G^2 = 6 d^2 s^2 / delta^2 + 385 d^2 L^2`.
pub fn o2nc_exact(p: &Inputs, residual: bool) -> ExactO2nc {
    o2nc_exact_delta(p, residual, rat(p.delta))
}

/// Same as [`o2nc_exact`] at an exact rational radius.
pub fn o2nc_exact_delta(p: &Inputs, residual: bool, delta: BigRational) -> ExactO2nc {
    o2nc_core(p, residual, &delta * &delta, Interval::exact(delta.recip()))
}

/// Same as [`o2nc_exact`] with the smoothing radius given by its exact
/// square, for radii defined as square roots.
pub fn o2nc_exact_sq(p: &Inputs, residual: bool, delta_sq: BigRational) -> ExactO2nc {
    let inv_delta = Interval::exact(delta_sq.recip()).sqrt();
    o2nc_core(p, residual, delta_sq, inv_delta)
}

fn o2nc_core(p: &Inputs, residual: bool, delta_sq: BigRational, inv_delta: Interval) -> ExactO2nc {
    let d = int(p.d);
    let (l, s, gap, eps) = (rat(p.lipschitz), rat(p.sigma), rat(p.gap), rat(p.eps));
    let noise = &d * &d * &s * &s / &delta_sq;
    let g2 = if residual {
        Interval::exact(int(6) * noise + int(385) * &d * &d * &l * &l)
    } else {
        let lip = sqrt_two_pi().scale(&(int(16) * &d * &l * &l));
        Interval::exact(noise / int(2)).add(&lip)
    };
    let m_arg = g2.scale(&(int(16) / (&eps * &eps)));
    let block_len = m_arg.ceil().map(|m| if m.is_zero() { BigInt::one() } else { m });
    let k_arg = inv_delta.scale(&(int(2) * &gap / &eps)).add(&Interval::exact(int(2) * &l / &eps));
    let n_blocks = k_arg.ceil().expect("enclosure decides the ceiling");
    let n_blocks = if n_blocks.is_zero() { BigInt::one() } else { n_blocks };
    let step_squared = block_len.as_ref().map(|m| {
        let m = BigRational::from_integer(m.clone());
        g2.scale(&(&m * &m * &m)).recip().scale(&delta_sq)
    });
    ExactO2nc {
        g_squared: g2,
        block_len,
        n_blocks,
        step_squared,
    }
}

/// Exact SGD schedule pieces with smoothness constant `c`.
#[derive(Debug, Clone)]
pub struct ExactSgd {
    pub variance: Interval,
    pub smoothness: Interval,
    pub batch: Option<BigInt>,
    pub iterations: Option<BigInt>,
}

pub fn sgd_exact(p: &Inputs, c: f64) -> ExactSgd {
    let d = int(p.d);
    let (l, s, gap, delta, eps) = (rat(p.lipschitz), rat(p.sigma), rat(p.gap), rat(p.delta), rat(p.eps));
    let variance = Interval::exact(&d * &d * &s * &s / (int(2) * &delta * &delta))
        .add(&sqrt_two_pi().scale(&(int(16) * &d * &l * &l)));
    let smoothness = Interval::exact(d).sqrt().scale(&(rat(c) * &l / &delta));
    let eps2 = &eps * &eps;
    let batch = variance.scale(&(int(2) / &eps2)).ceil();
    let iterations = smoothness.scale(&(int(4) * (&gap + &delta * &l) / &eps2)).ceil();
    let one = |v: Option<BigInt>| v.map(|v| if v.is_zero() { BigInt::one() } else { v });
    ExactSgd {
        variance,
        smoothness,
        batch: one(batch),
        iterations: one(iterations),
    }
}

/// True when `v` is the double nearest to `q` (ties either way).
pub fn is_correctly_rounded(v: f64, q: &BigRational) -> bool {
    let err = (rat(v) - q).abs();
    [next_down(v), next_up(v)].iter().all(|&n| (rat(n) - q).abs() >= err)
}

/// True when `v` is the double nearest to `sqrt(q)`: `sqrt(q)` lies between
/// the midpoints to `v`'s neighbours.
pub fn is_correctly_rounded_sqrt(v: f64, q: &BigRational) -> bool {
    let lo = (rat(next_down(v)) + rat(v)) / int(2);
    let hi = (rat(next_up(v)) + rat(v)) / int(2);
    &lo * &lo <= *q && *q <= &hi * &hi
}

fn next_up(v: f64) -> f64 {
    assert!(v.is_finite() && v > 0.0);
    f64::from_bits(v.to_bits() + 1)
}

fn next_down(v: f64) -> f64 {
    assert!(v.is_finite() && v > 0.0);
    f64::from_bits(v.to_bits() - 1)
}

pub fn to_u64(v: &BigInt) -> u64 {
    v.to_u64().expect("fits in u64")
}

/// Random dyadic rational `k / 2^e` with `k` in `1..=kmax`.
pub fn dyadic(rng: &mut impl FnMut() -> u64, kmax: u64, e: i32) -> f64 {
    let k = rng() % kmax + 1;
    k as f64 * 2f64.powi(-e)
}

#[cfg(test)]
mod self_checks {
    #[test]
    fn sqrt_two_pi_encloses_f64_value() {
        use super::*;
        let iv = sqrt_two_pi();
        assert!(iv.contains_f64((2.0 * std::f64::consts::PI).sqrt(), 1e-15));
        assert!(&iv.hi - &iv.lo < BigRational::new(BigInt::one(), pow10(40)));
    }
}
