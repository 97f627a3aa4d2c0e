//! Running moments for test-side Monte-Carlo checks.

#![allow(dead_code)]

#[derive(Debug, Clone, Default)]
pub struct Running {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Running {
    pub fn push(&mut self, v: f64) {
        self.n += 1;
        let d = v - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (v - self.mean);
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        (self.variance() / self.n as f64).sqrt()
    }
}

/// One running accumulator per coordinate.
#[derive(Debug, Clone)]
pub struct RunningVec(pub Vec<Running>);

impl RunningVec {
    pub fn new(d: usize) -> Self {
        Self(vec![Running::default(); d])
    }

    pub fn push(&mut self, v: &[f64]) {
        self.0.iter_mut().zip(v).for_each(|(r, x)| r.push(*x));
    }

    /// Largest `|mean_i - target_i| / se_i`; exact agreement counts as zero.
    pub fn max_z(&self, target: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(target)
            .map(|(r, t)| {
                let gap = (r.mean() - t).abs();
                if gap == 0.0 {
                    0.0
                } else {
                    gap / r.std_error()
                }
            })
            .fold(0.0, f64::max)
    }
}
