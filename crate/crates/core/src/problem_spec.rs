use crate::error::{invalid, Result};

/// Known problem constants consumed by the parameter schedules.
///
/// `gap` is `f(x0) - f*`. None of these are estimated online; callers
/// supply them (or an estimate) up front.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub dimension: usize,
    pub lipschitz: f64,
    pub noise_bound: f64,
    pub gap: f64,
    pub grad_lipschitz: Option<f64>,
    pub hess_lipschitz: Option<f64>,
    /// Constant `c` in the `c * sqrt(d) * L / delta` smoothness of `f_delta`.
    pub smoothing_constant: f64,
}

impl ProblemSpec {
    pub fn new(dimension: usize, lipschitz: f64, noise_bound: f64, gap: f64) -> Result<Self> {
        let spec = Self {
            dimension,
            lipschitz,
            noise_bound,
            gap,
            grad_lipschitz: None,
            hess_lipschitz: None,
            smoothing_constant: 1.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_grad_lipschitz(mut self, lg: f64) -> Result<Self> {
        self.grad_lipschitz = Some(lg);
        self.validate()?;
        Ok(self)
    }

    pub fn with_hess_lipschitz(mut self, lh: f64) -> Result<Self> {
        self.hess_lipschitz = Some(lh);
        self.validate()?;
        Ok(self)
    }

    pub fn with_smoothing_constant(mut self, c: f64) -> Result<Self> {
        self.smoothing_constant = c;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension < 1 {
            return Err(invalid("dimension", "must be >= 1"));
        }
        if !(self.lipschitz > 0.0 && self.lipschitz.is_finite()) {
            return Err(invalid("lipschitz", format!("must be > 0, got {}", self.lipschitz)));
        }
        if !(self.noise_bound >= 0.0 && self.noise_bound.is_finite()) {
            return Err(invalid("noise_bound", format!("must be >= 0, got {}", self.noise_bound)));
        }
        if !(self.gap >= 0.0 && self.gap.is_finite()) {
            return Err(invalid("gap", format!("must be >= 0, got {}", self.gap)));
        }
        if let Some(lg) = self.grad_lipschitz {
            if !(lg > 0.0 && lg.is_finite()) {
                return Err(invalid("grad_lipschitz", format!("must be > 0, got {lg}")));
            }
        }
        if let Some(lh) = self.hess_lipschitz {
            if !(lh > 0.0 && lh.is_finite()) {
                return Err(invalid("hess_lipschitz", format!("must be > 0, got {lh}")));
            }
        }
        if !(self.smoothing_constant > 0.0 && self.smoothing_constant.is_finite()) {
            return Err(invalid("smoothing_constant", "must be > 0"));
        }
        Ok(())
    }
}
