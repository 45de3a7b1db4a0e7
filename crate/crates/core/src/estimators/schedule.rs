use crate::error::{Error, Result};
use crate::sde::DeltaFunction;
use crate::util::ceil_count;

/// Level parameters `n_l = ⌈β^l⌉`, `M_l = ⌈δ^{-1}(β^{-α(l+1)})⌉` and
/// `h_l = T β^{-l}`.
#[derive(Clone, Debug)]
pub struct LevelSchedule {
    beta: f64,
    alpha: f64,
    delta: DeltaFunction,
    horizon: f64,
}

impl LevelSchedule {
    pub fn new(beta: f64, alpha: f64, delta: DeltaFunction, horizon: f64) -> Result<Self> {
        if !(beta > 1.0 && beta.is_finite()) {
            return Err(Error::invalid("beta", format!("must be greater than 1, got {beta}")));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::invalid("alpha", format!("must be positive, got {alpha}")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::invalid("T", format!("must be positive, got {horizon}")));
        }
        Ok(Self { beta, alpha, delta, horizon })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn delta(&self) -> &DeltaFunction {
        &self.delta
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn grid_density(&self, level: usize) -> usize {
        ceil_count(self.beta.powi(level as i32)).max(1.0) as usize
    }

    /// Accuracy target `β^{-α(l+1)}` of the truncation at level `l`.
    pub fn truncation_target(&self, level: usize) -> f64 {
        self.beta.powf(-self.alpha * (level as f64 + 1.0))
    }

    pub fn truncation_dim(&self, level: usize) -> Result<usize> {
        self.delta.truncation_dimension(self.truncation_target(level))
    }

    pub fn step(&self, level: usize) -> f64 {
        self.horizon * self.beta.powi(-(level as i32))
    }

    /// `(M_l, n_l)`.
    pub fn params(&self, level: usize) -> Result<(usize, usize)> {
        Ok((self.truncation_dim(level)?, self.grid_density(level)))
    }
}
