use rand::Rng;
use rand_distr::StandardNormal;

use super::{DeltaFunction, SdeProblem};
use crate::error::{Error, Result};
use crate::noise::Stream;

/// Scalar Merton-type model driven by infinitely many Wiener coordinates:
///
/// ```text
/// dX = μX dt + Σ_j (σ / j^α) X dW_j + X(t-) dL(t),  X(0) = η0
/// ```
///
/// where `L` is compound Poisson with intensity `λ` and marks
/// `ξ = -0.5` if `Y ≤ 0`, `ξ = 0.5 + Y` otherwise, `Y ~ N(0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MertonSpec {
    pub mu: f64,
    pub sigma: f64,
    pub alpha_series: f64,
    pub lambda: f64,
    pub eta0: f64,
    pub horizon: f64,
}

impl Default for MertonSpec {
    fn default() -> Self {
        Self { mu: 0.08, sigma: 0.4, alpha_series: 1.0, lambda: 1.0, eta0: 1.0, horizon: 1.0 }
    }
}

impl MertonSpec {
    /// `σ = 0` is accepted so that deterministic limits can be simulated.
    pub fn validate(&self) -> Result<()> {
        if !self.mu.is_finite() {
            return Err(Error::invalid("mu", format!("must be finite, got {}", self.mu)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid("sigma", format!("must be non-negative, got {}", self.sigma)));
        }
        if !(self.alpha_series >= 1.0 && self.alpha_series.is_finite()) {
            return Err(Error::invalid("alpha_series", format!("must be at least 1, got {}", self.alpha_series)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid("lambda", format!("must be finite and non-negative, got {}", self.lambda)));
        }
        if !(self.eta0 > 0.0 && self.eta0.is_finite()) {
            return Err(Error::invalid("eta0", format!("must be positive, got {}", self.eta0)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::invalid("T", format!("must be positive, got {}", self.horizon)));
        }
        Ok(())
    }

    /// `σ / j^α`, the scale of block `j ≥ 1`.
    pub fn block_scale(&self, j: usize) -> f64 {
        if self.alpha_series == 1.0 {
            self.sigma / j as f64
        } else {
            self.sigma * (j as f64).powf(-self.alpha_series)
        }
    }

    /// Tail bound `δ(k) = σ k^{-(α - 1/2)} / √(2α - 1)`, which dominates
    /// `σ (Σ_{j>k} j^{-2α})^{1/2}` by the integral test.
    pub fn delta(&self) -> Result<DeltaFunction> {
        if !(self.alpha_series > 0.5) {
            return Err(Error::invalid("alpha_series", format!("tail bound needs alpha > 1/2, got {}", self.alpha_series)));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::invalid("sigma", "tail bound needs sigma > 0"));
        }
        let two_alpha = 2.0 * self.alpha_series - 1.0;
        DeltaFunction::power_law(self.sigma / two_alpha.sqrt(), self.alpha_series - 0.5)
    }
}

#[derive(Clone, Debug)]
pub struct MertonProblem {
    spec: MertonSpec,
}

impl MertonProblem {
    pub fn new(spec: MertonSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self { spec })
    }

    pub fn spec(&self) -> &MertonSpec {
        &self.spec
    }
}

/// One Merton jump mark.
pub fn sample_merton_mark(stream: &mut Stream) -> f64 {
    let y: f64 = stream.sample(StandardNormal);
    if y <= 0.0 {
        -0.5
    } else {
        0.5 + y
    }
}

impl SdeProblem for MertonProblem {
    fn dim(&self) -> usize {
        1
    }

    fn mark_dim(&self) -> usize {
        1
    }

    fn horizon(&self) -> f64 {
        self.spec.horizon
    }

    fn intensity(&self) -> f64 {
        self.spec.lambda
    }

    fn drift(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        out[0] = self.spec.mu * x[0];
    }

    fn diffusion_block(&self, _t: f64, x: &[f64], j: usize, out: &mut [f64]) {
        out[0] = self.spec.block_scale(j) * x[0];
    }

    fn diffusion(&self, _t: f64, x: &[f64], dw: &[f64], out: &mut [f64]) {
        let mut acc = 0.0;
        for (k, w) in dw.iter().enumerate() {
            acc += self.spec.block_scale(k + 1) * w;
        }
        out[0] = x[0] * acc;
    }

    fn jump(&self, _t: f64, x: &[f64], mark: &[f64], out: &mut [f64]) {
        out[0] = x[0] * mark[0];
    }

    fn sample_initial(&self, _stream: &mut Stream, out: &mut [f64]) {
        out[0] = self.spec.eta0;
    }

    fn sample_mark(&self, stream: &mut Stream, out: &mut [f64]) {
        out[0] = sample_merton_mark(stream);
    }
}

/// Closed-form `X_M(T)` using the first `M = wiener_terminal.len()`
/// coordinates `W_j(T)` and the realized marks.
pub fn merton_exact_terminal(spec: &MertonSpec, wiener_terminal: &[f64], marks: &[f64]) -> f64 {
    let mut variance = 0.0;
    let mut noise = 0.0;
    for (k, w) in wiener_terminal.iter().enumerate() {
        let s = spec.block_scale(k + 1);
        variance += s * s;
        noise += s * w;
    }
    let jumps: f64 = marks.iter().map(|xi| 1.0 + xi).product();
    spec.eta0 * ((spec.mu - 0.5 * variance) * spec.horizon + noise).exp() * jumps
}
