use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::util::ceil_count;

/// Which closed form a [`DeltaFunction`] uses.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DeltaFamily {
    /// `δ(k) = c·k^{-γ}`
    PowerLaw { c: f64, gamma: f64 },
    /// `δ(k) = c / ln(1 + k)`
    LogDecay { c: f64 },
    Custom,
}

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Positive, strictly decreasing `δ` on `[1, ∞)` with `δ(k) → 0`, together
/// with its inverse on `(0, δ(1)]`.
///
/// `δ` bounds the ℓ² tail of the diffusion series beyond the first `k`
/// blocks, so `δ^{-1}(ε)` is the truncation dimension that keeps that tail
/// below `ε`.
#[derive(Clone)]
pub struct DeltaFunction {
    family: DeltaFamily,
    custom: Option<(RealFn, RealFn)>,
}

impl fmt::Debug for DeltaFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DeltaFunction").field("family", &self.family).finish()
    }
}

impl DeltaFunction {
    pub fn power_law(c: f64, gamma: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::invalid("c", format!("must be positive, got {c}")));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::invalid("gamma", format!("must be positive, got {gamma}")));
        }
        Ok(Self { family: DeltaFamily::PowerLaw { c, gamma }, custom: None })
    }

    pub fn log_decay(c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::invalid("c", format!("must be positive, got {c}")));
        }
        Ok(Self { family: DeltaFamily::LogDecay { c }, custom: None })
    }

    /// User-supplied pair. Monotonicity and the inverse relation are the
    /// caller's responsibility; only `δ(1) > 0` is checked.
    pub fn custom(
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
        inverse: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let at_one = eval(1.0);
        if !(at_one > 0.0 && at_one.is_finite()) {
            return Err(Error::invalid("delta", format!("δ(1) must be positive, got {at_one}")));
        }
        Ok(Self { family: DeltaFamily::Custom, custom: Some((Arc::new(eval), Arc::new(inverse))) })
    }

    pub fn family(&self) -> DeltaFamily {
        self.family
    }

    /// `δ(k)` for real `k ≥ 1`.
    pub fn eval(&self, k: f64) -> f64 {
        match (&self.family, &self.custom) {
            (DeltaFamily::PowerLaw { c, gamma }, _) => c * k.powf(-gamma),
            (DeltaFamily::LogDecay { c }, _) => c / k.ln_1p(),
            (DeltaFamily::Custom, Some((eval, _))) => eval(k),
            (DeltaFamily::Custom, None) => unreachable!("custom delta without closures"),
        }
    }

    pub fn at_one(&self) -> f64 {
        self.eval(1.0)
    }

    /// `δ^{-1}(y)` for `y ∈ (0, δ(1)]`.
    pub fn inverse(&self, y: f64) -> Result<f64> {
        let top = self.at_one();
        if !(y > 0.0) || y > top {
            return Err(Error::invalid("y", format!("δ^-1 is defined on (0, {top}], got {y}")));
        }
        Ok(match (&self.family, &self.custom) {
            (DeltaFamily::PowerLaw { c, gamma }, _) => (c / y).powf(1.0 / gamma),
            (DeltaFamily::LogDecay { c }, _) => (c / y).exp_m1(),
            (DeltaFamily::Custom, Some((_, inverse))) => inverse(y),
            (DeltaFamily::Custom, None) => unreachable!("custom delta without closures"),
        })
    }

    /// `⌈δ^{-1}(y)⌉`, the smallest truncation dimension whose tail bound is at
    /// most `y`. Targets at or above `δ(1)` are met by a single coordinate.
    pub fn truncation_dimension(&self, y: f64) -> Result<usize> {
        if !(y > 0.0) {
            return Err(Error::invalid("eps", format!("accuracy target must be positive, got {y}")));
        }
        if y >= self.at_one() {
            return Ok(1);
        }
        let m = ceil_count(self.inverse(y)?);
        if !m.is_finite() || m > (1u64 << 52) as f64 {
            return Err(Error::invalid("eps", format!("truncation dimension for target {y} is not representable ({m})")));
        }
        Ok((m as usize).max(1))
    }
}
