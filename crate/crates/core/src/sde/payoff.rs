use std::fmt;
use std::sync::Arc;

type PayoffFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Payoff `f: R^d → R`.
#[derive(Clone)]
pub struct Payoff {
    f: PayoffFn,
    lipschitz: f64,
}

impl fmt::Debug for Payoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Payoff").field("lipschitz", &self.lipschitz).finish_non_exhaustive()
    }
}

impl Payoff {
    pub fn new(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static, lipschitz: f64) -> Self {
        Self { f: Arc::new(f), lipschitz }
    }

    /// `max(x_1 - strike, 0)`.
    pub fn call(strike: f64) -> Self {
        Self::new(move |x| (x[0] - strike).max(0.0), 1.0)
    }

    /// First coordinate of the state.
    pub fn identity() -> Self {
        Self::new(|x| x[0], 1.0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
}
