//! Problem descriptions: coefficients, truncation function, payoffs.

mod delta;
mod merton;
mod payoff;

pub use delta::{DeltaFamily, DeltaFunction};
pub use merton::{merton_exact_terminal, sample_merton_mark, MertonProblem, MertonSpec};
pub use payoff::Payoff;

use crate::error::{Error, Result};
use crate::noise::Stream;

/// Coefficients `(a, b, c, η)` and the jump measure of
///
/// ```text
/// dX(t) = a(t, X(t)) dt + Σ_j b^(j)(t, X(t)) dW_j(t) + ∫ c(t, X(t-), y) N(dy, dt),  X(0) = η
/// ```
///
/// with a finite jump intensity `λ = ν(E)`. Implementations must be pure:
/// every evaluation depends only on its arguments.
pub trait SdeProblem: Send + Sync {
    fn dim(&self) -> usize;

    fn mark_dim(&self) -> usize;

    fn horizon(&self) -> f64;

    /// Total mass `λ` of the jump measure.
    fn intensity(&self) -> f64;

    fn drift(&self, t: f64, x: &[f64], out: &mut [f64]);

    /// The block `b^(j)(t, x)`, with `j` counted from 1.
    fn diffusion_block(&self, t: f64, x: &[f64], j: usize, out: &mut [f64]);

    /// `Σ_{k=1}^{M} b^(k)(t, x) dw[k-1]` with `M = dw.len()`.
    fn diffusion(&self, t: f64, x: &[f64], dw: &[f64], out: &mut [f64]) {
        let d = out.len();
        let mut stack = [0.0; 8];
        let mut heap = Vec::new();
        let block: &mut [f64] = if d <= stack.len() {
            &mut stack[..d]
        } else {
            heap.resize(d, 0.0);
            &mut heap
        };
        out.fill(0.0);
        for (k, &w) in dw.iter().enumerate() {
            self.diffusion_block(t, x, k + 1, block);
            for (o, b) in out.iter_mut().zip(block.iter()) {
                *o += b * w;
            }
        }
    }

    fn jump(&self, t: f64, x: &[f64], mark: &[f64], out: &mut [f64]);

    fn sample_initial(&self, stream: &mut Stream, out: &mut [f64]);

    /// Draws one mark from the normalized jump measure `ν / λ`.
    fn sample_mark(&self, stream: &mut Stream, out: &mut [f64]);
}

type Coefficient = Box<dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync>;
type BlockCoefficient = Box<dyn Fn(f64, &[f64], usize, &mut [f64]) + Send + Sync>;
type JumpCoefficient = Box<dyn Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync>;
type Sampler = Box<dyn Fn(&mut Stream, &mut [f64]) + Send + Sync>;

/// A problem assembled from closures.
///
/// Every coefficient starts out as zero, the initial value as the origin and
/// the marks as zero vectors; the `with_*` methods replace them.
pub struct FnProblem {
    dim: usize,
    mark_dim: usize,
    horizon: f64,
    intensity: f64,
    /// Lipschitz constant of the coefficients. Informational only.
    pub lipschitz: Option<f64>,
    drift: Coefficient,
    diffusion: BlockCoefficient,
    jump: JumpCoefficient,
    initial: Sampler,
    mark: Sampler,
}

impl FnProblem {
    pub fn new(dim: usize, mark_dim: usize, horizon: f64, intensity: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("d", "state dimension must be at least 1"));
        }
        if mark_dim == 0 {
            return Err(Error::invalid("d'", "mark dimension must be at least 1"));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::invalid("T", format!("horizon must be positive, got {horizon}")));
        }
        if !(intensity >= 0.0 && intensity.is_finite()) {
            return Err(Error::invalid("lambda", format!("jump intensity must be finite and non-negative, got {intensity}")));
        }
        Ok(Self {
            dim,
            mark_dim,
            horizon,
            intensity,
            lipschitz: None,
            drift: Box::new(|_, _, out| out.fill(0.0)),
            diffusion: Box::new(|_, _, _, out| out.fill(0.0)),
            jump: Box::new(|_, _, _, out| out.fill(0.0)),
            initial: Box::new(|_, out| out.fill(0.0)),
            mark: Box::new(|_, out| out.fill(0.0)),
        })
    }

    pub fn with_drift(mut self, f: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.drift = Box::new(f);
        self
    }

    pub fn with_diffusion_block(mut self, f: impl Fn(f64, &[f64], usize, &mut [f64]) + Send + Sync + 'static) -> Self {
        self.diffusion = Box::new(f);
        self
    }

    pub fn with_jump(mut self, f: impl Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.jump = Box::new(f);
        self
    }

    pub fn with_initial(mut self, f: impl Fn(&mut Stream, &mut [f64]) + Send + Sync + 'static) -> Self {
        self.initial = Box::new(f);
        self
    }

    pub fn with_initial_value(self, x0: Vec<f64>) -> Self {
        self.with_initial(move |_, out| out.copy_from_slice(&x0))
    }

    pub fn with_mark(mut self, f: impl Fn(&mut Stream, &mut [f64]) + Send + Sync + 'static) -> Self {
        self.mark = Box::new(f);
        self
    }
}

impl SdeProblem for FnProblem {
    fn dim(&self) -> usize {
        self.dim
    }

    fn mark_dim(&self) -> usize {
        self.mark_dim
    }

    fn horizon(&self) -> f64 {
        self.horizon
    }

    fn intensity(&self) -> f64 {
        self.intensity
    }

    fn drift(&self, t: f64, x: &[f64], out: &mut [f64]) {
        (self.drift)(t, x, out)
    }

    fn diffusion_block(&self, t: f64, x: &[f64], j: usize, out: &mut [f64]) {
        (self.diffusion)(t, x, j, out)
    }

    fn jump(&self, t: f64, x: &[f64], mark: &[f64], out: &mut [f64]) {
        (self.jump)(t, x, mark, out)
    }

    fn sample_initial(&self, stream: &mut Stream, out: &mut [f64]) {
        (self.initial)(stream, out)
    }

    fn sample_mark(&self, stream: &mut Stream, out: &mut [f64]) {
        (self.mark)(stream, out)
    }
}
