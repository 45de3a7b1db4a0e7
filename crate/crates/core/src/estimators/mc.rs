use super::sampling::{extend, path_sample};
use super::{EstimateReport, LevelStats};
use crate::error::{Error, Result};
use crate::sde::{DeltaFunction, Payoff, SdeProblem};
use crate::util::ceil_count;

/// Sample count, grid density and truncation dimension of the standard
/// estimator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct McParams {
    pub samples: u64,
    pub grid_density: usize,
    pub truncation_dim: usize,
}

impl McParams {
    /// `K·M·n`.
    pub fn cost(&self) -> u64 {
        self.samples * (self.grid_density * self.truncation_dim) as u64
    }
}

/// `K = ⌈ε^{-2}⌉`, `n = ⌈ε^{-1/α}⌉`, `M = ⌈δ^{-1}(ε)⌉`, where targets at or
/// above `δ(1)` need a single Wiener coordinate.
pub fn mc_params(eps: f64, alpha: f64, delta: &DeltaFunction) -> Result<McParams> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::invalid("eps", format!("must be positive, got {eps}")));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::invalid("alpha", format!("must be positive, got {alpha}")));
    }
    let samples = ceil_count(eps.powi(-2));
    let grid = ceil_count(eps.powf(-1.0 / alpha));
    if samples > 1e15 || grid > 1e15 {
        return Err(Error::invalid("eps", format!("{eps} leads to an unrepresentable sample size")));
    }
    Ok(McParams {
        samples: samples as u64,
        grid_density: grid as usize,
        truncation_dim: delta.truncation_dimension(eps)?,
    })
}

/// Mean of `K` independent payoffs at the `(M, n)` chosen by [`mc_params`].
pub fn run_mc<P: SdeProblem + ?Sized>(
    problem: &P,
    payoff: &Payoff,
    eps: f64,
    alpha: f64,
    delta: &DeltaFunction,
    master_seed: u64,
) -> Result<EstimateReport> {
    let params = mc_params(eps, alpha, delta)?;
    let (m, n) = (params.truncation_dim, params.grid_density);
    let mut stats = LevelStats::new(0, m, n);
    stats.target = params.samples;
    extend(&mut stats, params.samples, |i| path_sample(problem, payoff, master_seed, i, m, n))?;
    Ok(EstimateReport::from_levels(vec![stats], eps, 1, true))
}
