use super::sampling::{extend, level_sample};
use super::{convergence_error, optimal_kl, EstimateReport, LevelSchedule, LevelStats};
use crate::error::{Error, Result};
use crate::sde::{Payoff, SdeProblem};

/// Number of fresh samples used to estimate the variance of a new top level.
pub const PROBE_SAMPLES: u64 = 1000;

/// Runaway protection for the adaptive loop.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MlmcCaps {
    pub max_level: usize,
    pub max_samples: u64,
}

impl Default for MlmcCaps {
    fn default() -> Self {
        Self { max_level: 24, max_samples: 100_000_000 }
    }
}

/// Adaptive multilevel estimator.
///
/// Starts from level 0 alone. Each iteration probes a new top level with
/// [`PROBE_SAMPLES`] samples, recomputes the sample sizes from the current
/// variance estimates with [`optimal_kl`], tops every level up to its new
/// size (samples already drawn are kept), and from the third iteration on
/// stops as soon as [`convergence_error`] of the two finest levels is
/// negative. The estimate is `Σ_l Ŷ_l`.
///
/// Sample `i` of level `l` always uses the streams keyed by `(i, l)`, so the
/// result does not depend on the number of worker threads.
pub fn run_mlmc<P: SdeProblem + ?Sized>(
    problem: &P,
    payoff: &Payoff,
    eps: f64,
    schedule: &LevelSchedule,
    master_seed: u64,
    caps: MlmcCaps,
) -> Result<EstimateReport> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::invalid("eps", format!("must be positive, got {eps}")));
    }
    if caps.max_samples == 0 {
        return Err(Error::invalid("max_samples", "must be positive"));
    }
    let mut levels: Vec<LevelStats> = Vec::new();
    let mut iteration = 0;
    loop {
        iteration += 1;
        let top = levels.len();
        if top > caps.max_level {
            return Err(Error::MaxLevelExceeded {
                max_level: caps.max_level,
                partial: Box::new(EstimateReport::from_levels(levels, eps, iteration - 1, false)),
            });
        }
        if PROBE_SAMPLES > caps.max_samples {
            return Err(samples_exceeded(levels, top, PROBE_SAMPLES, caps, eps, iteration));
        }
        let (m, n) = schedule.params(top)?;
        let mut probe = LevelStats::new(top, m, n);
        extend(&mut probe, PROBE_SAMPLES, |i| level_sample(problem, payoff, schedule, top, master_seed, i))?;
        levels.push(probe);

        let variances: Vec<f64> = levels.iter().map(|s| s.variance).collect();
        let costs: Vec<f64> = levels.iter().map(|s| s.unit_cost() as f64).collect();
        let targets = optimal_kl(eps, &variances, &costs)?;
        if let Some((l, &k)) = targets.iter().enumerate().find(|(_, k)| **k > caps.max_samples) {
            return Err(samples_exceeded(levels, l, k, caps, eps, iteration));
        }
        for (l, (stats, &k)) in levels.iter_mut().zip(&targets).enumerate() {
            stats.target = k;
            stats.allocation_variance = variances[l];
            if k > stats.samples_used {
                extend(stats, k, |i| level_sample(problem, payoff, schedule, l, master_seed, i))?;
            }
        }

        if iteration > 2 && convergence_error(levels[top - 1].mean.abs(), levels[top].mean.abs(), eps) < 0.0 {
            log::debug!("converged after {iteration} iterations with {} levels", levels.len());
            return Ok(EstimateReport::from_levels(levels, eps, iteration, true));
        }
    }
}

fn samples_exceeded(
    levels: Vec<LevelStats>,
    level: usize,
    requested: u64,
    caps: MlmcCaps,
    eps: f64,
    iteration: usize,
) -> Error {
    Error::MaxSamplesExceeded {
        level,
        requested,
        max_samples: caps.max_samples,
        partial: Box::new(EstimateReport::from_levels(levels, eps, iteration, false)),
    }
}
