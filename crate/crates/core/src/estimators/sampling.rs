use std::ops::Range;

use rayon::prelude::*;

use super::{LevelSchedule, LevelStats};
use crate::error::Result;
use crate::noise::{sample_coupled_noise, sample_path_noise};
use crate::scheme::{run_scheme, simulate_coupled, CostCounter};
use crate::sde::{Payoff, SdeProblem};

/// One payoff sample (or payoff difference on levels above 0).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LevelSample {
    pub value: f64,
    pub cost: CostCounter,
}

/// Samples are simulated in parallel in chunks of this many indices and
/// merged in index order.
const CHUNK: u64 = 1 << 14;

/// Draws the samples with indices in `indices` in parallel and returns them
/// in index order. The first failing index, in index order, is reported.
pub(crate) fn draw<F>(indices: Range<u64>, sample: F) -> Result<Vec<LevelSample>>
where
    F: Fn(u64) -> Result<LevelSample> + Sync,
{
    let results: Vec<Result<LevelSample>> = indices.into_par_iter().map(&sample).collect();
    results.into_iter().collect()
}

/// Extends `stats` with the samples `from..to`, merging chunk by chunk.
pub(crate) fn extend<F>(stats: &mut LevelStats, to: u64, sample: F) -> Result<()>
where
    F: Fn(u64) -> Result<LevelSample> + Sync,
{
    let mut start = stats.samples_used;
    while start < to {
        let end = (start + CHUNK).min(to);
        for s in draw(start..end, &sample)? {
            stats.push(s.value, s.cost.sample_cost());
        }
        start = end;
    }
    Ok(())
}

/// Sample `index` of a single path at `(m, n)`, keyed on level 0.
pub(crate) fn path_sample<P: SdeProblem + ?Sized>(
    problem: &P,
    payoff: &Payoff,
    master_seed: u64,
    index: u64,
    m: usize,
    n: usize,
) -> Result<LevelSample> {
    let noise = sample_path_noise(problem, master_seed, index, 0, m, n)?;
    let path = run_scheme(problem, m, n, &noise.wiener, &noise.jumps, &noise.thetas, &noise.initial)?;
    Ok(LevelSample { value: payoff.eval(&path.terminal), cost: path.cost })
}

/// Sample `index` of multilevel level `level`: the single-path payoff on level
/// 0, the coupled difference `f(fine) - f(coarse)` above.
pub fn level_sample<P: SdeProblem + ?Sized>(
    problem: &P,
    payoff: &Payoff,
    schedule: &LevelSchedule,
    level: usize,
    master_seed: u64,
    index: u64,
) -> Result<LevelSample> {
    let fine = schedule.params(level)?;
    if level == 0 {
        return path_sample(problem, payoff, master_seed, index, fine.0, fine.1);
    }
    let coarse = schedule.params(level - 1)?;
    let noise = sample_coupled_noise(problem, master_seed, index, level as u32, fine, coarse)?;
    let r = simulate_coupled(problem, fine, coarse, &noise, payoff)?;
    Ok(LevelSample { value: r.difference(), cost: r.cost })
}

/// Samples `indices` of level `level`, in index order.
pub fn sample_level<P: SdeProblem + ?Sized>(
    problem: &P,
    payoff: &Payoff,
    schedule: &LevelSchedule,
    level: usize,
    master_seed: u64,
    indices: Range<u64>,
) -> Result<Vec<LevelSample>> {
    draw(indices, |i| level_sample(problem, payoff, schedule, level, master_seed, i))
}
