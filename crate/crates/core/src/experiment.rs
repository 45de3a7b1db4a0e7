//! Reproduction harness: reference values, empirical errors, ε-sweeps and
//! log-log regression.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{run_mc, run_mlmc, LevelSchedule, MlmcCaps};
use crate::noise::{derive_seed, derive_stream, sample_jumps, StreamKey, StreamRole};
use crate::sde::{merton_exact_terminal, sample_merton_mark, MertonProblem, MertonSpec, Payoff};
use crate::util::{Running, Z_99};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Estimator {
    Mc,
    Mlmc,
}

impl Estimator {
    pub fn name(self) -> &'static str {
        match self {
            Estimator::Mc => "mc",
            Estimator::Mlmc => "mlmc",
        }
    }
}

/// Monte Carlo estimate of `E[f(X(T))]` from the closed-form solution with
/// `m_ref` Wiener coordinates, with the half-width of its 99% confidence
/// interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Reference {
    pub value: f64,
    pub ci_halfwidth: f64,
}

pub fn reference_value(spec: &MertonSpec, payoff: &Payoff, m_ref: usize, k_ref: u64, master_seed: u64) -> Result<Reference> {
    spec.validate()?;
    if m_ref == 0 {
        return Err(Error::invalid("m_ref", "must be at least 1"));
    }
    if k_ref < 1000 {
        return Err(Error::invalid("k_ref", format!("must be at least 1000, got {k_ref}")));
    }
    let sd = spec.horizon.sqrt();
    let sample = |i: u64| -> Result<f64> {
        let mut w = derive_stream(master_seed, StreamKey::new(i, 0, StreamRole::Wiener));
        let terminal: Vec<f64> = (0..m_ref).map(|_| sd * rand::Rng::sample::<f64, _>(&mut w, rand_distr::StandardNormal)).collect();
        let mut times = derive_stream(master_seed, StreamKey::new(i, 0, StreamRole::Jumps));
        let mut marks = derive_stream(master_seed, StreamKey::new(i, 0, StreamRole::Marks));
        let jumps = sample_jumps(&mut times, &mut marks, spec.lambda, spec.horizon, 1, |s, y| y[0] = sample_merton_mark(s))?;
        Ok(payoff.eval(&[merton_exact_terminal(spec, &terminal, &jumps.marks)]))
    };
    let mut acc = Running::default();
    const CHUNK: u64 = 1 << 14;
    let mut start = 0;
    while start < k_ref {
        let end = (start + CHUNK).min(k_ref);
        let values: Vec<Result<f64>> = (start..end).into_par_iter().map(sample).collect();
        for v in values {
            acc.push(v?);
        }
        start = end;
    }
    Ok(Reference { value: acc.mean, ci_halfwidth: Z_99 * (acc.variance() / k_ref as f64).sqrt() })
}

/// `(1/K Σ |Y_i - reference|²)^{1/2}`.
pub fn empirical_error(estimates: &[f64], reference: f64) -> f64 {
    if estimates.is_empty() {
        return 0.0;
    }
    let sq: f64 = estimates.iter().map(|y| (y - reference).powi(2)).sum();
    (sq / estimates.len() as f64).sqrt()
}

/// Runs `runner` for repetitions `0..reps` and returns the empirical error
/// of the results against `reference`.
pub fn empirical_error_of<F>(mut runner: F, reps: usize, reference: f64) -> Result<f64>
where
    F: FnMut(usize) -> Result<f64>,
{
    let values = (0..reps).map(&mut runner).collect::<Result<Vec<_>>>()?;
    Ok(empirical_error(&values, reference))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub eps: f64,
    pub estimator: Estimator,
    pub empirical_error: f64,
    pub mean_cost: f64,
    pub repetitions: usize,
    pub reference_value: f64,
    pub reference_ci_halfwidth: f64,
}

/// Settings of an ε-sweep on the Merton problem.
#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub spec: MertonSpec,
    pub payoff: Payoff,
    pub eps_grid: Vec<f64>,
    pub mc_repetitions: usize,
    pub mlmc_repetitions: usize,
    pub alpha: f64,
    pub beta: f64,
    pub caps: MlmcCaps,
    pub master_seed: u64,
}

#[derive(Debug, Default)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub failures: Vec<(f64, Estimator, Error)>,
}

/// Seed of repetition `rep` of `estimator` at grid point `eps_index`.
pub fn repetition_seed(master_seed: u64, eps_index: usize, estimator: Estimator, rep: usize) -> u64 {
    derive_seed(master_seed, &[eps_index as u64, estimator as u64, rep as u64])
}

/// One row per `(ε, estimator)`, MC before MLMC for each ε. A failing row is
/// recorded and the sweep moves on.
pub fn sweep(config: &SweepConfig, reference: Reference) -> Result<SweepOutcome> {
    let problem = MertonProblem::new(config.spec)?;
    let delta = config.spec.delta()?;
    let schedule = LevelSchedule::new(config.beta, config.alpha, delta.clone(), config.spec.horizon)?;
    if let Some(eps) = config.eps_grid.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(Error::invalid("eps_grid", format!("every eps must be positive, got {eps}")));
    }
    let mut outcome = SweepOutcome::default();
    for (i, &eps) in config.eps_grid.iter().enumerate() {
        for estimator in [Estimator::Mc, Estimator::Mlmc] {
            let reps = match estimator {
                Estimator::Mc => config.mc_repetitions,
                Estimator::Mlmc => config.mlmc_repetitions,
            };
            let mut values = Vec::with_capacity(reps);
            let mut cost = 0.0;
            let mut failure = None;
            for rep in 0..reps {
                let seed = repetition_seed(config.master_seed, i, estimator, rep);
                let report = match estimator {
                    Estimator::Mc => run_mc(&problem, &config.payoff, eps, config.alpha, &delta, seed),
                    Estimator::Mlmc => run_mlmc(&problem, &config.payoff, eps, &schedule, seed, config.caps),
                };
                match report {
                    Ok(r) => {
                        values.push(r.value);
                        cost += r.total_cost as f64;
                    }
                    Err(e) => {
                        failure = Some(e);
                        break;
                    }
                }
            }
            if let Some(e) = failure {
                log::error!("eps = {eps}, {}: {e}", estimator.name());
                outcome.failures.push((eps, estimator, e));
                continue;
            }
            let row = SweepRow {
                eps,
                estimator,
                empirical_error: empirical_error(&values, reference.value),
                mean_cost: cost / reps.max(1) as f64,
                repetitions: reps,
                reference_value: reference.value,
                reference_ci_halfwidth: reference.ci_halfwidth,
            };
            log::info!(
                "eps = {eps}, {}: error {:.4e}, mean cost {:.4e}",
                estimator.name(),
                row.empirical_error,
                row.mean_cost
            );
            outcome.rows.push(row);
        }
    }
    Ok(outcome)
}

pub const CSV_HEADER: &str = "eps,estimator,empirical_error,mean_cost,repetitions,reference_value,reference_ci";

/// 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv<W: Write>(mut out: W, rows: &[SweepRow]) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            fmt_float(r.eps),
            r.estimator.name(),
            fmt_float(r.empirical_error),
            fmt_float(r.mean_cost),
            r.repetitions,
            fmt_float(r.reference_value),
            fmt_float(r.reference_ci_halfwidth)
        )?;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least squares line through `(ln x, ln y)`.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<LogLogFit> {
    if points.len() < 3 {
        return Err(Error::invalid("points", format!("need at least 3 points, got {}", points.len())));
    }
    if let Some(p) = points.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())) {
        return Err(Error::invalid("points", format!("coordinates must be positive, got {p:?}")));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|(x, y)| (x.ln(), y.ln())).collect();
    let k = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / k;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("points", "all x values coincide"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = logs.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let ss_tot: f64 = logs.iter().map(|p| (p.1 - my).powi(2)).sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(LogLogFit { slope, intercept, r_squared })
}
