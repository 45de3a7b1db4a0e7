//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. All tolerances and seeds are pinned here.

use std::collections::BTreeMap;
use std::process::Command;
use std::time::Instant;

use jdmlmc::estimators::{mc_params, run_mlmc, sample_level, LevelSchedule, MlmcCaps};
use jdmlmc::experiment::{
    empirical_error, fit_loglog_slope, reference_value, sweep, Estimator, Reference, SweepConfig,
};
use jdmlmc::noise::{derive_seed, derive_stream, sample_jumps, sample_path_noise, sample_thetas, sample_wiener_increments};
use jdmlmc::noise::{StreamKey, StreamRole};
use jdmlmc::scheme::simulate_path;
use jdmlmc::sde::{merton_exact_terminal, sample_merton_mark, FnProblem, MertonProblem, MertonSpec, Payoff};
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

/// Reference value for the default Merton call, computed by
/// `reference_value(default spec, call(1), 2000, 100_000, derive_seed(1, [u64::MAX]))`,
/// the same value `jdmlmc reference` prints with the default seed.
const FROZEN_REFERENCE: f64 = 0.863_106_890_719_173_8;
const FROZEN_REFERENCE_CI: f64 = 0.040_657_850_635_688_05;
const Z_99: f64 = 2.575_829_303_548_900_4;

type Outcome = Result<String, String>;
type Criterion = (&'static str, &'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn merton() -> (MertonSpec, MertonProblem) {
    let spec = MertonSpec::default();
    (spec, MertonProblem::new(spec).unwrap())
}

fn schedule(spec: &MertonSpec) -> LevelSchedule {
    LevelSchedule::new(2.0, 0.5, spec.delta().unwrap(), spec.horizon).unwrap()
}

fn ac1_mc_sizing() -> Outcome {
    let delta = MertonSpec::default().delta().unwrap();
    let expected = [(0.5, 4, 4, 1), (0.1, 100, 100, 16), (0.05, 400, 400, 64)];
    let mut details = Vec::new();
    for (eps, k, n, m) in expected {
        let p = mc_params(eps, 0.5, &delta).map_err(|e| e.to_string())?;
        if (p.samples, p.grid_density, p.truncation_dim) != (k, n, m) {
            return Err(format!("eps {eps}: got K={} n={} M={}, want {k}/{n}/{m}", p.samples, p.grid_density, p.truncation_dim));
        }
        // δ(k) = 0.4 k^{-1/2} gives δ^{-1}(ε) = 0.16 / ε².
        let bound = eps.powi(-4) * 0.16 / (eps * eps);
        let cost = p.cost() as f64;
        if !(bound <= cost * (1.0 + 1e-12) && cost <= 8.0 * bound) {
            return Err(format!("eps {eps}: K·M·n = {cost} outside [{bound}, {}]", 8.0 * bound));
        }
        details.push(format!("eps {eps}: {k}·{m}·{n}"));
    }
    Ok(details.join(", "))
}

fn ac2_deterministic() -> Outcome {
    let (a, eta) = (0.37, 1.25);
    let problem = FnProblem::new(1, 1, 1.0, 0.0)
        .unwrap()
        .with_drift(move |_, _, out| out[0] = a)
        .with_initial_value(vec![eta]);
    let mut worst: f64 = 0.0;
    for n in 1..=1024usize {
        let noise = sample_path_noise(&problem, 5, n as u64, 0, 1, n).unwrap();
        let x = simulate_path(&problem, 1, n, &noise).map_err(|e| e.to_string())?.terminal[0];
        worst = worst.max((x - (eta + a)).abs());
    }
    if worst > 1e-12 {
        return Err(format!("constant drift error {worst:e} > 1e-12"));
    }
    let degenerate = FnProblem::new(1, 1, 1.0, 0.0).unwrap().with_initial_value(vec![2.0]);
    let sched = LevelSchedule::new(2.0, 0.5, jdmlmc::sde::DeltaFunction::power_law(0.4, 0.5).unwrap(), 1.0).unwrap();
    let payoff = Payoff::call(1.0);
    let report = run_mlmc(&degenerate, &payoff, 0.1, &sched, 3, MlmcCaps::default()).map_err(|e| e.to_string())?;
    let zero_var = report.per_level.iter().all(|l| l.variance == 0.0);
    check(
        report.value == 1.0 && zero_var,
        format!("drift error {worst:.1e} over n=1..1024; degenerate MLMC value {} zero variance {zero_var}", report.value),
    )
}

fn ac3_distributions() -> Outcome {
    const N: usize = 100_000;
    let z = 4.0;
    let h = 1.0 / 8.0;
    let mut stream = derive_stream(11, StreamKey::new(0, 0, StreamRole::Wiener));
    let w = sample_wiener_increments(&mut stream, 8, N / 8, 1.0).unwrap();
    let xs = w.as_slice();
    let mean = xs.iter().sum::<f64>() / N as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (N - 1) as f64;
    let mean_ok = mean.abs() <= z * (h / N as f64).sqrt();
    let var_ok = (var - h).abs() <= z * h * (2.0 / N as f64).sqrt();

    let counts: Vec<f64> = (0..N as u64)
        .map(|i| {
            let mut t = derive_stream(12, StreamKey::new(i, 0, StreamRole::Jumps));
            let mut m = derive_stream(12, StreamKey::new(i, 0, StreamRole::Marks));
            sample_jumps(&mut t, &mut m, 1.0, 1.0, 1, |_, y| y[0] = 0.0).unwrap().len() as f64
        })
        .collect();
    let cmean = counts.iter().sum::<f64>() / N as f64;
    let cvar = counts.iter().map(|c| (c - cmean).powi(2)).sum::<f64>() / (N - 1) as f64;
    // Poisson(1): Var = 1, fourth central moment 4, so Var(sample variance) ≈ 3/N.
    let cmean_ok = (cmean - 1.0).abs() <= z * (1.0 / N as f64).sqrt();
    let cvar_ok = (cvar - 1.0).abs() <= z * (3.0 / N as f64).sqrt();

    // Relative position of θ_j inside its subinterval, 10 equal bins.
    let n = 8;
    let mut bins = [0u64; 10];
    for i in 0..(N / n) as u64 {
        let thetas = sample_thetas(&mut derive_stream(13, StreamKey::new(i, 0, StreamRole::ThetaFine)), n, 1.0);
        for (j, t) in thetas.iter().enumerate() {
            let u = (t * n as f64 - j as f64).clamp(0.0, 1.0 - 1e-12);
            bins[(u * 10.0) as usize] += 1;
        }
    }
    let expected = N as f64 / 10.0;
    let chi2: f64 = bins.iter().map(|&b| (b as f64 - expected).powi(2) / expected).sum();
    let p = 1.0 - ChiSquared::new(9.0).unwrap().cdf(chi2);
    let theta_ok = p > 1e-3;

    check(
        mean_ok && var_ok && cmean_ok && cvar_ok && theta_ok,
        format!(
            "ΔW mean {mean:.2e} var {var:.5} (h={h}); Poisson mean {cmean:.4} var {cvar:.4}; θ chi² {chi2:.2} p={p:.3}"
        ),
    )
}

fn ac4_strong_rate() -> Outcome {
    let (spec, problem) = merton();
    const M: usize = 1000;
    const K: u64 = 2000;
    let mut points = Vec::new();
    let mut n = 4;
    while n <= 512 {
        let seed = derive_seed(21, &[n as u64]);
        let sq: Vec<f64> = (0..K)
            .into_par_iter()
            .map(|i| {
                let noise = sample_path_noise(&problem, seed, i, 0, M, n).unwrap();
                let x = simulate_path(&problem, M, n, &noise).unwrap().terminal[0];
                let exact = merton_exact_terminal(&spec, &noise.wiener.column_sums(M), &noise.jumps.marks);
                (x - exact).powi(2)
            })
            .collect();
        let rms = (sq.iter().sum::<f64>() / K as f64).sqrt();
        points.push((n as f64, rms));
        n *= 2;
    }
    let fit = fit_loglog_slope(&points).map_err(|e| e.to_string())?;
    let rms: Vec<String> = points.iter().map(|(n, r)| format!("{n}:{r:.4}")).collect();
    check(
        (-0.65..=-0.35).contains(&fit.slope),
        format!("slope {:.3} in [-0.65, -0.35]; RMS {}", fit.slope, rms.join(" ")),
    )
}

fn ac5_variance_decay() -> Outcome {
    let (spec, problem) = merton();
    let sched = schedule(&spec);
    let payoff = Payoff::call(1.0);
    let mut points = Vec::new();
    for l in 1..=6usize {
        let ys: Vec<f64> = sample_level(&problem, &payoff, &sched, l, 31, 0..10_000)
            .map_err(|e| e.to_string())?
            .iter()
            .map(|s| s.value)
            .collect();
        let mean = ys.iter().sum::<f64>() / ys.len() as f64;
        let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (ys.len() - 1) as f64;
        points.push((l as f64, var.log2()));
    }
    let n = points.len() as f64;
    let (mx, my) = (points.iter().map(|p| p.0).sum::<f64>() / n, points.iter().map(|p| p.1).sum::<f64>() / n);
    let slope = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / points.iter().map(|(x, _)| (x - mx).powi(2)).sum::<f64>();
    let logs: Vec<String> = points.iter().map(|(l, v)| format!("{l}:{v:.2}")).collect();
    check(
        (-1.4..=-0.6).contains(&slope),
        format!("slope of log2 v_l {slope:.3} in [-1.4, -0.6]; log2 v_l {}", logs.join(" ")),
    )
}

/// High-precision value of the same expectation for diagnostics only.
/// Conditional on the jumps, X(T) is lognormal, so the call has a closed
/// form and only the jump product needs sampling.
fn conditional_truth(spec: &MertonSpec, m: usize, samples: u64) -> (f64, f64) {
    let n01 = Normal::new(0.0, 1.0).unwrap();
    let s2: f64 = (1..=m).map(|j| spec.block_scale(j).powi(2)).sum::<f64>() * spec.horizon;
    let s = s2.sqrt();
    let drift = spec.mu * spec.horizon;
    let call = |x0: f64| {
        if x0 <= 0.0 {
            return 0.0;
        }
        let d1 = (x0.ln() + drift + 0.5 * s2) / s;
        x0 * drift.exp() * n01.cdf(d1) - n01.cdf(d1 - s)
    };
    let values: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut t = derive_stream(42, StreamKey::new(i, 0, StreamRole::Jumps));
            let mut m = derive_stream(42, StreamKey::new(i, 0, StreamRole::Marks));
            let jumps = sample_jumps(&mut t, &mut m, spec.lambda, spec.horizon, 1, |st, y| y[0] = sample_merton_mark(st)).unwrap();
            call(spec.eta0 * jumps.marks.iter().map(|x| 1.0 + x).product::<f64>())
        })
        .collect();
    let mean = values.iter().sum::<f64>() / samples as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (samples - 1) as f64;
    (mean, (var / samples as f64).sqrt())
}

fn ac6_mlmc_accuracy() -> Outcome {
    let (spec, problem) = merton();
    let payoff = Payoff::call(1.0);
    let recomputed = reference_value(&spec, &payoff, 2000, 100_000, derive_seed(1, &[u64::MAX])).map_err(|e| e.to_string())?;
    if recomputed.value != FROZEN_REFERENCE || recomputed.ci_halfwidth != FROZEN_REFERENCE_CI {
        return Err(format!("reference drifted: recomputed {:?}", recomputed));
    }
    let (truth, truth_se) = conditional_truth(&spec, 2000, 4_000_000);
    let sched = schedule(&spec);
    let mut details = Vec::new();
    let mut ok = true;
    for (i, eps) in [0.1, 0.05, 0.02].into_iter().enumerate() {
        let values: Vec<f64> = (0..100u64)
            .map(|r| {
                run_mlmc(&problem, &payoff, eps, &sched, derive_seed(41, &[i as u64, r]), MlmcCaps::default())
                    .map(|rep| rep.value)
            })
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        let err = empirical_error(&values, FROZEN_REFERENCE);
        ok &= err <= 1.5 * eps;
        details.push(format!(
            "eps {eps}: ê={err:.4} (≤{:.3}), ê vs conditional value {:.4}",
            1.5 * eps,
            empirical_error(&values, truth)
        ));
    }
    check(
        ok,
        format!(
            "reference {FROZEN_REFERENCE:.5}±{FROZEN_REFERENCE_CI:.5}, conditional value {truth:.5}±{:.5}; {}",
            Z_99 * truth_se,
            details.join(", ")
        ),
    )
}

fn ac7_cost_separation() -> Outcome {
    let spec = MertonSpec::default();
    let config = SweepConfig {
        spec,
        payoff: Payoff::call(1.0),
        eps_grid: vec![0.2, 0.1, 0.05, 0.02],
        mc_repetitions: 1,
        mlmc_repetitions: 20,
        alpha: 0.5,
        beta: 2.0,
        caps: MlmcCaps::default(),
        master_seed: 51,
    };
    let reference = Reference { value: FROZEN_REFERENCE, ci_halfwidth: FROZEN_REFERENCE_CI };
    let outcome = sweep(&config, reference).map_err(|e| e.to_string())?;
    if !outcome.failures.is_empty() {
        return Err(format!("{} sweep rows failed", outcome.failures.len()));
    }
    let costs = |est: Estimator| -> Vec<(f64, f64)> {
        outcome.rows.iter().filter(|r| r.estimator == est).map(|r| (1.0 / r.eps, r.mean_cost)).collect()
    };
    let (mc, mlmc) = (costs(Estimator::Mc), costs(Estimator::Mlmc));
    let mc_fit = fit_loglog_slope(&mc).map_err(|e| e.to_string())?;
    let mlmc_fit = fit_loglog_slope(&mlmc).map_err(|e| e.to_string())?;
    let ratios: Vec<f64> = mc.iter().zip(&mlmc).map(|(a, b)| b.1 / a.1).collect();
    let decreasing = ratios.windows(2).all(|w| w[1] < w[0]);
    let ratio_text: Vec<String> = ratios.iter().map(|r| format!("{r:.3e}")).collect();
    check(
        (mc_fit.slope - 6.0).abs() <= 0.3 && mlmc_fit.slope <= mc_fit.slope - 1.0 && decreasing,
        format!(
            "MC slope {:.3}, MLMC slope {:.3}, cost ratios {}",
            mc_fit.slope,
            mlmc_fit.slope,
            ratio_text.join(" ")
        ),
    )
}

fn ac8_telescoping() -> Outcome {
    let (_, problem) = merton();
    let spec = MertonSpec::default();
    let sched = schedule(&spec);
    let payoff = Payoff::call(1.0);
    const REPS: u64 = 100;
    const DIRECT: u64 = 100_000;
    let mut values = Vec::new();
    let mut tops = Vec::new();
    for r in 0..REPS {
        let report = run_mlmc(&problem, &payoff, 0.05, &sched, derive_seed(61, &[r]), MlmcCaps::default())
            .map_err(|e| e.to_string())?;
        values.push(report.value);
        tops.push(report.top_level());
    }
    // Direct single-level MC at each finest level that occurred.
    let mut direct = BTreeMap::new();
    for &l in &tops {
        if direct.contains_key(&l) {
            continue;
        }
        let (m, n) = sched.params(l).unwrap();
        let seed = derive_seed(62, &[l as u64]);
        let ys: Vec<f64> = (0..DIRECT)
            .into_par_iter()
            .map(|i| {
                let noise = sample_path_noise(&problem, seed, i, 0, m, n).unwrap();
                payoff.eval(&simulate_path(&problem, m, n, &noise).unwrap().terminal)
            })
            .collect();
        let mean = ys.iter().sum::<f64>() / DIRECT as f64;
        let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (DIRECT - 1) as f64;
        direct.insert(l, (mean, var));
    }
    let reps = REPS as f64;
    let mlmc_mean = values.iter().sum::<f64>() / reps;
    let mlmc_var = values.iter().map(|v| (v - mlmc_mean).powi(2)).sum::<f64>() / (reps - 1.0);
    let target = tops.iter().map(|l| direct[l].0).sum::<f64>() / reps;
    let direct_var: f64 = direct
        .iter()
        .map(|(l, (_, v))| {
            let share = tops.iter().filter(|t| *t == l).count() as f64 / reps;
            share * share * v / DIRECT as f64
        })
        .sum();
    let sigma = (mlmc_var / reps + direct_var).sqrt();
    let gap = (mlmc_mean - target).abs();
    let levels: Vec<String> = direct.iter().map(|(l, (m, _))| format!("L={l}:{m:.4}")).collect();
    check(
        gap <= 3.0 * sigma,
        format!("MLMC mean {mlmc_mean:.4} vs direct {target:.4}: |Δ|={gap:.4} ≤ 3σ={:.4}; {}", 3.0 * sigma, levels.join(" ")),
    )
}

fn ac9_reproducibility() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let runs: [&[&str]; 4] = [
        &["reference", "--k-ref", "20000", "--m-ref", "200"],
        &["mc", "--eps", "0.1"],
        &["mlmc", "--eps", "0.05"],
        &["sweep", "--eps-grid", "0.2,0.1", "--reps", "3", "--k-ref", "5000", "--m-ref", "100"],
    ];
    for args in runs {
        let mut outputs = Vec::new();
        for workers in ["1", "4", "8"] {
            let out = dir.path().join(format!("{}-{workers}.csv", args[0]));
            let status = Command::new(env!("CARGO_BIN_EXE_jdmlmc"))
                .args(args)
                .args(["--seed", "71", "--workers", workers, "--out"])
                .arg(&out)
                .env("RUST_LOG", "warn")
                .output()
                .map_err(|e| e.to_string())?;
            if !status.status.success() {
                return Err(format!("{} --workers {workers} exited with {}", args[0], status.status));
            }
            outputs.push(std::fs::read(&out).map_err(|e| e.to_string())?);
        }
        if outputs.windows(2).any(|w| w[0] != w[1]) {
            return Err(format!("{} output differs across worker counts", args[0]));
        }
    }
    Ok("reference, mc, mlmc and sweep CSVs identical for --workers 1, 4, 8".into())
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("AC1", "MC sizing", ac1_mc_sizing),
        ("AC2", "deterministic exactness", ac2_deterministic),
        ("AC3", "distributional checks", ac3_distributions),
        ("AC4", "strong rate", ac4_strong_rate),
        ("AC5", "level variance decay", ac5_variance_decay),
        ("AC6", "MLMC accuracy", ac6_mlmc_accuracy),
        ("AC7", "cost separation", ac7_cost_separation),
        ("AC8", "telescoping consistency", ac8_telescoping),
        ("AC9", "reproducibility", ac9_reproducibility),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| a.starts_with("AC")).collect();
    let mut failed = 0;
    for (id, name, run) in criteria {
        if !only.is_empty() && !only.iter().any(|o| o == id) {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("{id} PASS {name} ({secs:.1}s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("{id} FAIL {name} ({secs:.1}s): {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
