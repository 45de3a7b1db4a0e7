//! Command-line front end.
//!
//! Values are resolved in three layers: built-in defaults, then a flat
//! `key = value` config file (`--config`), then command-line flags.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::estimators::{run_mc, run_mlmc, EstimateReport, LevelSchedule, MlmcCaps};
use crate::experiment::{self, fmt_float, reference_value, Reference, SweepConfig};
use crate::noise::derive_seed;
use crate::sde::{MertonProblem, MertonSpec, Payoff};

/// Exit status for configuration errors.
pub const EXIT_CONFIG: i32 = 1;
/// Exit status for estimator failures.
pub const EXIT_ESTIMATOR: i32 = 2;

/// Tag mixed into the master seed for the reference computation.
const REFERENCE_TAG: u64 = u64::MAX;

#[derive(Debug, Parser)]
#[command(name = "jdmlmc", version, about = "Monte Carlo and multilevel Monte Carlo for jump-diffusion SDEs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Reference value of E[f(X(T))] from the closed-form solution.
    Reference,
    /// Standard Monte Carlo estimate.
    Mc,
    /// Adaptive multilevel Monte Carlo estimate.
    Mlmc,
    /// Error and cost of both estimators over a grid of accuracies.
    Sweep,
}

#[derive(Clone, Debug, Default, Args)]
pub struct Flags {
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub eps: Option<f64>,
    #[arg(long = "eps-grid", value_delimiter = ',', global = true, allow_negative_numbers = true)]
    pub eps_grid: Option<Vec<f64>>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    /// 0 draws a seed from system entropy.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Repetitions per estimator in a sweep.
    #[arg(long, global = true)]
    pub reps: Option<usize>,
    #[arg(long = "mc-reps", global = true)]
    pub mc_reps: Option<usize>,
    #[arg(long = "mlmc-reps", global = true)]
    pub mlmc_reps: Option<usize>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long = "max-level", global = true)]
    pub max_level: Option<usize>,
    #[arg(long = "max-samples", global = true)]
    pub max_samples: Option<u64>,
    #[arg(long = "m-ref", global = true)]
    pub m_ref: Option<usize>,
    #[arg(long = "k-ref", global = true)]
    pub k_ref: Option<u64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub mu: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub sigma: Option<f64>,
    #[arg(long = "alpha-series", global = true, allow_negative_numbers = true)]
    pub alpha_series: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub eta0: Option<f64>,
    #[arg(long = "T", global = true, allow_negative_numbers = true)]
    pub horizon: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub strike: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProblemKind {
    Merton,
}

/// Fully resolved and validated run settings.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemKind,
    pub spec: MertonSpec,
    pub strike: f64,
    pub eps: f64,
    pub eps_grid: Vec<f64>,
    pub beta: f64,
    /// Rate exponent of the scheme, fixed at 1/2.
    pub alpha: f64,
    pub caps: MlmcCaps,
    pub mc_reps: usize,
    pub mlmc_reps: usize,
    pub m_ref: usize,
    pub k_ref: u64,
    /// 0 until resolved by [`RunConfig::resolve_seed`].
    pub seed: u64,
    pub workers: usize,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: ProblemKind::Merton,
            spec: MertonSpec::default(),
            strike: 1.0,
            eps: 0.05,
            eps_grid: vec![0.2, 0.1, 0.05, 0.02],
            beta: 2.0,
            alpha: 0.5,
            caps: MlmcCaps::default(),
            mc_reps: 1000,
            mlmc_reps: 100,
            m_ref: 2000,
            k_ref: 100_000,
            seed: 1,
            workers: 0,
            out: None,
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

fn parse_grid(key: &str, value: &str) -> Result<Vec<f64>> {
    value.split(',').map(|v| parse_value(key, v)).collect()
}

/// Reads a flat `key = value` file. Blank lines, `#`/`;` comments and
/// `[section]` headers are skipped; later keys win.
pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config_text(&text)
}

pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') || line.starts_with('[') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`, got `{line}`", no + 1)))?;
        map.insert(key.trim().replace('-', "_"), value.trim().to_string());
    }
    Ok(map)
}

impl RunConfig {
    fn apply_entry(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "problem" => match value.trim() {
                "merton" => self.problem = ProblemKind::Merton,
                other => return Err(Error::Config(format!("invalid value `{other}` for `problem` (supported: merton)"))),
            },
            "mu" => self.spec.mu = parse_value(key, value)?,
            "sigma" => self.spec.sigma = parse_value(key, value)?,
            "alpha_series" => self.spec.alpha_series = parse_value(key, value)?,
            "lambda" => self.spec.lambda = parse_value(key, value)?,
            "eta0" => self.spec.eta0 = parse_value(key, value)?,
            "T" => self.spec.horizon = parse_value(key, value)?,
            "strike" => self.strike = parse_value(key, value)?,
            "eps" => self.eps = parse_value(key, value)?,
            "eps_grid" => self.eps_grid = parse_grid(key, value)?,
            "beta" => self.beta = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "workers" => self.workers = parse_value(key, value)?,
            "reps" => {
                let reps = parse_value(key, value)?;
                self.mc_reps = reps;
                self.mlmc_reps = reps;
            }
            "mc_reps" => self.mc_reps = parse_value(key, value)?,
            "mlmc_reps" => self.mlmc_reps = parse_value(key, value)?,
            "max_level" => self.caps.max_level = parse_value(key, value)?,
            "max_samples" => self.caps.max_samples = parse_value(key, value)?,
            "m_ref" => self.m_ref = parse_value(key, value)?,
            "k_ref" => self.k_ref = parse_value(key, value)?,
            "out" => self.out = Some(PathBuf::from(value.trim())),
            other => return Err(Error::Config(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    fn apply_flags(&mut self, f: &Flags) {
        let spec = &mut self.spec;
        set(&mut spec.mu, f.mu);
        set(&mut spec.sigma, f.sigma);
        set(&mut spec.alpha_series, f.alpha_series);
        set(&mut spec.lambda, f.lambda);
        set(&mut spec.eta0, f.eta0);
        set(&mut spec.horizon, f.horizon);
        set(&mut self.strike, f.strike);
        set(&mut self.eps, f.eps);
        set(&mut self.eps_grid, f.eps_grid.clone());
        set(&mut self.beta, f.beta);
        set(&mut self.seed, f.seed);
        set(&mut self.workers, f.workers);
        if let Some(r) = f.reps {
            self.mc_reps = r;
            self.mlmc_reps = r;
        }
        set(&mut self.mc_reps, f.mc_reps);
        set(&mut self.mlmc_reps, f.mlmc_reps);
        set(&mut self.caps.max_level, f.max_level);
        set(&mut self.caps.max_samples, f.max_samples);
        set(&mut self.m_ref, f.m_ref);
        set(&mut self.k_ref, f.k_ref);
        if f.out.is_some() {
            self.out = f.out.clone();
        }
    }

    /// Defaults, then the config file named by `--config`, then flags.
    pub fn from_flags(flags: &Flags) -> Result<Self> {
        let mut config = RunConfig::default();
        if let Some(path) = &flags.config {
            for (key, value) in read_config_file(path)? {
                config.apply_entry(&key, &value)?;
            }
        }
        config.apply_flags(flags);
        config.validate()?;
        Ok(config)
    }

    /// Like [`RunConfig::from_flags`] with the file given as text.
    pub fn from_text_and_flags(text: &str, flags: &Flags) -> Result<Self> {
        let mut config = RunConfig::default();
        for (key, value) in parse_config_text(text)? {
            config.apply_entry(&key, &value)?;
        }
        config.apply_flags(flags);
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |key: &str, reason: String| Err(Error::Config(format!("invalid `{key}`: {reason}")));
        if let Err(Error::InvalidParameter { name, reason }) = self.spec.validate() {
            return fail(name, reason);
        }
        if !(self.strike.is_finite()) {
            return fail("strike", format!("must be finite, got {}", self.strike));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return fail("eps", format!("must be positive, got {}", self.eps));
        }
        if self.eps_grid.is_empty() {
            return fail("eps_grid", "must not be empty".into());
        }
        if let Some(e) = self.eps_grid.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return fail("eps_grid", format!("every eps must be positive, got {e}"));
        }
        if !(self.beta > 1.0 && self.beta.is_finite()) {
            return fail("beta", format!("must be greater than 1, got {}", self.beta));
        }
        if self.caps.max_samples == 0 {
            return fail("max_samples", "must be positive".into());
        }
        if self.mc_reps == 0 || self.mlmc_reps == 0 {
            return fail("reps", "must be positive".into());
        }
        if self.m_ref == 0 {
            return fail("m_ref", "must be at least 1".into());
        }
        if self.k_ref < 1000 {
            return fail("k_ref", format!("must be at least 1000, got {}", self.k_ref));
        }
        if !(self.spec.sigma > 0.0) {
            return fail("sigma", "the truncation schedule needs sigma > 0".into());
        }
        Ok(())
    }

    /// Replaces a zero seed by one drawn from system entropy.
    pub fn resolve_seed(&mut self) -> bool {
        if self.seed == 0 {
            self.seed = rand::random::<u64>().max(1);
            true
        } else {
            false
        }
    }

    pub fn payoff(&self) -> Payoff {
        Payoff::call(self.strike)
    }

    pub fn schedule(&self) -> Result<LevelSchedule> {
        LevelSchedule::new(self.beta, self.alpha, self.spec.delta()?, self.spec.horizon)
    }

    pub fn reference_seed(&self) -> u64 {
        derive_seed(self.seed, &[REFERENCE_TAG])
    }

    /// Every resolved setting, one `key = value` per line.
    pub fn describe(&self) -> String {
        let mut s = String::new();
        let grid: Vec<String> = self.eps_grid.iter().map(|e| e.to_string()).collect();
        let _ = writeln!(s, "problem = merton");
        let _ = writeln!(s, "mu = {}", self.spec.mu);
        let _ = writeln!(s, "sigma = {}", self.spec.sigma);
        let _ = writeln!(s, "alpha_series = {}", self.spec.alpha_series);
        let _ = writeln!(s, "lambda = {}", self.spec.lambda);
        let _ = writeln!(s, "eta0 = {}", self.spec.eta0);
        let _ = writeln!(s, "T = {}", self.spec.horizon);
        let _ = writeln!(s, "strike = {}", self.strike);
        let _ = writeln!(s, "eps = {}", self.eps);
        let _ = writeln!(s, "eps_grid = {}", grid.join(","));
        let _ = writeln!(s, "beta = {}", self.beta);
        let _ = writeln!(s, "alpha = {}", self.alpha);
        let _ = writeln!(s, "max_level = {}", self.caps.max_level);
        let _ = writeln!(s, "max_samples = {}", self.caps.max_samples);
        let _ = writeln!(s, "mc_reps = {}", self.mc_reps);
        let _ = writeln!(s, "mlmc_reps = {}", self.mlmc_reps);
        let _ = writeln!(s, "m_ref = {}", self.m_ref);
        let _ = writeln!(s, "k_ref = {}", self.k_ref);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "workers = {}", self.workers);
        if let Some(out) = &self.out {
            let _ = writeln!(s, "out = {}", out.display());
        }
        s
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

pub const REPORT_HEADER: &str = "estimator,eps,value,total_cost,informational_cost,levels,iterations,converged";

pub fn report_row(estimator: &str, report: &EstimateReport) -> String {
    format!(
        "{estimator},{},{},{},{},{},{},{}",
        fmt_float(report.target_eps),
        fmt_float(report.value),
        report.total_cost,
        report.informational_cost,
        report.per_level.len(),
        report.iterations,
        report.converged
    )
}

/// Human-readable summary of a report.
pub fn describe_report(estimator: &str, report: &EstimateReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{estimator}: value {:.6} for eps {} ({}), cost {} M·n units, {} scalar evaluations",
        report.value,
        report.target_eps,
        if report.converged { "converged" } else { "not converged" },
        report.total_cost,
        report.informational_cost
    );
    let _ = writeln!(s, "  level      M      n    samples     target          mean      variance");
    for l in &report.per_level {
        let _ = writeln!(
            s,
            "  {:>5} {:>6} {:>6} {:>10} {:>10} {:>13.6e} {:>13.6e}",
            l.level, l.truncation_dim, l.grid_density, l.samples_used, l.target, l.mean, l.variance
        );
    }
    s
}

fn write_output(config: &RunConfig, csv: &str, summary: &str) -> Result<()> {
    match &config.out {
        Some(path) => {
            fs::write(path, csv)?;
            print!("{summary}");
        }
        None => {
            print!("{summary}");
            print!("{csv}");
        }
    }
    io::stdout().flush()?;
    Ok(())
}

fn compute_reference(config: &RunConfig) -> Result<Reference> {
    reference_value(&config.spec, &config.payoff(), config.m_ref, config.k_ref, config.reference_seed())
}

/// Runs one subcommand and returns the process exit status.
pub fn execute(command: Command, config: &RunConfig) -> i32 {
    match try_execute(command, config) {
        Ok(status) => status,
        Err(e) => {
            log::error!("{e}");
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => EXIT_CONFIG,
                _ => EXIT_ESTIMATOR,
            }
        }
    }
}

fn try_execute(command: Command, config: &RunConfig) -> Result<i32> {
    let problem = MertonProblem::new(config.spec)?;
    let payoff = config.payoff();
    match command {
        Command::Reference => {
            let r = compute_reference(config)?;
            let csv = format!(
                "reference_value,reference_ci,m_ref,k_ref\n{},{},{},{}\n",
                fmt_float(r.value),
                fmt_float(r.ci_halfwidth),
                config.m_ref,
                config.k_ref
            );
            let summary = format!("reference: {:.6} ± {:.6} (99%)\n", r.value, r.ci_halfwidth);
            write_output(config, &csv, &summary)?;
            Ok(0)
        }
        Command::Mc => {
            let delta = config.spec.delta()?;
            let report = run_mc(&problem, &payoff, config.eps, config.alpha, &delta, config.seed)?;
            let csv = format!("{REPORT_HEADER}\n{}\n", report_row("mc", &report));
            write_output(config, &csv, &describe_report("mc", &report))?;
            Ok(0)
        }
        Command::Mlmc => {
            let schedule = config.schedule()?;
            match run_mlmc(&problem, &payoff, config.eps, &schedule, config.seed, config.caps) {
                Ok(report) => {
                    let csv = format!("{REPORT_HEADER}\n{}\n", report_row("mlmc", &report));
                    write_output(config, &csv, &describe_report("mlmc", &report))?;
                    Ok(0)
                }
                Err(e) => {
                    if let Some(partial) = e.partial_report() {
                        let csv = format!("{REPORT_HEADER}\n{}\n", report_row("mlmc", partial));
                        write_output(config, &csv, &describe_report("mlmc (partial)", partial))?;
                    }
                    Err(e)
                }
            }
        }
        Command::Sweep => {
            let reference = compute_reference(config)?;
            log::info!("reference value {:.6} ± {:.6}", reference.value, reference.ci_halfwidth);
            let sweep_config = SweepConfig {
                spec: config.spec,
                payoff,
                eps_grid: config.eps_grid.clone(),
                mc_repetitions: config.mc_reps,
                mlmc_repetitions: config.mlmc_reps,
                alpha: config.alpha,
                beta: config.beta,
                caps: config.caps,
                master_seed: config.seed,
            };
            let outcome = experiment::sweep(&sweep_config, reference)?;
            let mut csv = Vec::new();
            experiment::write_csv(&mut csv, &outcome.rows)?;
            let csv = String::from_utf8(csv).expect("csv output is ascii");
            let mut summary = String::new();
            for r in &outcome.rows {
                let _ = writeln!(
                    summary,
                    "eps {:<6} {:<4} error {:.4e} mean cost {:.4e}",
                    r.eps,
                    r.estimator.name(),
                    r.empirical_error,
                    r.mean_cost
                );
            }
            write_output(config, &csv, &summary)?;
            if outcome.failures.is_empty() {
                Ok(0)
            } else {
                for (eps, est, e) in &outcome.failures {
                    eprintln!("error: eps {eps} {}: {e}", est.name());
                }
                Ok(EXIT_ESTIMATOR)
            }
        }
    }
}

/// Entry point of the binary.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    let mut config = match RunConfig::from_flags(&cli.flags) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    if config.resolve_seed() {
        eprintln!("seed drawn from system entropy: {}", config.seed);
    }
    log::info!("resolved configuration:\n{}", config.describe());
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(config.workers).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start {} workers: {e}", config.workers);
            return EXIT_CONFIG;
        }
    };
    pool.install(|| execute(cli.command, &config))
}
