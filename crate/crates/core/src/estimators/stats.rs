use crate::error::{Error, Result};
use crate::util::{ceil_count, Running};

/// Running statistics of one level of an estimator.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelStats {
    pub level: usize,
    pub truncation_dim: usize,
    pub grid_density: usize,
    pub samples_used: u64,
    /// `Ŷ_l`
    pub mean: f64,
    /// `v̂_l`, unbiased.
    pub variance: f64,
    /// Latest `K̂_l`.
    pub target: u64,
    /// The `v̂_l` that `target` was computed from.
    pub allocation_variance: f64,
    /// Exact scalar-evaluation count of all samples drawn on this level.
    pub informational_cost: u64,
    acc: Running,
}

impl LevelStats {
    pub fn new(level: usize, truncation_dim: usize, grid_density: usize) -> Self {
        Self {
            level,
            truncation_dim,
            grid_density,
            samples_used: 0,
            mean: 0.0,
            variance: 0.0,
            target: 0,
            allocation_variance: 0.0,
            informational_cost: 0,
            acc: Running::default(),
        }
    }

    /// `M_l · n_l`.
    pub fn unit_cost(&self) -> u64 {
        (self.truncation_dim * self.grid_density) as u64
    }

    pub fn push(&mut self, y: f64, informational_cost: u64) {
        self.acc.push(y);
        self.informational_cost += informational_cost;
        self.samples_used = self.acc.count;
        self.mean = self.acc.mean;
        self.variance = self.acc.variance();
    }
}

/// Estimator output.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimateReport {
    pub value: f64,
    pub target_eps: f64,
    /// `Σ_l K_l M_l n_l`.
    pub total_cost: u64,
    /// Exact `Σ d(n + Mn + N(T) + 1) + Mn + n` over all simulated paths.
    pub informational_cost: u64,
    pub per_level: Vec<LevelStats>,
    pub iterations: usize,
    pub converged: bool,
}

impl EstimateReport {
    pub(crate) fn from_levels(levels: Vec<LevelStats>, eps: f64, iterations: usize, converged: bool) -> Self {
        Self {
            value: levels.iter().map(|s| s.mean).sum(),
            target_eps: eps,
            total_cost: levels.iter().map(|s| s.samples_used * s.unit_cost()).sum(),
            informational_cost: levels.iter().map(|s| s.informational_cost).sum(),
            per_level: levels,
            iterations,
            converged,
        }
    }

    /// Index of the finest level.
    pub fn top_level(&self) -> usize {
        self.per_level.len().saturating_sub(1)
    }

    /// `Σ v̂_l / K_l` with `K_l` the samples actually used.
    pub fn estimator_variance(&self) -> f64 {
        self.per_level
            .iter()
            .filter(|s| s.samples_used > 0)
            .map(|s| s.variance / s.samples_used as f64)
            .sum()
    }
}

/// Sample sizes `K_l = ⌈2ε^{-2} √(v_l / C_l) Σ_k √(v_k C_k)⌉` with
/// `C_l = M_l n_l`. A level with zero variance still gets one sample.
pub fn optimal_kl(eps: f64, variances: &[f64], unit_costs: &[f64]) -> Result<Vec<u64>> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::invalid("eps", format!("must be positive, got {eps}")));
    }
    if variances.len() != unit_costs.len() || variances.is_empty() {
        return Err(Error::Shape(format!(
            "{} variances for {} level costs",
            variances.len(),
            unit_costs.len()
        )));
    }
    if let Some(v) = variances.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
        return Err(Error::invalid("variance", format!("must be finite and non-negative, got {v}")));
    }
    if let Some(c) = unit_costs.iter().find(|c| !(**c > 0.0)) {
        return Err(Error::invalid("cost", format!("must be positive, got {c}")));
    }
    let raw = raw_allocation(eps, variances, unit_costs);
    if raw.iter().all(|k| *k == 0.0) {
        log::warn!("all level variances are zero; using one sample per level");
    }
    Ok(raw
        .into_iter()
        .map(|k| {
            let k = ceil_count(k);
            if k >= u64::MAX as f64 {
                u64::MAX
            } else {
                (k as u64).max(1)
            }
        })
        .collect())
}

/// The allocation before rounding up.
fn raw_allocation(eps: f64, variances: &[f64], unit_costs: &[f64]) -> Vec<f64> {
    let spread: f64 = variances.iter().zip(unit_costs).map(|(v, c)| (v * c).sqrt()).sum();
    let scale = 2.0 / (eps * eps) * spread;
    variances.iter().zip(unit_costs).map(|(v, c)| scale * (v / c).sqrt()).collect()
}

/// `max(|Ŷ_{L-1}| / 2, |Ŷ_L|) - (√2 - 1) ε / √2`; negative means the bias
/// test passes.
pub fn convergence_error(prev_abs: f64, top_abs: f64, eps: f64) -> f64 {
    (0.5 * prev_abs).max(top_abs) - (std::f64::consts::SQRT_2 - 1.0) * eps / std::f64::consts::SQRT_2
}
