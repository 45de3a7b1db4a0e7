//! Truncated-dimension randomized Euler scheme.
//!
//! On the grid `t_j = jT/n` the scheme steps
//!
//! ```text
//! X(t_{j+1}) = X(t_j) + a(θ_j, X(t_j)) T/n + Σ_{k=1}^{M} b^(k)(t_j, X(t_j)) ΔW_{j,k}
//!            + Σ_{jumps s ∈ (t_j, t_{j+1}]} c(t_j, X(t_j), ξ_s)
//! ```
//!
//! with `θ_j` uniform on `[t_j, t_{j+1}]`.

use std::ops::AddAssign;

use crate::error::{Error, Result};
use crate::noise::{CoupledNoise, Increments, Jumps, NoiseRealization};
use crate::sde::{Payoff, SdeProblem};

/// Scalar evaluations spent on one or more paths.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CostCounter {
    pub evals_a: u64,
    pub evals_b_scalar: u64,
    pub evals_c: u64,
    pub evals_eta: u64,
    pub evals_wiener: u64,
    pub evals_jumps: u64,
    /// `M·n` per path.
    pub simplified_cost: u64,
}

impl CostCounter {
    /// Tally of one path with `jumps` jumps: `d(n + Mn + N(T) + 1) + Mn + n`
    /// split by source.
    pub fn for_path(d: usize, m: usize, n: usize, jumps: usize) -> Self {
        let (d, m, n, jumps) = (d as u64, m as u64, n as u64, jumps as u64);
        Self {
            evals_a: d * n,
            evals_b_scalar: d * m * n,
            evals_c: d * jumps,
            evals_eta: d,
            evals_wiener: m * n,
            evals_jumps: n,
            simplified_cost: m * n,
        }
    }

    pub fn sample_cost(&self) -> u64 {
        self.evals_a + self.evals_b_scalar + self.evals_c + self.evals_eta + self.evals_wiener + self.evals_jumps
    }
}

impl AddAssign for CostCounter {
    fn add_assign(&mut self, rhs: Self) {
        self.evals_a += rhs.evals_a;
        self.evals_b_scalar += rhs.evals_b_scalar;
        self.evals_c += rhs.evals_c;
        self.evals_eta += rhs.evals_eta;
        self.evals_wiener += rhs.evals_wiener;
        self.evals_jumps += rhs.evals_jumps;
        self.simplified_cost += rhs.simplified_cost;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathResult {
    pub terminal: Vec<f64>,
    pub cost: CostCounter,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoupledResult {
    pub fine_payoff: f64,
    pub coarse_payoff: f64,
    pub cost: CostCounter,
}

impl CoupledResult {
    pub fn difference(&self) -> f64 {
        self.fine_payoff - self.coarse_payoff
    }
}

/// Expected cost `d(n + Mn + λT + 1) + Mn + n` of one path.
pub fn expected_cost<P: SdeProblem + ?Sized>(problem: &P, m: usize, n: usize) -> f64 {
    expected_cost_raw(problem.dim(), m, n, problem.intensity() * problem.horizon())
}

pub fn expected_cost_raw(d: usize, m: usize, n: usize, lambda_t: f64) -> f64 {
    let (d, m, n) = (d as f64, m as f64, n as f64);
    d * (n + m * n + lambda_t + 1.0) + m * n + n
}

/// Runs the scheme on `noise`, whose increments must be exactly `n × M`.
pub fn simulate_path<P: SdeProblem + ?Sized>(
    problem: &P,
    m: usize,
    n: usize,
    noise: &NoiseRealization,
) -> Result<PathResult> {
    if noise.wiener.rows() != n || noise.wiener.cols() != m {
        return Err(Error::Shape(format!(
            "increments are {}x{}, expected {n}x{m}",
            noise.wiener.rows(),
            noise.wiener.cols()
        )));
    }
    run_scheme(problem, m, n, &noise.wiener, &noise.jumps, &noise.thetas, &noise.initial)
}

/// Core recursion. Uses the first `m` columns of `increments`.
pub(crate) fn run_scheme<P: SdeProblem + ?Sized>(
    problem: &P,
    m: usize,
    n: usize,
    increments: &Increments,
    jumps: &Jumps,
    thetas: &[f64],
    initial: &[f64],
) -> Result<PathResult> {
    let d = problem.dim();
    let horizon = problem.horizon();
    if m == 0 || n == 0 {
        return Err(Error::Shape(format!("need M, n >= 1, got M={m}, n={n}")));
    }
    if increments.rows() != n || increments.cols() < m {
        return Err(Error::Shape(format!(
            "increments are {}x{}, need {n} rows and at least {m} columns",
            increments.rows(),
            increments.cols()
        )));
    }
    if thetas.len() != n {
        return Err(Error::Shape(format!("{} evaluation points for {n} steps", thetas.len())));
    }
    if initial.len() != d {
        return Err(Error::Shape(format!("initial value has {} entries, state has {d}", initial.len())));
    }
    if jumps.mark_dim != problem.mark_dim() || jumps.marks.len() != jumps.len() * jumps.mark_dim {
        return Err(Error::Shape("jump marks do not match the mark dimension".into()));
    }
    if let (Some(&first), Some(&last)) = (jumps.times.first(), jumps.times.last()) {
        if !(first > 0.0 && last <= horizon) {
            return Err(Error::Shape(format!("jump times must lie in (0, {horizon}]")));
        }
    }

    let h = horizon / n as f64;
    let mut x = initial.to_vec();
    let mut next = vec![0.0; d];
    let mut buf = vec![0.0; d];
    let mut pending = 0;
    for (j, &theta) in thetas.iter().enumerate() {
        let t = j as f64 * h;
        let t_next = if j + 1 == n { horizon } else { (j + 1) as f64 * h };

        problem.drift(theta, &x, &mut buf);
        for (nx, (xi, a)) in next.iter_mut().zip(x.iter().zip(&buf)) {
            *nx = xi + a * h;
        }
        problem.diffusion(t, &x, &increments.row(j)[..m], &mut buf);
        for (nx, b) in next.iter_mut().zip(&buf) {
            *nx += b;
        }
        while pending < jumps.len() && jumps.times[pending] <= t_next {
            problem.jump(t, &x, jumps.mark(pending), &mut buf);
            for (nx, c) in next.iter_mut().zip(&buf) {
                *nx += c;
            }
            pending += 1;
        }
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: j, steps: n });
        }
        std::mem::swap(&mut x, &mut next);
    }
    Ok(PathResult { terminal: x, cost: CostCounter::for_path(d, m, n, jumps.len()) })
}

/// Fine and coarse paths of one multilevel sample sharing Wiener increments,
/// jumps and marks, with independent evaluation points.
pub fn simulate_coupled<P: SdeProblem + ?Sized>(
    problem: &P,
    fine: (usize, usize),
    coarse: (usize, usize),
    noise: &CoupledNoise,
    payoff: &Payoff,
) -> Result<CoupledResult> {
    let (m_fine, n_fine) = fine;
    let (m_coarse, n_coarse) = coarse;
    if m_coarse > m_fine || n_coarse > n_fine {
        return Err(Error::Shape(format!(
            "coarse level ({m_coarse}, {n_coarse}) exceeds fine level ({m_fine}, {n_fine})"
        )));
    }
    if noise.shared_wiener.cols() != m_fine {
        return Err(Error::Shape(format!(
            "shared increments have {} columns, fine level needs {m_fine}",
            noise.shared_wiener.cols()
        )));
    }
    let fine_inc = noise.fine_increments(n_fine)?;
    let coarse_inc = noise.coarse_increments(n_coarse, m_coarse)?;
    let f = run_scheme(problem, m_fine, n_fine, &fine_inc, &noise.shared_jumps, &noise.theta_fine, &noise.initial)?;
    let c = run_scheme(
        problem,
        m_coarse,
        n_coarse,
        &coarse_inc,
        &noise.shared_jumps,
        &noise.theta_coarse,
        &noise.initial,
    )?;
    let mut cost = f.cost;
    cost += c.cost;
    Ok(CoupledResult { fine_payoff: payoff.eval(&f.terminal), coarse_payoff: payoff.eval(&c.terminal), cost })
}
