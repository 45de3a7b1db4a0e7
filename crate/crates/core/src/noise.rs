//! Keyed random streams and sampling of every stochastic input of the scheme.
//!
//! Each stream is a ChaCha8 generator whose 256-bit key packs the master seed,
//! the sample index, the level and the role of the stream. The mapping is
//! injective, so distinct keys give independent streams, and no stream depends
//! on the order in which samples are drawn.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::error::{Error, Result};
use crate::sde::SdeProblem;
use crate::util::lcm;

/// Random stream handle.
pub type Stream = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum StreamRole {
    Wiener = 1,
    Jumps = 2,
    Marks = 3,
    ThetaFine = 4,
    ThetaCoarse = 5,
    Initial = 6,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub sample_index: u64,
    pub level: u32,
    pub role: StreamRole,
}

impl StreamKey {
    pub fn new(sample_index: u64, level: u32, role: StreamRole) -> Self {
        Self { sample_index, level, role }
    }
}

const KEY_DOMAIN: &[u8; 8] = b"jdmlmc01";

pub fn derive_stream(master_seed: u64, key: StreamKey) -> Stream {
    let mut seed = [0u8; 32];
    seed[0..8].copy_from_slice(&master_seed.to_le_bytes());
    seed[8..16].copy_from_slice(&key.sample_index.to_le_bytes());
    seed[16..20].copy_from_slice(&key.level.to_le_bytes());
    seed[20] = key.role as u8;
    seed[24..32].copy_from_slice(KEY_DOMAIN);
    ChaCha8Rng::from_seed(seed)
}

/// Derives a child master seed, e.g. one per repetition of an estimator.
pub fn derive_seed(master_seed: u64, tags: &[u64]) -> u64 {
    let mut state = splitmix64(master_seed ^ 0x6a09_e667_f3bc_c909);
    for &tag in tags {
        state = splitmix64(state ^ splitmix64(tag.wrapping_add(0x9e37_79b9_7f4a_7c15)));
    }
    state
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Row-major matrix of Wiener increments: row `j` is the time step, column
/// `k` the Wiener coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct Increments {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Increments {
    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!("{} values for a {rows}x{cols} matrix", data.len())));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.data[j * self.cols..(j + 1) * self.cols]
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.data[j * self.cols + k]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// `W_k(T) - W_k(0)` for each of the first `cols` coordinates.
    pub fn column_sums(&self, cols: usize) -> Vec<f64> {
        let cols = cols.min(self.cols);
        let mut sums = vec![0.0; cols];
        for j in 0..self.rows {
            for (s, v) in sums.iter_mut().zip(self.row(j)) {
                *s += v;
            }
        }
        sums
    }
}

pub fn sample_wiener_increments(stream: &mut Stream, n: usize, m: usize, horizon: f64) -> Result<Increments> {
    if n == 0 {
        return Err(Error::invalid("n", "grid density must be at least 1"));
    }
    if m == 0 {
        return Err(Error::invalid("M", "truncation dimension must be at least 1"));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::invalid("T", format!("horizon must be positive, got {horizon}")));
    }
    let scale = (horizon / n as f64).sqrt();
    let data = (0..n * m)
        .map(|_| scale * stream.sample::<f64, _>(StandardNormal))
        .collect();
    Ok(Increments { rows: n, cols: m, data })
}

/// Jump times in `(0, T]` and their marks, stored flat with `mark_dim`
/// entries per jump.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Jumps {
    pub times: Vec<f64>,
    pub marks: Vec<f64>,
    pub mark_dim: usize,
}

impl Jumps {
    pub fn empty(mark_dim: usize) -> Self {
        Self { times: Vec::new(), marks: Vec::new(), mark_dim }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn mark(&self, i: usize) -> &[f64] {
        &self.marks[i * self.mark_dim..(i + 1) * self.mark_dim]
    }
}

/// Samples a compound Poisson configuration on `(0, T]`.
///
/// The count and the times come from `times_stream`, the marks from
/// `marks_stream` through `mark_sampler`.
pub fn sample_jumps<F>(
    times_stream: &mut Stream,
    marks_stream: &mut Stream,
    lambda: f64,
    horizon: f64,
    mark_dim: usize,
    mut mark_sampler: F,
) -> Result<Jumps>
where
    F: FnMut(&mut Stream, &mut [f64]),
{
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid("lambda", format!("jump intensity must be finite and non-negative, got {lambda}")));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::invalid("T", format!("horizon must be positive, got {horizon}")));
    }
    let mean = lambda * horizon;
    if mean == 0.0 {
        return Ok(Jumps::empty(mark_dim));
    }
    let count = Poisson::new(mean)
        .map_err(|e| Error::invalid("lambda", e.to_string()))?
        .sample(times_stream) as usize;
    // 1 - u maps [0, 1) onto (0, 1].
    let mut times: Vec<f64> = (0..count)
        .map(|_| horizon * (1.0 - times_stream.random::<f64>()))
        .collect();
    times.sort_by(f64::total_cmp);
    let mut marks = vec![0.0; count * mark_dim];
    for mark in marks.chunks_exact_mut(mark_dim.max(1)).take(count) {
        mark_sampler(marks_stream, mark);
    }
    Ok(Jumps { times, marks, mark_dim })
}

/// One uniform point per subinterval: `θ_j ∈ [jT/n, (j+1)T/n]`.
pub fn sample_thetas(stream: &mut Stream, n: usize, horizon: f64) -> Vec<f64> {
    let h = horizon / n as f64;
    (0..n)
        .map(|j| {
            let u: f64 = stream.random();
            let lo = j as f64 * h;
            let hi = if j + 1 == n { horizon } else { (j + 1) as f64 * h };
            (lo + u * h).min(hi)
        })
        .collect()
}

/// Sums consecutive blocks of `ratio` rows.
pub fn coarsen_increments(fine: &Increments, ratio: usize) -> Result<Increments> {
    coarsen_truncated(fine, ratio, fine.cols)
}

/// Block row sums keeping only the first `cols` columns. Rows are added in
/// increasing order, so the result is bitwise reproducible.
pub(crate) fn coarsen_truncated(fine: &Increments, ratio: usize, cols: usize) -> Result<Increments> {
    if ratio == 0 || !fine.rows.is_multiple_of(ratio) {
        return Err(Error::Shape(format!("{} rows cannot be grouped in blocks of {ratio}", fine.rows)));
    }
    if cols > fine.cols {
        return Err(Error::Shape(format!("cannot keep {cols} of {} columns", fine.cols)));
    }
    let rows = fine.rows / ratio;
    let mut data = Vec::with_capacity(rows * cols);
    for block in 0..rows {
        let start = data.len();
        data.extend_from_slice(&fine.row(block * ratio)[..cols]);
        for r in 1..ratio {
            for (acc, v) in data[start..].iter_mut().zip(&fine.row(block * ratio + r)[..cols]) {
                *acc += v;
            }
        }
    }
    Ok(Increments { rows, cols, data })
}

/// Everything one path of the scheme consumes.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseRealization {
    pub wiener: Increments,
    pub jumps: Jumps,
    pub thetas: Vec<f64>,
    pub initial: Vec<f64>,
}

/// Noise shared by the fine and coarse paths of one multilevel sample.
///
/// `shared_wiener` lives on the grid of density `lcm(n_fine, n_coarse)` with
/// `M_fine` columns. Both paths aggregate it; the coarse path keeps only its
/// first `M_coarse` columns.
#[derive(Clone, Debug, PartialEq)]
pub struct CoupledNoise {
    pub shared_wiener: Increments,
    pub shared_jumps: Jumps,
    pub theta_fine: Vec<f64>,
    pub theta_coarse: Vec<f64>,
    pub initial: Vec<f64>,
}

impl CoupledNoise {
    pub fn fine_increments(&self, n_fine: usize) -> Result<Increments> {
        coarsen_truncated(&self.shared_wiener, self.ratio(n_fine)?, self.shared_wiener.cols)
    }

    pub fn coarse_increments(&self, n_coarse: usize, m_coarse: usize) -> Result<Increments> {
        coarsen_truncated(&self.shared_wiener, self.ratio(n_coarse)?, m_coarse)
    }

    fn ratio(&self, n: usize) -> Result<usize> {
        if n == 0 || !self.shared_wiener.rows.is_multiple_of(n) {
            return Err(Error::Shape(format!(
                "grid density {n} does not divide the refinement grid of {} rows",
                self.shared_wiener.rows
            )));
        }
        Ok(self.shared_wiener.rows / n)
    }
}

fn sample_initial<P: SdeProblem + ?Sized>(problem: &P, master_seed: u64, sample_index: u64, level: u32) -> Vec<f64> {
    let mut stream = derive_stream(master_seed, StreamKey::new(sample_index, level, StreamRole::Initial));
    let mut x0 = vec![0.0; problem.dim()];
    problem.sample_initial(&mut stream, &mut x0);
    x0
}

fn sample_problem_jumps<P: SdeProblem + ?Sized>(
    problem: &P,
    master_seed: u64,
    sample_index: u64,
    level: u32,
) -> Result<Jumps> {
    let mut times = derive_stream(master_seed, StreamKey::new(sample_index, level, StreamRole::Jumps));
    let mut marks = derive_stream(master_seed, StreamKey::new(sample_index, level, StreamRole::Marks));
    sample_jumps(
        &mut times,
        &mut marks,
        problem.intensity(),
        problem.horizon(),
        problem.mark_dim(),
        |s, y| problem.sample_mark(s, y),
    )
}

/// Noise for a single path with `n` steps and `m` Wiener coordinates.
pub fn sample_path_noise<P: SdeProblem + ?Sized>(
    problem: &P,
    master_seed: u64,
    sample_index: u64,
    level: u32,
    m: usize,
    n: usize,
) -> Result<NoiseRealization> {
    let horizon = problem.horizon();
    let key = |role| StreamKey::new(sample_index, level, role);
    let wiener = sample_wiener_increments(&mut derive_stream(master_seed, key(StreamRole::Wiener)), n, m, horizon)?;
    let thetas = sample_thetas(&mut derive_stream(master_seed, key(StreamRole::ThetaFine)), n, horizon);
    Ok(NoiseRealization {
        wiener,
        jumps: sample_problem_jumps(problem, master_seed, sample_index, level)?,
        thetas,
        initial: sample_initial(problem, master_seed, sample_index, level),
    })
}

/// Coupled noise for the fine `(m_fine, n_fine)` and coarse
/// `(m_coarse, n_coarse)` paths of one sample of level `level`.
pub fn sample_coupled_noise<P: SdeProblem + ?Sized>(
    problem: &P,
    master_seed: u64,
    sample_index: u64,
    level: u32,
    fine: (usize, usize),
    coarse: (usize, usize),
) -> Result<CoupledNoise> {
    let (m_fine, n_fine) = fine;
    let (m_coarse, n_coarse) = coarse;
    if m_coarse > m_fine || m_coarse == 0 {
        return Err(Error::Shape(format!("coarse dimension {m_coarse} must lie in 1..={m_fine}")));
    }
    if n_coarse == 0 || n_fine == 0 {
        return Err(Error::invalid("n", "grid density must be at least 1"));
    }
    let horizon = problem.horizon();
    let key = |role| StreamKey::new(sample_index, level, role);
    let refined = lcm(n_fine, n_coarse);
    let shared_wiener =
        sample_wiener_increments(&mut derive_stream(master_seed, key(StreamRole::Wiener)), refined, m_fine, horizon)?;
    Ok(CoupledNoise {
        shared_wiener,
        shared_jumps: sample_problem_jumps(problem, master_seed, sample_index, level)?,
        theta_fine: sample_thetas(&mut derive_stream(master_seed, key(StreamRole::ThetaFine)), n_fine, horizon),
        theta_coarse: sample_thetas(&mut derive_stream(master_seed, key(StreamRole::ThetaCoarse)), n_coarse, horizon),
        initial: sample_initial(problem, master_seed, sample_index, level),
    })
}
