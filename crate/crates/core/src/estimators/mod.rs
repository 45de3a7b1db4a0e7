//! Standard and multilevel Monte Carlo estimators of `E[f(X(T))]`.

mod mc;
mod mlmc;
mod sampling;
mod schedule;
mod stats;

pub use mc::{mc_params, run_mc, McParams};
pub use mlmc::{run_mlmc, MlmcCaps, PROBE_SAMPLES};
pub use sampling::{sample_level, LevelSample};
pub use schedule::LevelSchedule;
pub use stats::{convergence_error, optimal_kl, EstimateReport, LevelStats};
