//! Weak approximation of `E[f(X(T))]` for jump-diffusion SDEs driven by a
//! countably dimensional Wiener process and a finite-activity Poisson random
//! measure.
//!
//! The building blocks are:
//!
//! * [`noise`]: keyed, counter-based random streams and the sampling of
//!   Wiener increments, jumps and randomized evaluation points, including the
//!   coupling of fine and coarse levels.
//! * [`sde`]: the problem description (coefficients `a`, `b^(j)`, `c`, the
//!   initial value and the jump measure), the truncation function `δ`,
//!   payoffs and the bundled Merton model with its closed-form solution.
//! * [`scheme`]: the truncated-dimension randomized Euler scheme with
//!   informational cost accounting.
//! * [`estimators`]: the standard Monte Carlo estimator and the adaptive
//!   multilevel estimator with level schedules in both the grid density and
//!   the truncation dimension.
//! * [`experiment`]: reference values, empirical errors, ε-sweeps and
//!   log-log regression.
//! * [`cli`]: configuration and the command-line front end.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod estimators;
pub mod experiment;
pub mod noise;
pub mod scheme;
pub mod sde;

mod util;

pub use error::{Error, Result};
