//! Q-measure learning for continuous-state discounted MDPs.
//!
//! The learner represents its Q estimate as the ratio of two kernel
//! integrals, `q(z) = int k(z,u) nu(du) / int k(z,u) mu(du)`, where `mu` is
//! the empirical state-action distribution of a single behavior trajectory
//! and `nu` is a signed measure updated by stochastic approximation. Both
//! measures grow by one atom per step.
//!
//! Module map:
//!
//! * [`kernel`]: Gaussian-type kernels and the grid-approximated kernel metrics.
//! * [`measure`]: weighted measures with O(1) rescaling and `q` reconstruction.
//! * [`learner`]: the training loop and greedy maximization.
//! * [`env`]: environments (two-item inventory, discrete test MDPs).
//! * [`benchmark`]: grid dynamic programming, the smoothed Bellman fixed point
//!   and the smoothing-bias functional.
//! * [`eval`]: Monte Carlo returns, RMSE against a table, visitation histograms.
//! * [`checkpoint`]: binary learner checkpoints and DP table files.
//! * [`config`], [`run`], [`report`]: run configuration, the experiment
//!   commands and their CSV output.
//! * [`rng`]: named random streams derived from one master seed.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod error;
pub mod kernel;
pub mod measure;
pub mod learner;
pub mod env;
pub mod rng;
pub mod benchmark;
pub mod eval;
pub mod checkpoint;
pub mod config;
pub mod report;
pub mod run;

pub use error::{Error, Result};
