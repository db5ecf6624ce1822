//! TimeFlow: continuous-time modeling of multi-sample univariate time
//! series with a shift-modulated implicit neural representation trained by
//! a second-order inner/outer meta-learning loop.
//!
//! The model represents each series as a continuous function of a time
//! coordinate t ∈ [0, 1]. A shared Fourier-features MLP is specialized to
//! one sample by per-layer shift modulations, produced linearly from a
//! per-sample latent code. Codes are always re-derived from zero by a few
//! gradient steps on the observed points (the inner loop); the shared
//! weights are trained by differentiating through those steps (the outer
//! loop). Because the representation is a function of time rather than a
//! grid, imputation on irregular grids and long-horizon forecasting are the
//! same operation: adapt a code on what was observed, then query wherever
//! values are needed.
//!
//! Crate layout:
//! - [`autodiff`] — tape-based reverse-mode differentiation with nested
//!   (second-order) backward passes;
//! - [`model`] — the Fourier-features network, the linear hypernetwork and
//!   the modulated forward pass;
//! - [`meta`] — inner-loop code adaptation, the two-term outer objective,
//!   Adam, cosine annealing and the training driver;
//! - [`tasks`] — imputation/forecasting task construction and inference;
//! - [`data`] — CSV ingestion, z-normalization, window splitting and a
//!   synthetic generator;
//! - [`baselines`] — linear interpolation, cross-sample KNN, Repeat;
//! - [`eval`] — masked MAE, report aggregation, result emission;
//! - [`persist`] — checkpoint serialization;
//! - [`config`] / [`cli`] — run configuration and the command-line driver.

pub mod autodiff;
pub mod baselines;
pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod meta;
pub mod model;
pub mod persist;
pub mod rng;
pub mod tasks;

pub use error::{Error, Result};
