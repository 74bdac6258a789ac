//! Regression over noisy feature vectors, regularized by an unsupervised
//! denoising loss built on an unbiased risk estimate, together with the
//! verification machinery that makes the construction checkable end to end:
//!
//! - [`data`]: CSV ingestion, synthetic datasets with known clean signal,
//!   the additive-Gaussian corruption model, deterministic splits
//! - [`nnkit`]: dense layers, ReLU, hand-derived reverse-mode gradients, an
//!   adaptive-moment optimizer, finite-difference gradient checks
//! - [`sure`]: the clean-signal MSE oracle, the exact risk estimate via the
//!   Jacobian trace, its Monte-Carlo probe approximation, the training loss
//! - [`red`]: the joint denoise-then-regress pipeline
//! - [`baselines`]: mean/median kernel denoisers and plain regression
//! - [`metrics`]: RMSE / MAE / Pearson correlation and subgroup reports
//! - [`analysis`]: noise-as-weight-decay checks and feature-space entropy
//! - [`checkpoint`]: the JSON model format

pub mod analysis;
pub mod baselines;
pub mod checkpoint;
pub mod data;
pub mod error;
pub mod fsutil;
pub mod metrics;
pub mod nnkit;
pub mod red;
pub mod sure;
pub mod verify;

pub use error::{Error, Result};
