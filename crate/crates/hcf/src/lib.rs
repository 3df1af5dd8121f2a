//! Heterogeneous conditional forecaster: probabilistic multi-horizon
//! prediction of evenly-sampled time-series conditioned jointly on the past
//! series and an asynchronous, typed event sequence.
//!
//! The crate is a library first; see the `examples/` directory for one
//! runnable program per capability and the thin `hcf` binary for the
//! file-based command-line workflow (`synth`, `extract-events`, `train`,
//! `forecast`, `evaluate`).
//!
//! Layout:
//! - [`tensor`], [`tape`], [`params`], [`gaussian`], [`gradcheck`]: dense
//!   f64 tensors, reverse-mode autodiff, Adam, and Gaussian primitives.
//! - [`data`]: loading, event extraction, temporal features, standardization,
//!   windowing, event alignment, and synthetic data generation.
//! - [`model`]: the hybrid recurrent encoders, latent heads, stochastic
//!   decoder, the variational objective, and the training loop.
//! - [`forecast`]: Monte-Carlo forecast ensembles with quantile summaries.
//! - [`metrics`]: CRPS, RMSE, MAE, coverage, and calibration scores.
//! - [`config`], [`cli`]: run configuration and the command-line front end.

pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod forecast;
pub mod gaussian;
pub mod gradcheck;
pub mod metrics;
pub mod model;
pub mod params;
pub mod rng;
pub mod tape;
pub mod tensor;

pub use error::{Error, Result};
pub use gaussian::DiagGaussian;
pub use params::ParameterStore;
pub use rng::StreamRng;
pub use tape::{Tape, Var};
pub use tensor::Tensor;
