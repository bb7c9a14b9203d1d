//! Discriminative conditional VAE classifiers over a two-level label
//! hierarchy (category -> group), built on a small reverse-mode autodiff
//! tape.
//!
//! The crate is organized bottom-up:
//!
//! - [`autodiff`]: dense tensors, the differentiation graph, and a
//!   finite-difference gradient checker.
//! - [`nn`]: embedding / LSTM / MLP building blocks, Gaussian latent
//!   utilities, BCE loss, Adam, parameter init, and the checkpoint format.
//! - [`data`]: corpus I/O, vocabulary, label hierarchy, splits, the
//!   weighted group sampler, and a synthetic corpus generator.
//! - [`metrics`]: macro/micro/weighted F1, confusion fractions, heatmap
//!   difference analysis.
//! - [`models`]: the four model variants (Bi-LSTM, CVAE, HCVAE, upper
//!   bound) with training and prior-substitution test paths.
//! - [`exp`]: training loop, evaluation, and the complete-vs-subset
//!   comparison harness.

pub mod autodiff;
pub mod config;
pub mod data;
pub mod error;
pub mod exp;
pub mod metrics;
pub mod models;
pub mod nn;

pub use error::CoreError;
