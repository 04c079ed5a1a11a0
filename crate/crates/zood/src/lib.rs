//! Ranking zoos of pre-trained feature extractors for out-of-distribution
//! generalization, and selecting informative features from their ensembles.
//!
//! Everything operates on precomputed feature matrices. The pieces:
//!
//! - [`evidence`] — Bayesian linear regression evidence and its fixed-point
//!   hyper-parameter maximization.
//! - [`ranking`] — leave-one-domain-out transferability scores built from
//!   correlation-shift and covariate-shift log densities.
//! - [`select`] — spike-and-slab feature selection by stochastic
//!   variational EM, plus ensemble concatenation and masking.
//! - [`metrics`] — Kendall tau, weighted tau, and TPR/FPR.
//! - [`synth`] — seeded synthetic generators for the regression and
//!   multi-domain study designs.
//! - [`io`] — feature bundle encodings, zoo manifests, and the embedded
//!   score fixtures.
//! - [`cli`] — the `zood` command implementations.

pub mod cli;
pub mod evidence;
pub mod io;
pub mod metrics;
pub mod ranking;
pub mod select;
pub mod synth;

/// Dense column-major f64 matrix used throughout.
pub type Matrix = nalgebra::DMatrix<f64>;
/// Dense f64 column vector used throughout.
pub type Vector = nalgebra::DVector<f64>;

pub(crate) const LN_2PI: f64 = 1.837_877_066_409_345_3;
