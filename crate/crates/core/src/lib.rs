//! Differentially private, adversarially robust sparse mean estimation.
//!
//! The crate is organised bottom-up:
//!
//! * [`noise`]: seeded streams and Laplace / Gaussian sampling.
//! * [`mechanisms`]: privacy budgets, the Laplace and exponential mechanisms,
//!   and group-privacy robustness calculators.
//! * [`data`]: datasets, synthetic generation, bucketing, sparsification and
//!   contamination adversaries.
//! * [`kv`]: univariate private mean estimation.
//! * [`threshold`]: the linear-time thresholding estimator.
//! * [`subset`]: the exponential-time subset-selection estimator.
//! * [`baselines`]: noisy peeling and the non-private top-k baseline.
//! * [`harness`]: experiments, robustness checks and CSV output.

// `!(x > 0.0)` is the NaN-rejecting parameter check used throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod data;
pub mod error;
pub mod harness;
pub mod kv;
pub mod mechanisms;
pub mod noise;
pub mod subset;
pub mod threshold;

pub use error::{Error, Result};
