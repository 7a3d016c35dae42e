//! Analytic and numerical tools for class-imbalanced Gaussian mixture classification.
//!
//! The crate covers closed-form error predictions for margin-adjusted,
//! logit-adjusted and class-dependent-temperature classifiers, exact margin
//! solvers, gradient descent on the matching losses, and evaluation helpers.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod error;
pub mod evaluation;
pub mod experiments;
pub mod gd;
pub mod kernel_lab;
pub mod margin;
pub mod model;
pub mod mvn;
pub mod qp;
pub mod rng;
pub mod sampler;
pub mod special;
pub mod tuners;

pub use error::{Error, Result};
