//! Classification lab comparing exponential classifier components (Gaussian
//! LDA, softmax) against their polynomial substitutes (Student-t LDA, the
//! softRmax activation), together with the gradient-based attack harness and
//! robustness metrics used to evaluate them.
//!
//! The crate is organized by subsystem:
//!
//! - [`numeric`]: dense matrices, seeded splittable randomness, and the
//!   finite-difference gradient checker used throughout the test suites.
//! - [`distributions`]: Gaussian / Student-t / Cauchy densities and their
//!   maximum-likelihood fitting (EM for the t family).
//! - [`generative`]: Bayes-rule generative classifiers with pluggable
//!   class-conditional families.
//! - [`activations`]: softmax and softRmax maps, their analytic Jacobians, and
//!   the negative-log-posterior loss.
//! - [`models`]: small fully-connected networks with manual backprop and
//!   SGD+momentum training, with either activation as the posterior head.
//! - [`attacks`]: FGSM, targeted FGSM, BIM, the model-free average-sample
//!   attack, and a black-box substitute attack.
//! - [`metrics`]: prediction margin, magnitude-margin ratio, tail posterior
//!   probes, and misclassification histograms.
//! - [`shift`]: covariate-shift importance weighting with Gaussian vs.
//!   Student-t density-ratio estimation.
//! - [`data`]: synthetic dataset generators and a bit-exact IDX reader/writer.

pub mod activations;
pub mod attacks;
pub mod checkpoint;
pub mod data;
pub mod distributions;
pub mod generative;
pub mod metrics;
pub mod models;
pub mod numeric;
pub mod shift;

mod error;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
