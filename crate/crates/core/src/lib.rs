//! Kernelised linear test-statistics.
//!
//! A linear statistic `S(ω) = Σᵢ cᵢ ω(tᵢ)` evaluated over the unit ball of a
//! reproducing kernel Hilbert space has supremum `Ψ = sup S(ω)² = cᵀ K c`,
//! where `K` is the Gram matrix of the evaluation points. Every test in this
//! crate is built on that identity:
//!
//! | Module | Test |
//! |--------|------|
//! | [`mmd`] | two-sample maximum mean discrepancy |
//! | [`logrank`] | kernel log-rank test for right-censored data |
//! | [`gcm`] | kernelised generalised covariance measure (conditional independence) |
//!
//! All three are calibrated by the wild bootstrap in [`bootstrap`]. The
//! [`spectrum`] module estimates the eigenvalues of the weighted chi-square
//! null limit from bootstrap representers, and [`simlab`] runs the
//! rejection-rate experiments.

pub mod bootstrap;
pub mod cli;
pub mod error;
pub mod functional;
pub mod gcm;
pub mod kernels;
pub mod logrank;
pub mod mmd;
pub mod points;
pub mod simlab;
pub mod spectrum;

pub use bootstrap::{calibrate, BootstrapConfig, RngStream, TestReport, WeightScheme};
pub use error::{Error, Result};
pub use functional::PointMassFunctional;
pub use kernels::{KernelFamily, KernelSpec, LengthscaleRule};
pub use points::Points;
