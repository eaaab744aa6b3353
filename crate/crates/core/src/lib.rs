//! Finite-sample normality testing in a reproducing kernel Hilbert space.
//!
//! The crate implements the Laplace-MMD (L-MMD) goodness-of-fit test for a
//! Gaussian null `N(0, Σ)` on the feature space of a kernel `k`. The statistic
//! compares the mean embeddings of the sample and of the null under the
//! exponential kernel `exp(<·,·>)`, and its rejection threshold is the
//! order-statistic quantile of `B` Monte-Carlo replicates simulated directly
//! from the null covariance spectrum.
//!
//! Alongside the test itself the crate ships the usual comparison procedures
//! (random projections with Kolmogorov-Smirnov, an asymptotic weighted
//! chi-square variant of L-MMD, Henze-Zirkler and an energy-distance test)
//! and seeded generators for the synthetic Gaussian laws used to study them.
//!
//! | Module | Purpose |
//! |--------|---------|
//! | [`kernel`] | kernels, Gram matrices, double centering |
//! | [`linalg`] | dense symmetric matrices, eigendecomposition, Cholesky |
//! | [`null`] | Gaussian null model: covariance spectrum, `b²`, rescaling |
//! | [`lmmd`] | statistic, null simulation, quantile, decision, error bounds |
//! | [`baselines`] | RP+KS, L-MMDa, Henze-Zirkler, energy distance |
//! | [`synthetic`] | seeded Gaussian and mixture samplers |
//! | [`rng`] | seed derivation and inverse-CDF normal variates |
//!
//! The crate is `no_std` (it needs `alloc`). The default `std` feature adds
//! rayon-backed parallel replicate evaluation and wall-clock timings; results
//! are bit-identical with or without it.
//!
//! ```
//! use kernorm_core::{kernel::KernelSpec, lmmd::{run_test, LmmdConfig}, null::CovarianceSpec};
//! use kernorm_core::synthetic::{sample_gaussian, GaussianSpec};
//!
//! let null = GaussianSpec::new(0.0, 0.5, 3).unwrap();
//! let data = sample_gaussian(&null, 100, 7);
//! let cov = CovarianceSpec::diagonal(null.variances()).unwrap();
//! let config = LmmdConfig { alpha: 0.05, replicates: 99, seed: 11, ..LmmdConfig::default() };
//! let result = run_test(&data, &KernelSpec::Linear, &cov, &config).unwrap();
//! assert_eq!(result.reject, result.statistic > result.threshold);
//! ```

#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > y)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod baselines;
pub mod error;
pub mod kernel;
pub mod linalg;
pub mod lmmd;
pub mod null;
pub mod rng;
pub mod sample;
pub mod synthetic;

mod par;

pub use error::{Error, ErrorKind, Result};
pub use sample::Sample;
