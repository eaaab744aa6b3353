//! Comparison procedures: random projections with Kolmogorov-Smirnov, the
//! asymptotic weighted chi-square calibration of the L-MMD statistic
//! (L-MMDa), Henze-Zirkler, and an energy-distance test.
//!
//! Henze-Zirkler and the energy test standardize the data with its empirical
//! mean and covariance, so their null law only depends on `(n, d)`. Their
//! thresholds are order statistics of Monte-Carlo replicates computed on
//! standard normal samples, and may be computed once per `(n, d)` and reused.

use core::time::Duration;

mod energy;
mod hz;
mod ks;
mod lmmda;
mod projection;

pub use energy::{
    energy_null_threshold, energy_statistic, energy_test, energy_test_with_threshold, EnergyNorm, MIN_NULL_DRAWS,
};
pub use hz::{hz_beta, hz_null_threshold, hz_statistic, hz_test, hz_test_with_threshold, standardize};
pub use ks::{kolmogorov_critical_value, kolmogorov_sf, ks_statistic, ks_threshold, two_sample_ks, TwoSampleKs};
pub use lmmda::{lmmda_quantile, lmmda_spectrum, lmmda_test, lmmda_threshold, LmmdaConfig};
pub use projection::{
    random_projection_test, DirectionLaw, EuclideanProjections, KernelProjections, ProjectionConfig, ProjectionModel,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    RandomProjection,
    Lmmda,
    HenzeZirkler,
    EnergyDistance,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::RandomProjection => "RP",
            Method::Lmmda => "LMMDa",
            Method::HenzeZirkler => "HZ",
            Method::EnergyDistance => "ED",
        }
    }
}

/// Monte-Carlo calibration of a parameter-free null law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub alpha: f64,
    pub replicates: usize,
    pub seed: u64,
    pub parallel: bool,
}

impl Default for Calibration {
    fn default() -> Self {
        Calibration {
            alpha: 0.05,
            replicates: 250,
            seed: 0,
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineResult {
    pub method: Method,
    pub statistic: f64,
    pub threshold: f64,
    /// `statistic > threshold`
    pub reject: bool,
    pub seed: u64,
    pub elapsed: Duration,
}

impl BaselineResult {
    pub(crate) fn new(method: Method, statistic: f64, threshold: f64, seed: u64, elapsed: Duration) -> Self {
        BaselineResult {
            method,
            statistic,
            threshold,
            reject: statistic > threshold,
            seed,
            elapsed,
        }
    }
}
