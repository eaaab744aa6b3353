use alloc::vec;
use alloc::vec::Vec;

use super::ks::{ks_statistic, ks_threshold};
use super::{BaselineResult, Method};
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::linalg::{cholesky, sym_eigendecompose, SymEigen};
use crate::lmmd::{order_index, order_statistic};
use crate::par::{map_indices, Timer};
use crate::rng::{derive_seed, normal_cdf, tag, Stream};
use crate::sample::{dot, Sample};

const MAX_DIRECTION_RETRIES: usize = 100;

/// Data and null law seen through one-dimensional projections.
///
/// A direction is an opaque vector understood by the model: a point of `ℝᵈ`
/// for [`EuclideanProjections`], or the values of a Gaussian-process draw on
/// the sample for [`KernelProjections`].
pub trait ProjectionModel: Sync {
    fn n(&self) -> usize;
    fn sample_direction(&self, rng: &mut Stream) -> Vec<f64>;
    /// `<h, Y_i>` for every observation.
    fn project(&self, direction: &[f64]) -> Vec<f64>;
    /// Mean of `<h, Z>` under the null.
    fn null_mean(&self, direction: &[f64]) -> f64;
    /// `Cov(<h_a, Z>, <h_b, Z>)` under the null.
    fn null_cov(&self, a: &[f64], b: &[f64]) -> f64;
}

/// Law of random directions in `ℝᵈ`.
#[derive(Debug, Clone, PartialEq)]
pub enum DirectionLaw {
    /// `N(0, diag(1, 1/4, …, 1/d²))`
    DecayingDiagonal,
    /// `N(0, diag(s₁², …, s_d²))`
    Diagonal(Vec<f64>),
}

/// Observations in `ℝᵈ` against a Gaussian null `N(m, S)`.
#[derive(Debug, Clone)]
pub struct EuclideanProjections<'a> {
    points: &'a Sample,
    scales: Vec<f64>,
    null_mean: Vec<f64>,
    null_cov: Vec<f64>,
}

impl<'a> EuclideanProjections<'a> {
    /// Null with the given mean and full `d × d` covariance (row-major).
    pub fn new(points: &'a Sample, law: DirectionLaw, null_mean: Vec<f64>, null_cov: Vec<f64>) -> Result<Self> {
        let d = points.dim();
        if null_mean.len() != d || null_cov.len() != d * d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: null_mean.len(),
            });
        }
        let scales = match law {
            DirectionLaw::DecayingDiagonal => (1..=d).map(|r| 1.0 / r as f64).collect(),
            DirectionLaw::Diagonal(s) if s.len() == d => s,
            DirectionLaw::Diagonal(s) => {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: s.len(),
                })
            }
        };
        Ok(EuclideanProjections {
            points,
            scales,
            null_mean,
            null_cov,
        })
    }

    /// Null `N(m, diag(variances))`.
    pub fn diagonal_null(
        points: &'a Sample,
        law: DirectionLaw,
        null_mean: Vec<f64>,
        variances: &[f64],
    ) -> Result<Self> {
        let d = variances.len();
        let mut cov = vec![0.0; d * d];
        for (i, v) in variances.iter().enumerate() {
            cov[i * d + i] = *v;
        }
        Self::new(points, law, null_mean, cov)
    }

    /// Plug-in null `N(μ̂, Σ̂)`.
    pub fn empirical_null(points: &'a Sample, law: DirectionLaw) -> Result<Self> {
        Self::new(points, law, points.mean(), points.covariance())
    }
}

impl ProjectionModel for EuclideanProjections<'_> {
    fn n(&self) -> usize {
        self.points.n()
    }

    fn sample_direction(&self, rng: &mut Stream) -> Vec<f64> {
        self.scales.iter().map(|s| s * rng.normal()).collect()
    }

    fn project(&self, h: &[f64]) -> Vec<f64> {
        self.points.rows().map(|x| dot(x, h)).collect()
    }

    fn null_mean(&self, h: &[f64]) -> f64 {
        dot(&self.null_mean, h)
    }

    fn null_cov(&self, a: &[f64], b: &[f64]) -> f64 {
        let d = a.len();
        (0..d).map(|i| a[i] * dot(&self.null_cov[i * d..(i + 1) * d], b)).sum()
    }
}

/// Observations embedded by a kernel, against the plug-in Gaussian null of
/// their feature-space mean and covariance.
///
/// Directions are zero-mean Gaussian processes with covariance `k`, drawn on
/// the sample through the eigendecomposition of the Gram matrix, and the
/// projection of `k(X_i, ·)` on `h` is `h(X_i)`.
#[derive(Debug, Clone)]
pub struct KernelProjections {
    eigen: SymEigen,
    scales: Vec<f64>,
}

impl KernelProjections {
    pub fn new(kernel: &KernelSpec, points: &Sample) -> Result<Self> {
        let k = crate::kernel::gram_matrix(kernel, points)?;
        let eigen = sym_eigendecompose(&k)?;
        let scales = eigen.values.iter().map(|v| libm::sqrt(v.max(0.0))).collect();
        Ok(KernelProjections { eigen, scales })
    }
}

impl ProjectionModel for KernelProjections {
    fn n(&self) -> usize {
        self.eigen.n()
    }

    fn sample_direction(&self, rng: &mut Stream) -> Vec<f64> {
        let n = self.eigen.n();
        let mut h = vec![0.0; n];
        for (j, s) in self.scales.iter().enumerate() {
            let g = s * rng.normal();
            if g != 0.0 {
                for (hi, vi) in h.iter_mut().zip(self.eigen.vector(j)) {
                    *hi += g * vi;
                }
            }
        }
        h
    }

    fn project(&self, h: &[f64]) -> Vec<f64> {
        h.to_vec()
    }

    fn null_mean(&self, h: &[f64]) -> f64 {
        h.iter().sum::<f64>() / h.len() as f64
    }

    fn null_cov(&self, a: &[f64], b: &[f64]) -> f64 {
        let (ma, mb) = (self.null_mean(a), self.null_mean(b));
        a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / a.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionConfig {
    pub n_directions: usize,
    pub alpha: f64,
    /// Monte-Carlo replicates for the threshold when `n_directions ≥ 2`.
    pub mc_replicates: usize,
    pub seed: u64,
    pub parallel: bool,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        ProjectionConfig {
            n_directions: 1,
            alpha: 0.05,
            mc_replicates: 250,
            seed: 0,
            parallel: true,
        }
    }
}

/// Largest KS distance between projected data and projected null over random
/// directions. One direction uses the distribution-free Kolmogorov threshold;
/// several use the order statistic of Monte-Carlo replicates of the maximum.
pub fn random_projection_test(model: &dyn ProjectionModel, config: &ProjectionConfig) -> Result<BaselineResult> {
    let timer = Timer::start();
    if config.n_directions == 0 {
        return Err(Error::Config("at least one projection direction is required".into()));
    }
    let n = model.n();
    let mut rng = Stream::new(derive_seed(config.seed, tag::DIRECTIONS));
    let mut directions = Vec::with_capacity(config.n_directions);
    let mut sds = Vec::with_capacity(config.n_directions);
    for _ in 0..config.n_directions {
        let mut tries = 0;
        loop {
            let h = model.sample_direction(&mut rng);
            let var = model.null_cov(&h, &h);
            if var > 1e-300 && var.is_finite() {
                sds.push(libm::sqrt(var));
                directions.push(h);
                break;
            }
            tries += 1;
            if tries >= MAX_DIRECTION_RETRIES {
                return Err(Error::Domain(alloc::format!(
                    "no direction with nonzero null variance after {MAX_DIRECTION_RETRIES} draws"
                )));
            }
        }
    }

    let mut statistic: f64 = 0.0;
    for (h, sd) in directions.iter().zip(&sds) {
        let mean = model.null_mean(h);
        let mut z: Vec<f64> = model.project(h).iter().map(|v| (v - mean) / sd).collect();
        z.sort_by(|a, b| a.total_cmp(b));
        statistic = statistic.max(ks_statistic(&z, normal_cdf)?);
    }

    let threshold = if config.n_directions == 1 {
        ks_threshold(n, config.alpha)?
    } else {
        let ell = order_index(config.alpha, config.mc_replicates)?;
        let k = directions.len();
        let mut corr = vec![0.0; k * k];
        for a in 0..k {
            for b in 0..k {
                corr[a * k + b] = model.null_cov(&directions[a], &directions[b]) / (sds[a] * sds[b]);
            }
        }
        let chol = cholesky_with_jitter(&corr, k)?;
        let seed = derive_seed(config.seed, tag::QUANTILE);
        let reps = map_indices(config.mc_replicates, config.parallel, |b| {
            max_ks_under_null(&chol, k, n, &mut Stream::derived(seed, b as u64))
        })?;
        order_statistic(reps, ell)
    };
    Ok(BaselineResult::new(
        Method::RandomProjection,
        statistic,
        threshold,
        config.seed,
        timer.elapsed(),
    ))
}

fn cholesky_with_jitter(corr: &[f64], k: usize) -> Result<Vec<f64>> {
    let mut jitter = 0.0;
    for _ in 0..8 {
        let mut m = corr.to_vec();
        for i in 0..k {
            m[i * k + i] += jitter;
        }
        if let Ok(l) = cholesky(&m, k) {
            return Ok(l);
        }
        jitter = if jitter == 0.0 { 1e-10 } else { jitter * 100.0 };
    }
    Err(Error::Domain(
        "projection correlation matrix is not positive definite".into(),
    ))
}

fn max_ks_under_null(chol: &[f64], k: usize, n: usize, rng: &mut Stream) -> Result<f64> {
    let mut cols = vec![Vec::with_capacity(n); k];
    let mut g = vec![0.0; k];
    for _ in 0..n {
        rng.fill_normal(&mut g);
        for (a, col) in cols.iter_mut().enumerate() {
            col.push(dot(&chol[a * k..a * k + a + 1], &g[..a + 1]));
        }
    }
    let mut worst: f64 = 0.0;
    for col in &mut cols {
        col.sort_by(|a, b| a.total_cmp(b));
        worst = worst.max(ks_statistic(col, normal_cdf)?);
    }
    Ok(worst)
}
