use alloc::vec;
use alloc::vec::Vec;

use super::{BaselineResult, Method};
use crate::error::{Error, Result, StepExt};
use crate::kernel::{center_gram, KernelSpec};
use crate::linalg::{sym_eigenvalues, SymMatrix};
use crate::lmmd::{observed_statistic, order_index, order_statistic, significant_eigenvalues, EXP_LIMIT};
use crate::null::{CovarianceSpec, DEFAULT_RESCALE_TARGET};
use crate::par::Timer;
use crate::rng::{derive_seed, tag, Stream};
use crate::sample::dot;

/// Order-statistic `1 − α` quantile of `n_draws` variates of `Σ_r ν_r (χ²₁ − 1)`.
pub fn lmmda_quantile(weights: &[f64], alpha: f64, n_draws: usize, seed: u64) -> Result<f64> {
    if weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::Input("chi-square weights must be ≥ 0".into()));
    }
    let ell = order_index(alpha, n_draws)?;
    let weights: Vec<f64> = weights.iter().copied().filter(|&w| w > 0.0).collect();
    if weights.is_empty() {
        return Ok(0.0);
    }
    let mut rng = Stream::new(seed);
    let draws: Vec<f64> = (0..n_draws)
        .map(|_| {
            weights
                .iter()
                .map(|w| {
                    let g = rng.normal();
                    w * (g * g - 1.0)
                })
                .sum()
        })
        .collect();
    Ok(order_statistic(draws, ell))
}

/// Weights of the asymptotic null law of `n·L̂²`: the spectrum of the centered
/// Gram matrix of `exp(<·,·>)` on `n_ref` null draws, divided by `n_ref`.
///
/// Null draws are represented by their coordinates `λ^{1/2} ⊙ G` in the
/// eigenbasis of the covariance, which determine every inner product.
pub fn lmmda_spectrum(eigenvalues: &[f64], n_ref: usize, seed: u64) -> Result<Vec<f64>> {
    if n_ref < 2 {
        return Err(Error::Input("the reference sample needs at least 2 points".into()));
    }
    let d = eigenvalues.len();
    let scale: Vec<f64> = eigenvalues.iter().map(|l| libm::sqrt(*l)).collect();
    let mut rng = Stream::new(seed);
    let mut w = vec![0.0; n_ref * d];
    if d > 0 {
        for row in w.chunks_exact_mut(d) {
            for (x, s) in row.iter_mut().zip(&scale) {
                *x = s * rng.normal();
            }
        }
    }
    let row = |i: usize| &w[i * d..(i + 1) * d];
    let mut overflow = None;
    let gram = SymMatrix::from_fn(n_ref, |i, j| {
        let v = dot(row(i), row(j));
        if v > EXP_LIMIT {
            overflow = Some(v);
        }
        libm::exp(v)
    });
    if let Some(value) = overflow {
        return Err(Error::Overflow {
            value,
            limit: EXP_LIMIT,
        });
    }
    let mut values = sym_eigenvalues(&center_gram(&gram))?;
    let inv = 1.0 / n_ref as f64;
    values.iter_mut().for_each(|v| *v = (*v * inv).max(0.0));
    Ok(values)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmmdaConfig {
    pub alpha: f64,
    /// Variates drawn from the weighted chi-square law.
    pub draws: usize,
    pub seed: u64,
    pub rescale_target: f64,
    pub eigen_rel_tol: f64,
}

impl Default for LmmdaConfig {
    fn default() -> Self {
        LmmdaConfig {
            alpha: 0.05,
            draws: 250,
            seed: 0,
            rescale_target: DEFAULT_RESCALE_TARGET,
            eigen_rel_tol: 1e-12,
        }
    }
}

/// Asymptotic threshold for a sample of size `n` under the (rescaled) null spectrum.
pub fn lmmda_threshold(eigenvalues: &[f64], n: usize, config: &LmmdaConfig) -> Result<f64> {
    let eig = significant_eigenvalues(eigenvalues, config.eigen_rel_tol);
    let weights = lmmda_spectrum(&eig, n, derive_seed(config.seed, tag::REFERENCE))?;
    lmmda_quantile(
        &weights,
        config.alpha,
        config.draws,
        derive_seed(config.seed, tag::QUANTILE),
    )
}

/// The L-MMD statistic compared with the asymptotic weighted chi-square quantile.
pub fn lmmda_test(
    points: &crate::Sample,
    kernel: &KernelSpec,
    cov: &CovarianceSpec,
    config: &LmmdaConfig,
) -> Result<BaselineResult> {
    order_index(config.alpha, config.draws).step("configuration")?;
    let timer = Timer::start();
    let (statistic, null) = observed_statistic(points, kernel, cov, config.rescale_target)?;
    let threshold = lmmda_threshold(&null.eigenvalues, points.n(), config).step("asymptotic quantile")?;
    Ok(BaselineResult::new(
        Method::Lmmda,
        statistic,
        threshold,
        config.seed,
        timer.elapsed(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_spectrum() {
        assert_eq!(lmmda_quantile(&[0.0], 0.05, 99, 1).unwrap(), 0.0);
        assert_eq!(lmmda_quantile(&[], 0.05, 99, 1).unwrap(), 0.0);
    }

    #[test]
    fn single_weight_is_a_shifted_chi_square() {
        // χ²₁ upper 5% point is 3.841459
        let q = lmmda_quantile(&[1.0], 0.05, 100_000, 7).unwrap();
        assert!((q - 2.841_459).abs() < 0.1, "{q}");
    }

    #[test]
    fn quantile_grows_as_alpha_shrinks() {
        let w = [0.6, 0.3, 0.1];
        let mut prev = f64::NEG_INFINITY;
        for alpha in [0.2, 0.1, 0.05, 0.02, 0.01] {
            let q = lmmda_quantile(&w, alpha, 5000, 3).unwrap();
            assert!(q >= prev);
            prev = q;
        }
    }

    #[test]
    fn spectrum_of_trivial_null() {
        // exp(0) = 1 everywhere: centered Gram vanishes
        let w = lmmda_spectrum(&[], 10, 1).unwrap();
        assert!(w.iter().all(|v| *v == 0.0));
        let w = lmmda_spectrum(&[0.5, 0.2], 200, 1).unwrap();
        assert!(w[0] > 0.0);
    }
}
