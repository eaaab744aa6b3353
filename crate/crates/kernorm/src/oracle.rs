//! Brute-force validation suites behind `kernorm oracle`.

use kernorm_core::baselines::two_sample_ks;
use kernorm_core::kernel::{gram_matrix, KernelSpec};
use kernorm_core::lmmd::{
    estimate_quantile, lmmd_statistic, run_test, simulate_null_replicates, type1_bounds, LmmdConfig,
};
use kernorm_core::null::{null_norm_sq, CovarianceSpec};
use kernorm_core::rng::{derive_seed, Stream};
use kernorm_core::synthetic::{sample_gaussian, GaussianSpec};
use kernorm_core::Sample;
use rayon::prelude::*;

use crate::error::{HarnessError, Result};

pub const SUITES: &[&str] = &["norm", "sampler", "quantile", "unbiased", "type1"];

#[derive(Debug, Clone, PartialEq)]
pub struct OracleOutcome {
    pub suite: &'static str,
    pub passed: bool,
    pub detail: String,
}

pub fn run_suite(name: &str, seed: u64) -> Result<OracleOutcome> {
    match name {
        "norm" => norm(seed),
        "sampler" => sampler(seed),
        "quantile" => quantile(seed),
        "unbiased" => unbiased(seed),
        "type1" => type1(seed),
        other => Err(HarnessError::Config(format!(
            "unknown oracle suite '{other}'; available: {}",
            SUITES.join(", ")
        ))),
    }
}

/// Determinant of a dense matrix by Gaussian elimination with partial pivoting.
pub fn determinant(mut a: Vec<f64>, d: usize) -> f64 {
    let mut det = 1.0;
    for c in 0..d {
        let p = (c..d)
            .max_by(|&i, &j| a[i * d + c].abs().total_cmp(&a[j * d + c].abs()))
            .unwrap_or(c);
        if a[p * d + c] == 0.0 {
            return 0.0;
        }
        if p != c {
            for k in 0..d {
                a.swap(p * d + k, c * d + k);
            }
            det = -det;
        }
        let pivot = a[c * d + c];
        det *= pivot;
        for r in c + 1..d {
            let f = a[r * d + c] / pivot;
            for k in c..d {
                a[r * d + k] -= f * a[c * d + k];
            }
        }
    }
    det
}

fn norm(seed: u64) -> Result<OracleOutcome> {
    let mut rng = Stream::new(seed);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let d = 1 + (rng.uniform() * 8.0) as usize;
        let mut eig: Vec<f64> = (0..d).map(|_| 0.95 * rng.uniform()).collect();
        let mut m = vec![0.0; d * d];
        for (i, l) in eig.iter().enumerate() {
            m[i * d + i] = 1.0 - l * l;
        }
        let direct = determinant(m, d).powf(-0.5);
        eig.sort_by(|a, b| b.total_cmp(a));
        let value = null_norm_sq(&eig)?;
        worst = worst.max((value - direct).abs() / direct);
    }
    Ok(OracleOutcome {
        suite: "norm",
        passed: worst <= 1e-10,
        detail: format!("max relative error {worst:.3e} over 100 spectra"),
    })
}

fn sampler(seed: u64) -> Result<OracleOutcome> {
    let eig = [0.5, 0.25, 0.1];
    let (n, draws) = (30, 5000);
    let b_sq = null_norm_sq(&eig)?;
    let simulated = simulate_null_replicates(&eig, n, b_sq, draws, derive_seed(seed, 1), true)?;
    let cov = CovarianceSpec::diagonal(eig.to_vec())?;
    let direct = (0..draws)
        .into_par_iter()
        .map(|t| {
            let mut rng = Stream::derived(derive_seed(seed, 2), t as u64);
            let mut z = vec![0.0; n * 3];
            for row in z.chunks_exact_mut(3) {
                for (x, l) in row.iter_mut().zip(&eig) {
                    *x = l.sqrt() * rng.normal();
                }
            }
            let z = Sample::new(n, 3, z)?;
            let k = gram_matrix(&KernelSpec::Linear, &z)?;
            lmmd_statistic(&k, &cov.diag_on(&z)?, b_sq)
        })
        .collect::<kernorm_core::Result<Vec<f64>>>()?;
    let ks = two_sample_ks(&simulated, &direct)?;
    Ok(OracleOutcome {
        suite: "sampler",
        passed: ks.p_value > 0.01,
        detail: format!("two-sample KS D = {:.4}, p = {:.3}", ks.statistic, ks.p_value),
    })
}

fn quantile(seed: u64) -> Result<OracleOutcome> {
    let eig = [0.5];
    let b_sq = null_norm_sq(&eig)?;
    let q = estimate_quantile(&eig, 100, 0.05, 999, b_sq, derive_seed(seed, 1), true)?;
    let mut brute = simulate_null_replicates(&eig, 100, b_sq, 100_000, derive_seed(seed, 2), true)?;
    brute.sort_by(f64::total_cmp);
    let at = |p: f64| brute[((brute.len() as f64 * p).ceil() as usize).clamp(1, brute.len()) - 1];
    let (lo, hi) = (at(0.94), at(0.96));
    Ok(OracleOutcome {
        suite: "quantile",
        passed: lo <= q && q <= hi,
        detail: format!("estimate {q:.4}, brute-force band [{lo:.4}, {hi:.4}]"),
    })
}

fn unbiased(seed: u64) -> Result<OracleOutcome> {
    let spec = GaussianSpec::new(0.0, 0.5, 25)?;
    let cov = CovarianceSpec::diagonal(spec.variances())?;
    let b_sq = null_norm_sq(cov.eigenvalues())?;
    let reps = 2000;
    let stats = (0..reps)
        .into_par_iter()
        .map(|t| {
            let x = sample_gaussian(&spec, 500, derive_seed(seed, t as u64));
            let k = gram_matrix(&KernelSpec::Linear, &x)?;
            lmmd_statistic(&k, &cov.diag_on(&x)?, b_sq)
        })
        .collect::<kernorm_core::Result<Vec<f64>>>()?;
    let r = reps as f64;
    let mean = stats.iter().sum::<f64>() / r;
    let se = (stats.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (r - 1.0) / r).sqrt();
    Ok(OracleOutcome {
        suite: "unbiased",
        passed: mean.abs() <= 3.0 * se,
        detail: format!("mean {mean:.4}, standard error {se:.4}"),
    })
}

fn type1(seed: u64) -> Result<OracleOutcome> {
    let (alpha, b, trials) = (0.05, 99, 1000);
    let spec = GaussianSpec::new(0.0, 0.5, 5)?;
    let cov = CovarianceSpec::diagonal(spec.variances())?;
    let rejections = (0..trials)
        .into_par_iter()
        .map(|t| {
            let x = sample_gaussian(&spec, 200, derive_seed(seed, 2 * t as u64));
            let config = LmmdConfig {
                alpha,
                replicates: b,
                seed: derive_seed(seed, 2 * t as u64 + 1),
                parallel: false,
                ..LmmdConfig::default()
            };
            run_test(&x, &KernelSpec::Linear, &cov, &config).map(|r| usize::from(r.reject))
        })
        .collect::<kernorm_core::Result<Vec<usize>>>()?
        .into_iter()
        .sum::<usize>();
    let rate = rejections as f64 / trials as f64;
    let (lo, hi) = type1_bounds(alpha, b)?;
    let se = (alpha * (1.0 - alpha) / trials as f64).sqrt();
    let (lo, hi) = (lo - 3.0 * se, hi + 3.0 * se);
    Ok(OracleOutcome {
        suite: "type1",
        passed: lo <= rate && rate <= hi,
        detail: format!("rejection rate {rate:.4}, accepted band [{lo:.4}, {hi:.4}]"),
    })
}
