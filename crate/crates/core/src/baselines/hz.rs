use alloc::vec;

use super::{BaselineResult, Calibration, Method};
use crate::error::{Error, Result, StepExt};
use crate::linalg::{cholesky, solve_lower_in_place};
use crate::lmmd::{order_index, order_statistic};
use crate::par::{map_indices, Timer};
use crate::rng::{derive_seed, tag, Stream};
use crate::sample::{dot, squared_distance};
use crate::Sample;

/// Whitens `points` with its empirical mean and (1/n) covariance, through the
/// Cholesky factor of the latter.
pub fn standardize(points: &Sample) -> Result<Sample> {
    let (n, d) = (points.n(), points.dim());
    if n <= d {
        return Err(Error::Input(alloc::format!(
            "standardizing needs more points than dimensions (n = {n}, d = {d})"
        )));
    }
    let mean = points.mean();
    let l = cholesky(&points.covariance(), d)?;
    let mut out = Sample::zeros(n, d);
    for i in 0..n {
        let row = out.row_mut(i);
        for ((o, x), m) in row.iter_mut().zip(points.row(i)).zip(&mean) {
            *o = x - m;
        }
        solve_lower_in_place(&l, d, row);
    }
    Ok(out)
}

pub fn hz_beta(n: usize, d: usize) -> f64 {
    let base = (2 * d + 1) as f64 * n as f64 / 4.0;
    libm::pow(base, 1.0 / (d as f64 + 4.0)) / core::f64::consts::SQRT_2
}

/// Henze-Zirkler statistic of a sample; the sample is standardized first.
pub fn hz_statistic(points: &Sample) -> Result<f64> {
    let y = standardize(points)?;
    Ok(hz_standardized(&y))
}

fn hz_standardized(y: &Sample) -> f64 {
    let (n, d) = (y.n(), y.dim());
    let b2 = {
        let b = hz_beta(n, d);
        b * b
    };
    let half_d = d as f64 / 2.0;
    let mut pair = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            pair += libm::exp(-0.5 * b2 * squared_distance(y.row(i), y.row(j)));
        }
    }
    // diagonal terms contribute n·1
    let pair = (2.0 * pair + n as f64) / n as f64;
    let single: f64 = y.rows().map(|r| libm::exp(-b2 * dot(r, r) / (2.0 * (1.0 + b2)))).sum();
    pair - 2.0 * libm::pow(1.0 + b2, -half_d) * single + n as f64 * libm::pow(1.0 + 2.0 * b2, -half_d)
}

/// Monte-Carlo `1 − α` quantile of the statistic on standard normal samples.
pub fn hz_null_threshold(n: usize, d: usize, calibration: &Calibration) -> Result<f64> {
    let ell = order_index(calibration.alpha, calibration.replicates)?;
    let reps = map_indices(calibration.replicates, calibration.parallel, |b| {
        let mut rng = Stream::derived(calibration.seed, b as u64);
        let mut z = vec![0.0; n * d];
        rng.fill_normal(&mut z);
        hz_statistic(&Sample::new(n, d, z)?)
    })?;
    Ok(order_statistic(reps, ell))
}

pub fn hz_test_with_threshold(points: &Sample, threshold: f64, seed: u64) -> Result<BaselineResult> {
    let timer = Timer::start();
    let statistic = hz_statistic(points).step("statistic")?;
    Ok(BaselineResult::new(
        Method::HenzeZirkler,
        statistic,
        threshold,
        seed,
        timer.elapsed(),
    ))
}

/// Statistic plus a freshly simulated threshold (seeded from `calibration.seed`).
pub fn hz_test(points: &Sample, calibration: &Calibration) -> Result<BaselineResult> {
    let timer = Timer::start();
    let statistic = hz_statistic(points).step("statistic")?;
    let cal = Calibration {
        seed: derive_seed(calibration.seed, tag::QUANTILE),
        ..*calibration
    };
    let threshold = hz_null_threshold(points.n(), points.dim(), &cal).step("null quantile")?;
    Ok(BaselineResult::new(
        Method::HenzeZirkler,
        statistic,
        threshold,
        calibration.seed,
        timer.elapsed(),
    ))
}
