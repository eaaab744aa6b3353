//! The Gaussian null `P₀ = N(0, Σ)` on the feature space of a kernel.
//!
//! A [`CovarianceSpec`] carries the spectrum `λ₁ ≥ … ≥ λ_d ≥ 0` of the
//! covariance operator, which is all the null simulation needs, together with
//! an evaluator for the covariance function `Σ(x, y)`, which the statistic
//! needs on the observed points.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::kernel::{center_gram, gram_matrix, KernelSpec};
use crate::linalg::{sym_eigenvalues, SymMatrix};
use crate::sample::{dot, Sample};

/// Largest eigenvalue accepted by [`rescale`] when no target is given.
pub const DEFAULT_RESCALE_TARGET: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Parametric,
    Empirical,
}

/// Evaluator for `Σ(x, y) = <Σ_op k(x,·), k(y,·)>`.
#[derive(Debug, Clone, PartialEq)]
pub enum CovarianceFn {
    Zero,
    /// `Σ(x, y) = Σ_r w_r·x_r·y_r` on `ℝᵈ` with the linear kernel.
    Diagonal {
        weights: Vec<f64>,
    },
    /// Empirical covariance of a sample under the linear kernel:
    /// `Σ(x, y) = (x − m)ᵀ S (y − m)`.
    LinearEmpirical {
        mean: Vec<f64>,
        matrix: Vec<f64>,
    },
    /// Empirical covariance operator of a reference sample under a general
    /// kernel: `Σ(x, y) = (1/m)·Σ_k k̃(x, X_k)·k̃(y, X_k)` with `k̃` the kernel
    /// recentered at the reference mean embedding.
    KernelEmpirical(KernelReference),
}

/// A reference sample and the statistics needed to recenter kernel values at
/// its mean embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelReference {
    pub kernel: KernelSpec,
    pub points: Sample,
    row_means: Vec<f64>,
    grand_mean: f64,
}

impl KernelReference {
    fn new(kernel: KernelSpec, points: Sample, gram: &SymMatrix) -> Self {
        let m = points.n();
        let row_means: Vec<f64> = (0..m).map(|i| gram.row(i).iter().sum::<f64>() / m as f64).collect();
        let grand_mean = row_means.iter().sum::<f64>() / m as f64;
        KernelReference {
            kernel,
            points,
            row_means,
            grand_mean,
        }
    }

    /// `k̃(x, X_k)` for every reference point, and `m(x) = mean_k k(x, X_k)`.
    fn centered_features(&self, x: &[f64]) -> (Vec<f64>, f64) {
        let raw: Vec<f64> = self.points.rows().map(|r| self.kernel.eval_unchecked(x, r)).collect();
        let mx = raw.iter().sum::<f64>() / raw.len() as f64;
        let centered = raw
            .iter()
            .zip(&self.row_means)
            .map(|(v, rm)| v - mx - rm + self.grand_mean)
            .collect();
        (centered, mx)
    }
}

/// Covariance of the Gaussian null, as a spectrum plus an evaluator.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSpec {
    eigenvalues: Vec<f64>,
    pub cov_fn: CovarianceFn,
    pub origin: Origin,
}

impl CovarianceSpec {
    /// Checks and stores a spectrum; it must be nonnegative and nonincreasing.
    pub fn new(eigenvalues: Vec<f64>, cov_fn: CovarianceFn, origin: Origin) -> Result<Self> {
        check_spectrum(&eigenvalues)?;
        Ok(CovarianceSpec {
            eigenvalues,
            cov_fn,
            origin,
        })
    }

    /// Diagonal covariance on `ℝᵈ` under the linear kernel.
    pub fn diagonal(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::Input("covariance weights must be finite and ≥ 0".into()));
        }
        let mut eigenvalues = weights.clone();
        eigenvalues.sort_by(|a, b| b.total_cmp(a));
        Self::new(eigenvalues, CovarianceFn::Diagonal { weights }, Origin::Parametric)
    }

    /// The degenerate null `Σ ≡ 0`.
    pub fn zero() -> Self {
        CovarianceSpec {
            eigenvalues: Vec::new(),
            cov_fn: CovarianceFn::Zero,
            origin: Origin::Parametric,
        }
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn largest_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    /// `Σ(x, y)`.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                found: y.len(),
            });
        }
        match &self.cov_fn {
            CovarianceFn::Zero => Ok(0.0),
            CovarianceFn::Diagonal { weights } => {
                check_dim(weights.len(), x.len())?;
                Ok(weights.iter().zip(x.iter().zip(y)).map(|(w, (a, b))| w * a * b).sum())
            }
            CovarianceFn::LinearEmpirical { mean, matrix } => {
                check_dim(mean.len(), x.len())?;
                let d = mean.len();
                let cx: Vec<f64> = x.iter().zip(mean).map(|(a, m)| a - m).collect();
                let cy: Vec<f64> = y.iter().zip(mean).map(|(a, m)| a - m).collect();
                Ok((0..d).map(|a| cx[a] * dot(&matrix[a * d..(a + 1) * d], &cy)).sum())
            }
            CovarianceFn::KernelEmpirical(reference) => {
                check_dim(reference.points.dim(), x.len())?;
                let (fx, _) = reference.centered_features(x);
                let (fy, _) = reference.centered_features(y);
                Ok(dot(&fx, &fy) / fx.len() as f64)
            }
        }
    }

    /// `Σ(x_i, x_i)` for every point; cheaper than the full covariance matrix.
    pub fn diag_on(&self, points: &Sample) -> Result<Vec<f64>> {
        points.rows().map(|x| self.eval(x, x)).collect()
    }

    /// Gram matrix of `points` after recentering features at the null's mean
    /// embedding. Only empirical covariances carry a mean to remove.
    pub fn centered_gram(&self, kernel: &KernelSpec, points: &Sample) -> Result<SymMatrix> {
        match &self.cov_fn {
            CovarianceFn::LinearEmpirical { mean, .. } => {
                check_dim(mean.len(), points.dim())?;
                let mut shifted = points.clone();
                for i in 0..shifted.n() {
                    for (x, m) in shifted.row_mut(i).iter_mut().zip(mean) {
                        *x -= m;
                    }
                }
                gram_matrix(&KernelSpec::Linear, &shifted)
            }
            CovarianceFn::KernelEmpirical(reference) => {
                check_dim(reference.points.dim(), points.dim())?;
                let k = gram_matrix(&reference.kernel, points)?;
                let means: Vec<f64> = points.rows().map(|x| reference.centered_features(x).1).collect();
                Ok(SymMatrix::from_fn(points.n(), |i, j| {
                    k.get(i, j) - means[i] - means[j] + reference.grand_mean
                }))
            }
            _ => gram_matrix(kernel, points),
        }
    }
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

fn check_spectrum(eigenvalues: &[f64]) -> Result<()> {
    if eigenvalues.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::Input("eigenvalues must be finite and ≥ 0".into()));
    }
    if eigenvalues.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::Input("eigenvalues must be nonincreasing".into()));
    }
    Ok(())
}

/// `C[i][j] = Σ(points[i], points[j])`.
pub fn covariance_matrix(cov: &CovarianceSpec, points: &Sample) -> Result<SymMatrix> {
    let n = points.n();
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = cov.eval(points.row(i), points.row(j))?;
            data[i * n + j] = v;
            data[j * n + i] = v;
        }
    }
    SymMatrix::from_row_major(n, data)
}

/// Squared norm of the null mean embedding, `b² = Π_r (1 − λ_r²)^{−1/2}`.
pub fn null_norm_sq(eigenvalues: &[f64]) -> Result<f64> {
    let mut log_det = 0.0;
    for &l in eigenvalues {
        if !(0.0..1.0).contains(&l) {
            return Err(Error::Domain(alloc::format!(
                "null eigenvalue {l} is outside [0, 1); rescale the covariance first"
            )));
        }
        log_det += libm::log1p(-l * l);
    }
    Ok(libm::exp(-0.5 * log_det))
}

/// Output of [`rescale`].
#[derive(Debug, Clone, PartialEq)]
pub struct Rescaled {
    pub gamma: f64,
    pub gram: SymMatrix,
    pub cov: SymMatrix,
    pub eigenvalues: Vec<f64>,
}

/// Multiplies the data by `γ^{1/2}` so that the largest null eigenvalue becomes
/// `target`: `K' = γK`, `C' = γ²C`, `λ' = γλ` with `γ = target/λ₁`.
///
/// A null with `λ₁ = 0` is returned unchanged with `γ = 1`.
pub fn rescale(k: &SymMatrix, c: &SymMatrix, eigenvalues: &[f64], target: f64) -> Result<Rescaled> {
    let gamma = rescale_factor(eigenvalues, target)?;
    if gamma == 1.0 {
        return Ok(Rescaled {
            gamma,
            gram: k.clone(),
            cov: c.clone(),
            eigenvalues: eigenvalues.to_vec(),
        });
    }
    Ok(Rescaled {
        gamma,
        gram: k.scaled(gamma),
        cov: c.scaled(gamma * gamma),
        eigenvalues: eigenvalues.iter().map(|l| l * gamma).collect(),
    })
}

/// `γ = target/λ₁`, or 1 when `λ₁ = 0`.
pub fn rescale_factor(eigenvalues: &[f64], target: f64) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::Config(alloc::format!(
            "rescale target must lie in (0, 1), got {target}"
        )));
    }
    check_spectrum(eigenvalues)?;
    let top = eigenvalues.first().copied().unwrap_or(0.0);
    Ok(if top == 0.0 { 1.0 } else { target / top })
}

/// Null model with the rescaling already applied.
#[derive(Debug, Clone, PartialEq)]
pub struct NullModel {
    pub eigenvalues: Vec<f64>,
    pub b_sq: f64,
    pub gamma: f64,
}

impl NullModel {
    /// Rescales the spectrum only when `λ₁ ≥ 1`, then computes `b²`.
    pub fn prepare(eigenvalues: &[f64], target: f64) -> Result<Self> {
        check_spectrum(eigenvalues)?;
        let gamma = if eigenvalues.first().is_some_and(|&l| l >= 1.0) {
            rescale_factor(eigenvalues, target)?
        } else {
            1.0
        };
        let eigenvalues: Vec<f64> = eigenvalues.iter().map(|l| l * gamma).collect();
        let b_sq = null_norm_sq(&eigenvalues)?;
        Ok(NullModel {
            eigenvalues,
            b_sq,
            gamma,
        })
    }
}

/// Spectrum of `center_gram(K)/n`, clamped at 0 and sorted nonincreasing.
pub fn empirical_eigenvalues(k: &SymMatrix) -> Result<Vec<f64>> {
    let n = k.n();
    if n < 2 {
        return Err(Error::Input("an empirical null needs at least 2 points".into()));
    }
    let mut values = sym_eigenvalues(&center_gram(k))?;
    let inv = 1.0 / n as f64;
    values.iter_mut().for_each(|v| *v = (*v * inv).max(0.0));
    Ok(values)
}

/// Plug-in null `N(μ̂, Σ̂)` estimated from a sample.
///
/// Under the linear kernel with `d < n` the spectrum is computed from the
/// `d × d` empirical covariance, whose nonzero eigenvalues coincide with
/// those of the centered Gram matrix divided by `n`.
pub fn estimate_null_from_sample(kernel: &KernelSpec, points: &Sample) -> Result<CovarianceSpec> {
    let n = points.n();
    if n < 2 {
        return Err(Error::Input("an empirical null needs at least 2 points".into()));
    }
    match kernel {
        KernelSpec::Linear if points.dim() < n => {
            let d = points.dim();
            let matrix = points.covariance();
            let s = SymMatrix::from_row_major(d, matrix.clone())?;
            let mut eigenvalues = sym_eigenvalues(&s)?;
            eigenvalues.iter_mut().for_each(|v| *v = v.max(0.0));
            CovarianceSpec::new(
                eigenvalues,
                CovarianceFn::LinearEmpirical {
                    mean: points.mean(),
                    matrix,
                },
                Origin::Empirical,
            )
        }
        _ => {
            let k = gram_matrix(kernel, points)?;
            let eigenvalues = empirical_eigenvalues(&k)?;
            CovarianceSpec::new(
                eigenvalues,
                CovarianceFn::KernelEmpirical(KernelReference::new(*kernel, points.clone(), &k)),
                Origin::Empirical,
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;
    use proptest::prelude::*;

    /// det(I − D²)^{-1/2} through an explicit matrix and Gaussian elimination.
    fn det_oracle(lams: &[f64]) -> f64 {
        let d = lams.len();
        let mut m = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                let sq: f64 = (0..d)
                    .map(|k| {
                        let a = if i == k { lams[i] } else { 0.0 };
                        let b = if k == j { lams[j] } else { 0.0 };
                        a * b
                    })
                    .sum();
                m[i * d + j] = if i == j { 1.0 } else { 0.0 } - sq;
            }
        }
        let mut det = 1.0;
        for c in 0..d {
            let piv = m[c * d + c];
            det *= piv;
            for r in c + 1..d {
                let f = m[r * d + c] / piv;
                for k in c..d {
                    m[r * d + k] -= f * m[c * d + k];
                }
            }
        }
        1.0 / det.sqrt()
    }

    #[test]
    fn norm_examples() {
        assert_eq!(null_norm_sq(&[]).unwrap(), 1.0);
        assert_eq!(null_norm_sq(&[0.0, 0.0]).unwrap(), 1.0);
        assert!((null_norm_sq(&[0.5]).unwrap() - 1.154_700_538_379_251_7).abs() < 1e-14);
        let b = null_norm_sq(&[0.5, 0.25]).unwrap();
        assert!((b - 1.192_569_587_999_887_9).abs() < 1e-14);
        assert!((b - det_oracle(&[0.5, 0.25])).abs() < 1e-14);
        assert!(matches!(null_norm_sq(&[1.0]), Err(Error::Domain(_))));
    }

    proptest! {
        #[test]
        fn norm_matches_determinant(lams in proptest::collection::vec(0.0f64..0.95, 1..=10)) {
            let b = null_norm_sq(&lams).unwrap();
            let oracle = det_oracle(&lams);
            prop_assert!(((b - oracle) / oracle).abs() <= 1e-10);
            prop_assert!(b >= 1.0);
        }

        #[test]
        fn norm_is_monotone(lams in proptest::collection::vec(0.0f64..0.9, 1..6), idx in 0usize..6, bump in 0.0f64..0.09) {
            let i = idx % lams.len();
            let mut up = lams.clone();
            up[i] += bump;
            prop_assert!(null_norm_sq(&up).unwrap() >= null_norm_sq(&lams).unwrap());
        }

        #[test]
        fn rescaled_norm_is_defined(mut lams in proptest::collection::vec(0.0f64..50.0, 1..8)) {
            lams.sort_by(|a, b| b.total_cmp(a));
            let eye = SymMatrix::identity(2);
            let r = rescale(&eye, &eye, &lams, DEFAULT_RESCALE_TARGET).unwrap();
            prop_assert!(null_norm_sq(&r.eigenvalues).is_ok());
        }
    }

    #[test]
    fn covariance_examples() {
        let pts = Sample::from_rows(&[[1.0], [2.0]]).unwrap();
        assert_eq!(covariance_matrix(&CovarianceSpec::zero(), &pts).unwrap().max_abs(), 0.0);
        let cov = CovarianceSpec::diagonal(vec![0.5]).unwrap();
        assert_eq!(covariance_matrix(&cov, &pts).unwrap().as_slice(), [0.5, 1.0, 1.0, 2.0]);

        let d = 6;
        let lambda = 0.7;
        let weights: Vec<f64> = (1..=d).map(|r| lambda / (r * r) as f64).collect();
        let cov = CovarianceSpec::diagonal(weights).unwrap();
        let mut e1 = vec![0.0; d];
        e1[0] = 1.0;
        assert_eq!(cov.eval(&e1, &e1).unwrap(), lambda);
    }

    #[test]
    fn rescale_examples() {
        let k = SymMatrix::from_rows(&[[1.0, 2.0], [2.0, 3.0]]).unwrap();
        let c = SymMatrix::from_rows(&[[4.0, 1.0], [1.0, 2.0]]).unwrap();
        let r = rescale(&k, &c, &[2.0, 1.0], 0.9).unwrap();
        assert!((r.gamma - 0.45).abs() < 1e-15);
        assert!(r.gram.max_abs_diff(&k.scaled(0.45)) < 1e-15);
        assert!(r.cov.max_abs_diff(&c.scaled(0.2025)) < 1e-14);

        let r = rescale(&k, &c, &[0.9], 0.9).unwrap();
        assert_eq!(r.gamma, 1.0);
        assert_eq!(r.gram, k);

        let r = rescale(&k, &c, &[0.5, 0.25], 0.9).unwrap();
        assert!((r.eigenvalues[0] - 0.9).abs() < 1e-15 && (r.eigenvalues[1] - 0.45).abs() < 1e-15);

        let r = rescale(&k, &c, &[0.0], 0.9).unwrap();
        assert_eq!(r.gamma, 1.0);
        assert!(rescale(&k, &c, &[2.0], 1.0).is_err());
    }

    #[test]
    fn empirical_null_examples() {
        let same = Sample::from_rows(&[[1.5, -2.0], [1.5, -2.0], [1.5, -2.0]]).unwrap();
        let cov = estimate_null_from_sample(&KernelSpec::gaussian(0.2).unwrap(), &same).unwrap();
        assert!(cov.eigenvalues().iter().all(|&v| v.abs() < 1e-12));

        let pts = Sample::from_rows(&[[-1.0], [1.0]]).unwrap();
        let k = gram_matrix(&KernelSpec::Linear, &pts).unwrap();
        let eig = empirical_eigenvalues(&k).unwrap();
        assert!((eig[0] - 1.0).abs() < 1e-14 && eig[1].abs() < 1e-14);
        assert_eq!(cov.origin, Origin::Empirical);
    }

    #[test]
    fn empirical_spectrum_recovers_covariance() {
        let n = 2000;
        let mut s = Stream::new(5);
        let rows: Vec<[f64; 2]> = (0..n).map(|_| [2.0 * s.normal(), s.normal()]).collect();
        let pts = Sample::from_rows(&rows).unwrap();
        let cov = estimate_null_from_sample(&KernelSpec::Linear, &pts).unwrap();
        let e = cov.eigenvalues();
        assert!((e[0] / 4.0 - 1.0).abs() < 0.15 && (e[1] - 1.0).abs() < 0.15);
    }

    #[test]
    fn linear_shortcut_matches_gram_route() {
        let mut s = Stream::new(8);
        let rows: Vec<[f64; 3]> = (0..40)
            .map(|_| [s.normal(), 0.5 * s.normal() + 1.0, s.normal() - s.normal()])
            .collect();
        let pts = Sample::from_rows(&rows).unwrap();
        let k = gram_matrix(&KernelSpec::Linear, &pts).unwrap();
        let via_gram = empirical_eigenvalues(&k).unwrap();
        let cov = estimate_null_from_sample(&KernelSpec::Linear, &pts).unwrap();
        for (a, b) in cov.eigenvalues().iter().zip(&via_gram) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(via_gram[3..].iter().all(|v| v.abs() < 1e-10));
        let trace: f64 = via_gram.iter().sum();
        assert!((trace - center_gram(&k).trace() / 40.0).abs() < 1e-8 * trace);

        // the general-kernel evaluator agrees with the linear closed form
        let general = CovarianceSpec::new(
            via_gram.clone(),
            CovarianceFn::KernelEmpirical(KernelReference::new(KernelSpec::Linear, pts.clone(), &k)),
            Origin::Empirical,
        )
        .unwrap();
        for i in [0, 7, 23] {
            for j in [1, 7, 39] {
                let a = cov.eval(pts.row(i), pts.row(j)).unwrap();
                let b = general.eval(pts.row(i), pts.row(j)).unwrap();
                assert!((a - b).abs() < 1e-10);
            }
        }
        let ca = cov.centered_gram(&KernelSpec::Linear, &pts).unwrap();
        let cb = general.centered_gram(&KernelSpec::Linear, &pts).unwrap();
        assert!(ca.max_abs_diff(&cb) < 1e-10);
        assert!(ca.max_abs_diff(&center_gram(&k)) < 1e-10);
    }
}
