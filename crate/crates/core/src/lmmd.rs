//! The L-MMD test.
//!
//! For a sample `X_1 … X_n` and a Gaussian null `N(0, Σ)` on the feature space
//! of `k`, the statistic
//!
//! ```text
//! n·L̂² = 1/(n−1) Σ_{i≠j} exp(k(X_i, X_j)) − 2 Σ_i exp(Σ(X_i, X_i)/2) + n·b²
//! ```
//!
//! is an unbiased estimate of `n` times the squared distance between the mean
//! embeddings of the data law and of the null under the kernel `exp(<·,·>)`.
//! Its finite-sample null law is simulated from the covariance spectrum alone:
//! with `G_{i,r}` i.i.d. standard normals, `<Z_i, Z_j> = Σ_r λ_r G_{i,r} G_{j,r}`
//! and `<Z_i, Σ Z_i> = Σ_r λ_r² G_{i,r}²`. The threshold is the `ℓ`-th smallest
//! of `B` such replicates with `ℓ = ⌊B + 2 − α(B + 1)⌋`, which keeps the level
//! between `α − 1/(B+1)` and `α`.

use alloc::vec;
use alloc::vec::Vec;
use core::time::Duration;

use crate::error::{Error, Result, StepExt};
use crate::kernel::{gram_matrix, KernelSpec};
use crate::linalg::SymMatrix;
use crate::null::{CovarianceSpec, NullModel, Origin, DEFAULT_RESCALE_TARGET};
use crate::par::{map_indices, Timer};
use crate::rng::{derive_seed, tag, Stream};
use crate::sample::{dot, Sample};

/// Arguments of `exp` above this value are refused.
pub const EXP_LIMIT: f64 = 700.0;

#[inline]
fn guarded_exp(x: f64) -> Result<f64> {
    if x > EXP_LIMIT || x.is_nan() {
        return Err(Error::Overflow {
            value: x,
            limit: EXP_LIMIT,
        });
    }
    Ok(libm::exp(x))
}

/// The statistic `n·L̂²` from a Gram matrix, the diagonal `Σ(X_i, X_i)` and `b²`.
pub fn lmmd_statistic(k: &SymMatrix, c_diag: &[f64], b_sq: f64) -> Result<f64> {
    let n = k.n();
    if n < 2 {
        return Err(Error::Input(alloc::format!("the statistic needs n ≥ 2, got {n}")));
    }
    if c_diag.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: c_diag.len(),
        });
    }
    if !(b_sq >= 1.0) {
        return Err(Error::Domain(alloc::format!("b² must be ≥ 1, got {b_sq}")));
    }
    let mut pairs = 0.0;
    for i in 0..n {
        let row = k.row(i);
        for &v in &row[i + 1..] {
            pairs += guarded_exp(v)?;
        }
    }
    let mut diag = 0.0;
    for &c in c_diag {
        diag += guarded_exp(0.5 * c)?;
    }
    let nf = n as f64;
    Ok(2.0 * pairs / (nf - 1.0) - 2.0 * diag + nf * b_sq)
}

/// Rank `ℓ = ⌊B + 2 − α(B + 1)⌋` of the order statistic used as threshold,
/// clamped to `[1, B]`.
pub fn order_index(alpha: f64, replicates: usize) -> Result<usize> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(alloc::format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if replicates == 0 {
        return Err(Error::Config("at least one Monte-Carlo replicate is required".into()));
    }
    let b = replicates as f64;
    if alpha * (b + 1.0) < 1.0 - 1e-12 {
        let min_b = libm::ceil(1.0 / alpha - 1e-12) as usize - 1;
        return Err(Error::Config(alloc::format!(
            "alpha = {alpha} needs B ≥ 1/alpha − 1, i.e. B ≥ {min_b} (got B = {replicates})"
        )));
    }
    let raw = libm::floor(b + 2.0 - alpha * (b + 1.0) + 1e-9);
    Ok((raw as usize).clamp(1, replicates))
}

/// Null replicate of the statistic for given standard normals `G` (`n × d`, one
/// column per eigenvalue).
pub fn null_statistic_from_normals(eigenvalues: &[f64], normals: &Sample, b_sq: f64) -> Result<f64> {
    let d = eigenvalues.len();
    if normals.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: normals.dim(),
        });
    }
    let n = normals.n();
    let scale: Vec<f64> = eigenvalues.iter().map(|l| libm::sqrt(*l)).collect();
    let mut w = vec![0.0; n * d];
    for i in 0..n {
        for ((out, g), s) in w[i * d..(i + 1) * d].iter_mut().zip(normals.row(i)).zip(&scale) {
            *out = g * s;
        }
    }
    statistic_from_scaled(eigenvalues, &w, n, b_sq)
}

// `w` holds W_i = λ^{1/2} ⊙ G_i row-major.
fn statistic_from_scaled(eigenvalues: &[f64], w: &[f64], n: usize, b_sq: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::Input(alloc::format!("the statistic needs n ≥ 2, got {n}")));
    }
    let d = eigenvalues.len();
    if d == 0 {
        // every inner product vanishes
        let nf = n as f64;
        return Ok(nf - 2.0 * nf + nf * b_sq);
    }
    let mut pairs = 0.0;
    let mut diag = 0.0;
    // inner products of row i with the later rows are buffered so the
    // exponentials run back to back
    let mut buf = vec![0.0; n];
    for i in 0..n {
        let wi = &w[i * d..(i + 1) * d];
        let quad: f64 = wi.iter().zip(eigenvalues).map(|(x, l)| l * x * x).sum();
        diag += guarded_exp(0.5 * quad)?;
        let row = &mut buf[..n - i - 1];
        for (v, wj) in row.iter_mut().zip(w[(i + 1) * d..].chunks_exact(d)) {
            *v = dot(wi, wj);
        }
        let largest = row.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
        guarded_exp(largest.max(0.0))?;
        pairs += row.iter().map(|v| libm::exp(*v)).sum::<f64>();
    }
    let nf = n as f64;
    Ok(2.0 * pairs / (nf - 1.0) - 2.0 * diag + nf * b_sq)
}

/// One draw of `n·L̂²` under the null, from `n·d` fresh standard normals.
pub fn simulate_null_statistic(eigenvalues: &[f64], n: usize, b_sq: f64, rng: &mut Stream) -> Result<f64> {
    if eigenvalues.iter().any(|l| !(0.0..1.0).contains(l)) {
        return Err(Error::Domain("null eigenvalues must lie in [0, 1)".into()));
    }
    let d = eigenvalues.len();
    let scale: Vec<f64> = eigenvalues.iter().map(|l| libm::sqrt(*l)).collect();
    let mut w = vec![0.0; n * d];
    if d > 0 {
        for row in w.chunks_exact_mut(d) {
            for (x, s) in row.iter_mut().zip(&scale) {
                *x = s * rng.normal();
            }
        }
    }
    statistic_from_scaled(eigenvalues, &w, n, b_sq)
}

/// `B` null replicates, replicate `b` drawn from `Stream::derived(seed, b)`.
/// The output order (by replicate index) does not depend on `parallel`.
pub fn simulate_null_replicates(
    eigenvalues: &[f64],
    n: usize,
    b_sq: f64,
    replicates: usize,
    seed: u64,
    parallel: bool,
) -> Result<Vec<f64>> {
    map_indices(replicates, parallel, |b| {
        let mut rng = Stream::derived(seed, b as u64);
        simulate_null_statistic(eigenvalues, n, b_sq, &mut rng)
    })
}

/// `ℓ`-th smallest value (1-based) after a stable ascending sort.
pub fn order_statistic(mut values: Vec<f64>, ell: usize) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    values[ell - 1]
}

/// Monte-Carlo estimate `q̂_{α,n}` of the `1 − α` null quantile.
pub fn estimate_quantile(
    eigenvalues: &[f64],
    n: usize,
    alpha: f64,
    replicates: usize,
    b_sq: f64,
    seed: u64,
    parallel: bool,
) -> Result<f64> {
    let ell = order_index(alpha, replicates)?;
    let reps = simulate_null_replicates(eigenvalues, n, b_sq, replicates, seed, parallel)?;
    Ok(order_statistic(reps, ell))
}

/// Drops eigenvalues at or below `rel_tol·λ₁`; they do not move the statistic
/// beyond rounding but cost `n` normals each per replicate.
pub fn significant_eigenvalues(eigenvalues: &[f64], rel_tol: f64) -> Vec<f64> {
    let top = eigenvalues.first().copied().unwrap_or(0.0);
    eigenvalues
        .iter()
        .copied()
        .filter(|&l| l > rel_tol * top && l > 0.0)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmmdConfig {
    pub alpha: f64,
    /// Number `B` of Monte-Carlo null replicates.
    pub replicates: usize,
    pub seed: u64,
    /// Largest null eigenvalue after rescaling, applied only when `λ₁ ≥ 1`.
    pub rescale_target: f64,
    /// Eigenvalues below `eigen_rel_tol·λ₁` are left out of the simulation.
    pub eigen_rel_tol: f64,
    pub parallel: bool,
}

impl Default for LmmdConfig {
    fn default() -> Self {
        LmmdConfig {
            alpha: 0.05,
            replicates: 250,
            seed: 0,
            rescale_target: DEFAULT_RESCALE_TARGET,
            eigen_rel_tol: 1e-12,
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Timings {
    pub statistic: Duration,
    pub quantile: Duration,
}

impl Timings {
    pub fn total(&self) -> Duration {
        self.statistic + self.quantile
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestResult {
    /// `n·L̂²`
    pub statistic: f64,
    /// `q̂_{α,n}`
    pub threshold: f64,
    pub alpha: f64,
    pub replicates: usize,
    /// `statistic > threshold`
    pub reject: bool,
    pub seed: u64,
    /// Rescaling factor applied to the data (1 if none).
    pub gamma: f64,
    pub elapsed: Timings,
}

/// Statistic of a sample against a prepared null, plus the rescaled spectrum.
pub fn observed_statistic(
    points: &Sample,
    kernel: &KernelSpec,
    cov: &CovarianceSpec,
    rescale_target: f64,
) -> Result<(f64, NullModel)> {
    let k = match cov.origin {
        Origin::Empirical => cov.centered_gram(kernel, points),
        Origin::Parametric => gram_matrix(kernel, points),
    }
    .step("gram matrix")?;
    let c_diag = cov.diag_on(points).step("covariance matrix")?;
    let null = NullModel::prepare(cov.eigenvalues(), rescale_target).step("rescale")?;
    let stat = if null.gamma == 1.0 {
        lmmd_statistic(&k, &c_diag, null.b_sq)
    } else {
        let g = null.gamma;
        let c: Vec<f64> = c_diag.iter().map(|c| c * g * g).collect();
        lmmd_statistic(&k.scaled(g), &c, null.b_sq)
    }
    .step("statistic")?;
    Ok((stat, null))
}

/// Runs the full test: Gram and covariance matrices, rescaling when the
/// largest null eigenvalue is ≥ 1, the statistic, the simulated quantile, and
/// the decision `statistic > threshold`.
pub fn run_test(points: &Sample, kernel: &KernelSpec, cov: &CovarianceSpec, config: &LmmdConfig) -> Result<TestResult> {
    let ell = order_index(config.alpha, config.replicates).step("configuration")?;
    kernel.validate().step("configuration")?;

    let timer = Timer::start();
    let (statistic, null) = observed_statistic(points, kernel, cov, config.rescale_target)?;
    let statistic_time = timer.elapsed();

    let timer = Timer::start();
    let eigenvalues = significant_eigenvalues(&null.eigenvalues, config.eigen_rel_tol);
    let reps = simulate_null_replicates(
        &eigenvalues,
        points.n(),
        null.b_sq,
        config.replicates,
        derive_seed(config.seed, tag::QUANTILE),
        config.parallel,
    )
    .step("quantile")?;
    let threshold = order_statistic(reps, ell);
    let quantile_time = timer.elapsed();

    Ok(TestResult {
        statistic,
        threshold,
        alpha: config.alpha,
        replicates: config.replicates,
        reject: statistic > threshold,
        seed: config.seed,
        gamma: null.gamma,
        elapsed: Timings {
            statistic: statistic_time,
            quantile: quantile_time,
        },
    })
}

/// Bounds `(α − 1/(B+1), α)` on the rejection probability under the null.
pub fn type1_bounds(alpha: f64, replicates: usize) -> Result<(f64, f64)> {
    order_index(alpha, replicates)?;
    let lower = (alpha - 1.0 / (replicates as f64 + 1.0)).max(0.0);
    Ok((lower, alpha))
}

/// Inputs of the Type-II error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Type2BoundInputs {
    /// Embedding gap `L = ‖μ̄_P − μ̄_{P₀}‖`.
    pub gap: f64,
    /// Almost-sure bound `M` on `‖Y‖`.
    pub norm_bound: f64,
    /// `m⁽²⁾_P = E‖φ̄(Y) − μ̄_P‖²`.
    pub m2: f64,
    /// Null quantile `q_{α,n}`.
    pub quantile: f64,
    pub alpha: f64,
    pub replicates: usize,
    pub n: usize,
    /// Null-dependent constant `C_{P₀}`.
    pub c_p0: f64,
}

impl Type2BoundInputs {
    pub fn new(gap: f64, norm_bound: f64, m2: f64, quantile: f64, alpha: f64, replicates: usize, n: usize) -> Self {
        Type2BoundInputs {
            gap,
            norm_bound,
            m2,
            quantile,
            alpha,
            replicates,
            n,
            c_p0: 1.0,
        }
    }

    pub fn with_n(self, n: usize) -> Self {
        Type2BoundInputs { n, ..self }
    }
}

/// Upper bound on `P(n·L̂² ≤ q̂_{α,n})` with the vanishing `O_n` and `o_B` terms
/// set to zero:
///
/// ```text
/// exp(−n·{L − √((q + m₂)/(n−1))}² / (f₁ + f₂)) · f₃
/// f₁ = 2m₂,  f₂ = (8√2/3)·L²·e^{M²/2}·√f₁,
/// f₃ = 1 + 3·C / (8·e^{M²/2}·L²·√(2·m₂·α·B))
/// ```
///
/// Defined only for `n > (q + m₂)/L²`.
pub fn type2_bound(inputs: &Type2BoundInputs) -> Result<f64> {
    let Type2BoundInputs {
        gap: l,
        norm_bound: m,
        m2,
        quantile: q,
        alpha,
        replicates,
        n,
        c_p0,
    } = *inputs;
    if !(l > 0.0 && m > 0.0 && m2 > 0.0 && c_p0 >= 0.0) {
        return Err(Error::Domain("L, M and m2 must be > 0 and C ≥ 0".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) || replicates == 0 || n < 2 {
        return Err(Error::Domain("need 0 < alpha < 1, B ≥ 1 and n ≥ 2".into()));
    }
    let nf = n as f64;
    let need = (q + m2) / (l * l);
    if !(nf > need) || q + m2 < 0.0 {
        return Err(Error::Domain(alloc::format!(
            "the bound needs n > (q + m2)/L² = {need:.3}, got n = {n}"
        )));
    }
    let f1 = 2.0 * m2;
    let em = libm::exp(0.5 * m * m);
    let f2 = 8.0 * core::f64::consts::SQRT_2 / 3.0 * l * l * em * libm::sqrt(f1);
    let f3 = 1.0 + 3.0 * c_p0 / (8.0 * em * l * l * libm::sqrt(2.0 * m2 * alpha * replicates as f64));
    let gap = l - libm::sqrt((q + m2) / (nf - 1.0));
    Ok(libm::exp(-nf * gap * gap / (f1 + f2)) * f3)
}

/// Monte-Carlo estimates of the quantities entering [`type2_bound`] for data
/// in `ℝᵈ` under the linear kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbeddingMoments {
    /// `L`
    pub gap: f64,
    /// `m⁽²⁾_P`
    pub m2: f64,
    /// Largest observed `‖Y‖`.
    pub max_norm: f64,
}

impl EmbeddingMoments {
    /// Estimates from samples of the data law `P` and of the null `P₀`, each
    /// split into consecutive independent pairs.
    pub fn estimate(p: &Sample, p0: &Sample) -> Result<Self> {
        if p.dim() != p0.dim() {
            return Err(Error::DimensionMismatch {
                expected: p.dim(),
                found: p0.dim(),
            });
        }
        let pairs = (p.n() / 2).min(p0.n() / 2);
        if pairs == 0 {
            return Err(Error::Input("need at least two draws from each law".into()));
        }
        let mean = |f: &dyn Fn(usize) -> f64| (0..pairs).map(f).sum::<f64>() / pairs as f64;
        let pp = mean(&|i| libm::exp(dot(p.row(2 * i), p.row(2 * i + 1))));
        let zz = mean(&|i| libm::exp(dot(p0.row(2 * i), p0.row(2 * i + 1))));
        let pz = mean(&|i| libm::exp(dot(p.row(2 * i), p0.row(2 * i))));
        let self_k = p.rows().map(|y| libm::exp(dot(y, y))).sum::<f64>() / p.n() as f64;
        let max_norm = p.rows().map(|y| libm::sqrt(dot(y, y))).fold(0.0, f64::max);
        Ok(EmbeddingMoments {
            gap: libm::sqrt((pp - 2.0 * pz + zz).max(0.0)),
            m2: self_k - pp,
            max_norm,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::null::null_norm_sq;

    #[test]
    fn statistic_examples() {
        let b = null_norm_sq(&[0.5]).unwrap();
        let s = lmmd_statistic(&SymMatrix::zeros(2), &[0.0, 0.0], b).unwrap();
        assert!((s - 0.309_401_076_758_503).abs() < 1e-12);
        assert_eq!(lmmd_statistic(&SymMatrix::zeros(2), &[0.0, 0.0], 1.0).unwrap(), 0.0);
    }

    #[test]
    fn statistic_errors() {
        let big = SymMatrix::from_rows(&[[1.0, 800.0], [800.0, 1.0]]).unwrap();
        let err = lmmd_statistic(&big, &[0.0, 0.0], 1.0).unwrap_err();
        assert!(matches!(err, Error::Overflow { .. }));
        assert!(lmmd_statistic(&SymMatrix::zeros(2), &[0.0], 1.0).is_err());
        assert!(lmmd_statistic(&SymMatrix::zeros(1), &[0.0], 1.0).is_err());
    }

    #[test]
    fn order_index_examples() {
        assert_eq!(order_index(0.05, 250).unwrap(), 239);
        assert_eq!(order_index(0.5, 1).unwrap(), 1);
        assert_eq!(order_index(0.05, 99).unwrap(), 96);
        assert_eq!(order_index(0.05, 19).unwrap(), 19);
        let err = order_index(0.05, 10).unwrap_err();
        assert!(matches!(err, Error::Config(ref m) if m.contains("B ≥ 19")), "{err}");
        assert!(order_index(0.0, 10).is_err());
    }

    #[test]
    fn degenerate_null_replicates_are_zero() {
        let mut rng = Stream::new(1);
        assert_eq!(simulate_null_statistic(&[], 10, 1.0, &mut rng).unwrap(), 0.0);
        assert_eq!(simulate_null_statistic(&[0.0, 0.0], 10, 1.0, &mut rng).unwrap(), 0.0);
        assert_eq!(estimate_quantile(&[0.0], 7, 0.05, 99, 1.0, 3, false).unwrap(), 0.0);
    }

    #[test]
    fn injected_normals() {
        let b = null_norm_sq(&[0.5]).unwrap();
        let g = Sample::from_rows(&[[1.0], [-1.0]]).unwrap();
        let s = null_statistic_from_normals(&[0.5], &g, b).unwrap();
        // 2·e^{-1/2} − 2·(e^{1/8} + e^{1/8}) + 2·b²
        let expected = 2.0 * (-0.5f64).exp() - 4.0 * 0.125f64.exp() + 2.0 * 1.154_700_538_379_251_7;
        assert!((s - expected).abs() < 1e-12);
        assert!((s - (-1.010_131_416_083_535)).abs() < 1e-9);
    }

    #[test]
    fn single_replicate_quantile() {
        let b = null_norm_sq(&[0.4]).unwrap();
        let q = estimate_quantile(&[0.4], 20, 0.5, 1, b, 99, false).unwrap();
        let mut rng = Stream::derived(99, 0);
        assert_eq!(q, simulate_null_statistic(&[0.4], 20, b, &mut rng).unwrap());
    }

    #[test]
    fn quantile_is_independent_of_parallelism() {
        let eig = [0.5, 0.2, 0.1];
        let b = null_norm_sq(&eig).unwrap();
        let serial = simulate_null_replicates(&eig, 30, b, 64, 5, false).unwrap();
        let parallel = simulate_null_replicates(&eig, 30, b, 64, 5, true).unwrap();
        assert_eq!(serial, parallel);
    }

    #[test]
    fn degenerate_data_is_accepted() {
        let pts = Sample::from_rows(&[[2.0, 1.0]; 5]).unwrap();
        let r = run_test(
            &pts,
            &KernelSpec::Linear,
            &CovarianceSpec::zero(),
            &LmmdConfig::default(),
        )
        .unwrap();
        // nonzero repeated points still differ from the null mean
        assert!(r.statistic > 0.0);
        let zeros = Sample::zeros(5, 2);
        let r = run_test(
            &zeros,
            &KernelSpec::Linear,
            &CovarianceSpec::zero(),
            &LmmdConfig::default(),
        )
        .unwrap();
        assert_eq!((r.statistic, r.threshold, r.reject), (0.0, 0.0, false));
    }

    #[test]
    fn type1_bound_examples() {
        let (lo, hi) = type1_bounds(0.05, 250).unwrap();
        assert!((lo - (0.05 - 1.0 / 251.0)).abs() < 1e-15 && hi == 0.05);
        assert!((lo - 0.046_016).abs() < 1e-6);
        assert_eq!(type1_bounds(0.05, 19).unwrap(), (0.0, 0.05));
        assert_eq!(type1_bounds(0.25, 3).unwrap(), (0.0, 0.25));
        assert!(type1_bounds(0.05, 18).is_err());
    }

    #[test]
    fn type2_bound_regression() {
        let inputs = Type2BoundInputs::new(0.5, 1.0, 1.0, 5.0, 0.05, 250, 100);
        // independent scripted evaluation of the closed form
        let v = type2_bound(&inputs).unwrap();
        assert!((v - 0.254_785_732_369_855_74).abs() < 1e-12, "{v}");
    }

    #[test]
    fn type2_bound_shape() {
        let base = Type2BoundInputs::new(0.5, 1.0, 1.0, 5.0, 0.05, 250, 100);
        let mut prev = f64::INFINITY;
        for n in (100..=1000).step_by(50) {
            let v = type2_bound(&base.with_n(n)).unwrap();
            assert!(v < prev);
            prev = v;
        }
        let mut prev = f64::INFINITY;
        for b in [20, 50, 100, 250, 1000] {
            let v = type2_bound(&Type2BoundInputs { replicates: b, ..base }).unwrap();
            assert!(v <= prev);
            prev = v;
        }
        let mut prev = 0.0;
        for l in [0.9, 0.8, 0.7, 0.6, 0.5, 0.4] {
            let v = type2_bound(&Type2BoundInputs { gap: l, ..base }).unwrap();
            assert!(v >= prev);
            prev = v;
        }
        assert!(matches!(
            type2_bound(&Type2BoundInputs { gap: 0.1, ..base }),
            Err(Error::Domain(_))
        ));
    }
}
