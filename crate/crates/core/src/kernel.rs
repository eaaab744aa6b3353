//! Positive-definite kernels and Gram matrices.

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::sample::{dot, squared_distance, Sample};

/// A positive-definite kernel on `ℝᵈ`.
///
/// Other kernels plug in by adding a variant here; everything downstream only
/// sees Gram matrices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    /// `k(x, y) = <x, y>`
    Linear,
    /// `k(x, y) = exp(−σ²·‖x − y‖²)`
    GaussianRbf { sigma_sq: f64 },
}

impl KernelSpec {
    pub fn gaussian(sigma_sq: f64) -> Result<Self> {
        let k = KernelSpec::GaussianRbf { sigma_sq };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::GaussianRbf { sigma_sq } if !(sigma_sq > 0.0 && sigma_sq.is_finite()) => Err(Error::Input(
                alloc::format!("Gaussian kernel needs sigma_sq > 0, got {sigma_sq}"),
            )),
            _ => Ok(()),
        }
    }

    /// Kernel value, checking that both points share a dimension.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                found: y.len(),
            });
        }
        if x.is_empty() {
            return Err(Error::Input("points must have dimension ≥ 1".into()));
        }
        self.validate()?;
        Ok(self.eval_unchecked(x, y))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            KernelSpec::Linear => dot(x, y),
            KernelSpec::GaussianRbf { sigma_sq } => libm::exp(-sigma_sq * squared_distance(x, y)),
        }
    }
}

/// `K[i][j] = k(points[i], points[j])`.
pub fn gram_matrix(spec: &KernelSpec, points: &Sample) -> Result<SymMatrix> {
    spec.validate()?;
    if points.n() < 2 {
        return Err(Error::Input(alloc::format!(
            "a Gram matrix needs at least 2 points, got {}",
            points.n()
        )));
    }
    Ok(SymMatrix::from_fn(points.n(), |i, j| {
        spec.eval_unchecked(points.row(i), points.row(j))
    }))
}

/// Double centering `H·K·H` with `H = I − 11ᵀ/n`.
pub fn center_gram(k: &SymMatrix) -> SymMatrix {
    let n = k.n();
    if n == 0 {
        return k.clone();
    }
    let inv = 1.0 / n as f64;
    let row_means: alloc::vec::Vec<f64> = (0..n).map(|i| k.row(i).iter().sum::<f64>() * inv).collect();
    let grand = row_means.iter().sum::<f64>() * inv;
    SymMatrix::from_fn(n, |i, j| k.get(i, j) - row_means[i] - row_means[j] + grand)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sym_eigenvalues;
    use proptest::prelude::*;

    #[test]
    fn linear_and_rbf_values() {
        assert_eq!(KernelSpec::Linear.eval(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), 11.0);
        let g = KernelSpec::gaussian(1e-4).unwrap();
        assert_eq!(g.eval(&[3.0, -1.0], &[3.0, -1.0]).unwrap(), 1.0);
        let g = KernelSpec::gaussian(0.5).unwrap();
        assert!((g.eval(&[0.0], &[2.0]).unwrap() - 0.135_335_283_236_612_7).abs() < 1e-15);
    }

    #[test]
    fn input_errors() {
        assert!(matches!(
            KernelSpec::Linear.eval(&[1.0], &[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(KernelSpec::gaussian(0.0).is_err());
        let one = Sample::from_rows(&[[1.0]]).unwrap();
        assert!(gram_matrix(&KernelSpec::Linear, &one).is_err());
    }

    #[test]
    fn small_grams() {
        let pts = Sample::from_rows(&[[1.0], [2.0]]).unwrap();
        let k = gram_matrix(&KernelSpec::Linear, &pts).unwrap();
        assert_eq!(k.as_slice(), [1.0, 2.0, 2.0, 4.0]);

        let pts = Sample::from_rows(&[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]).unwrap();
        let k = gram_matrix(&KernelSpec::Linear, &pts).unwrap();
        assert_eq!(k.as_slice(), [1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 2.0]);

        let k = gram_matrix(&KernelSpec::gaussian(0.3).unwrap(), &pts).unwrap();
        assert_eq!(k.diag(), [1.0, 1.0, 1.0]);
    }

    #[test]
    fn centering_examples() {
        let ones = SymMatrix::from_fn(3, |_, _| 1.0);
        assert_eq!(center_gram(&ones).max_abs(), 0.0);
        let c = center_gram(&SymMatrix::identity(2));
        assert_eq!(c.as_slice(), [0.5, -0.5, -0.5, 0.5]);
    }

    fn points_strategy() -> impl Strategy<Value = Sample> {
        (2usize..12, 1usize..5).prop_flat_map(|(n, d)| {
            proptest::collection::vec(-3.0f64..3.0, n * d).prop_map(move |v| Sample::new(n, d, v).unwrap())
        })
    }

    proptest! {
        #[test]
        fn gram_is_psd(points in points_strategy(), sigma_sq in 0.01f64..2.0, linear in any::<bool>()) {
            let spec = if linear { KernelSpec::Linear } else { KernelSpec::GaussianRbf { sigma_sq } };
            let k = gram_matrix(&spec, &points).unwrap();
            let tol = 1e-8 * k.n() as f64 * k.max_abs();
            for v in sym_eigenvalues(&k).unwrap() {
                prop_assert!(v >= -tol);
            }
        }

        #[test]
        fn centering_is_idempotent(points in points_strategy()) {
            let k = gram_matrix(&KernelSpec::Linear, &points).unwrap();
            let c = center_gram(&k);
            let n = c.n();
            let tol = 1e-10 * n as f64 * k.max_abs().max(1e-300);
            for i in 0..n {
                prop_assert!(c.row(i).iter().sum::<f64>().abs() <= tol);
            }
            prop_assert!(center_gram(&c).max_abs_diff(&c) <= tol);
        }
    }
}
