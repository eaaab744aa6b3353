//! Seeded generators for the structured Gaussian laws `N(δ·m, λ·D)` with
//! `m = (1, 1/2, …, 1/d)` and `D = diag(1, 1/4, …, 1/d²)`, and their mixtures.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rng::Stream;
use crate::sample::Sample;

/// `N(δ·(1, 1/2, …, 1/d), λ·diag(1, 1/4, …, 1/d²))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianSpec {
    pub delta: f64,
    pub lambda: f64,
    pub d: usize,
}

impl GaussianSpec {
    pub fn new(delta: f64, lambda: f64, d: usize) -> Result<Self> {
        if !(delta >= 0.0 && delta.is_finite() && lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::Input(alloc::format!(
                "delta and lambda must be finite and ≥ 0, got delta = {delta}, lambda = {lambda}"
            )));
        }
        if d == 0 {
            return Err(Error::Input("dimension must be ≥ 1".into()));
        }
        Ok(GaussianSpec { delta, lambda, d })
    }

    pub fn mean(&self) -> Vec<f64> {
        (1..=self.d).map(|r| self.delta / r as f64).collect()
    }

    /// Coordinate variances `λ/r²`.
    pub fn variances(&self) -> Vec<f64> {
        (1..=self.d).map(|r| self.lambda / (r * r) as f64).collect()
    }

    fn fill_row(&self, row: &mut [f64], rng: &mut Stream) {
        let sqrt_lambda = libm::sqrt(self.lambda);
        for (r, x) in row.iter_mut().enumerate() {
            let k = (r + 1) as f64;
            *x = self.delta / k + sqrt_lambda / k * rng.normal();
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSpec {
    pub weights: Vec<f64>,
    pub components: Vec<GaussianSpec>,
}

impl MixtureSpec {
    pub fn new(weights: Vec<f64>, components: Vec<GaussianSpec>) -> Result<Self> {
        if weights.is_empty() || weights.len() != components.len() {
            return Err(Error::Input("a mixture needs one weight per component".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::Input("mixture weights must be ≥ 0 and sum to 1".into()));
        }
        let d = components[0].d;
        if components.iter().any(|c| c.d != d) {
            return Err(Error::Input("mixture components must share a dimension".into()));
        }
        Ok(MixtureSpec { weights, components })
    }

    pub fn dim(&self) -> usize {
        self.components[0].d
    }

    fn pick(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return i;
            }
        }
        self.weights.len() - 1
    }
}

/// `n` i.i.d. rows; coordinates are drawn in order from one stream.
pub fn sample_gaussian(spec: &GaussianSpec, n: usize, seed: u64) -> Sample {
    let mut rng = Stream::new(seed);
    let mut out = Sample::zeros(n, spec.d);
    for i in 0..n {
        spec.fill_row(out.row_mut(i), &mut rng);
    }
    out
}

/// `n` i.i.d. rows; each row consumes one uniform for the component, then `d` normals.
pub fn sample_mixture(spec: &MixtureSpec, n: usize, seed: u64) -> Sample {
    sample_mixture_labeled(spec, n, seed).0
}

/// As [`sample_mixture`], also returning the component of each row.
pub fn sample_mixture_labeled(spec: &MixtureSpec, n: usize, seed: u64) -> (Sample, Vec<usize>) {
    let mut rng = Stream::new(seed);
    let mut out = Sample::zeros(n, spec.dim());
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = spec.pick(rng.uniform());
        labels.push(c);
        spec.components[c].fill_row(out.row_mut(i), &mut rng);
    }
    (out, labels)
}
