//! Dense symmetric matrices and their spectral decomposition.
//!
//! The eigensolver reduces the matrix to tridiagonal form with Householder
//! reflections and then runs implicit QL iterations with Wilkinson shifts.
//! Eigenvalues alone cost about `4n³/3` flops; eigenvectors add the
//! accumulation of the reflections and rotations.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// A dense symmetric `n × n` matrix in full row-major storage.
///
/// Both triangles are stored and kept exactly equal.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        SymMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n);
        for (i, &v) in diag.iter().enumerate() {
            m.data[i * n + i] = v;
        }
        m
    }

    /// Evaluates `f(i, j)` for `i ≤ j` and mirrors the result.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        SymMatrix { n, data }
    }

    /// Builds a matrix from rows. Off-diagonal pairs must agree to within
    /// `1e-12` of the largest entry; they are then replaced by their average.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            let row = row.as_ref();
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_row_major(n, data)
    }

    pub fn from_row_major(n: usize, mut data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("matrix has non-finite entries".into()));
        }
        let scale = data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..n {
            for j in i + 1..n {
                let (a, b) = (data[i * n + j], data[j * n + i]);
                if (a - b).abs() > 1e-12 * scale {
                    return Err(Error::Input(alloc::format!(
                        "matrix is not symmetric at ({i}, {j}): {a} vs {b}"
                    )));
                }
                let m = 0.5 * (a + b);
                data[i * n + j] = m;
                data[j * n + i] = m;
            }
        }
        Ok(SymMatrix { n, data })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// Largest absolute entry (0 for an empty matrix).
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, factor: f64) -> SymMatrix {
        SymMatrix {
            n: self.n,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    /// Diagonal of `self · self`, i.e. the squared Euclidean norms of the rows.
    pub fn diag_of_square(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).iter().map(|v| v * v).sum()).collect()
    }

    /// Largest entrywise difference to `other`.
    pub fn max_abs_diff(&self, other: &SymMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Eigenvalues in nonincreasing order with matching orthonormal eigenvectors.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    // row j holds eigenvector j
    vectors_t: Vec<f64>,
    n: usize,
}

impl SymEigen {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Eigenvector paired with `values[j]`.
    pub fn vector(&self, j: usize) -> &[f64] {
        &self.vectors_t[j * self.n..(j + 1) * self.n]
    }

    /// Entry `(i, j)` of the eigenvector matrix `V` (column `j` is a vector).
    pub fn v(&self, i: usize, j: usize) -> f64 {
        self.vectors_t[j * self.n + i]
    }

    /// `V · diag(values) · Vᵀ`.
    pub fn reconstruct(&self) -> SymMatrix {
        let n = self.n;
        SymMatrix::from_fn(n, |i, k| {
            (0..n).map(|j| self.values[j] * self.v(i, j) * self.v(k, j)).sum()
        })
    }
}

const MAX_QL_SWEEPS: usize = 60;

/// Full eigendecomposition `K = V·diag(λ)·Vᵀ`, eigenvalues nonincreasing.
pub fn sym_eigendecompose(k: &SymMatrix) -> Result<SymEigen> {
    let n = k.n;
    let (mut d, mut e, reflectors) = tridiagonalize(k);
    let mut z = accumulate_reflectors(n, &reflectors);
    tridiagonal_ql(&mut d, &mut e, Some(&mut z))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[b].total_cmp(&d[a]));
    let mut vectors_t = Vec::with_capacity(n * n);
    for &j in &order {
        vectors_t.extend_from_slice(&z[j * n..(j + 1) * n]);
    }
    Ok(SymEigen {
        values: order.iter().map(|&j| d[j]).collect(),
        vectors_t,
        n,
    })
}

/// Eigenvalues only, nonincreasing.
pub fn sym_eigenvalues(k: &SymMatrix) -> Result<Vec<f64>> {
    let (mut d, mut e, _) = tridiagonalize_values(k);
    tridiagonal_ql(&mut d, &mut e, None)?;
    d.sort_by(|a, b| b.total_cmp(a));
    Ok(d)
}

struct Reflector {
    // acts on coordinates offset..n
    offset: usize,
    v: Vec<f64>,
    beta: f64,
}

fn tridiagonalize(k: &SymMatrix) -> (Vec<f64>, Vec<f64>, Vec<Reflector>) {
    tridiagonalize_impl(k, true)
}

fn tridiagonalize_values(k: &SymMatrix) -> (Vec<f64>, Vec<f64>, Vec<Reflector>) {
    tridiagonalize_impl(k, false)
}

/// Householder reduction `K = Q·T·Qᵀ`. Returns the diagonal of `T`, its
/// subdiagonal (`e[i] = T[i+1][i]`, last entry 0) and optionally the reflectors.
fn tridiagonalize_impl(k: &SymMatrix, keep: bool) -> (Vec<f64>, Vec<f64>, Vec<Reflector>) {
    let n = k.n;
    let mut a = k.data.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    let mut reflectors = Vec::new();
    let mut p = vec![0.0; n];

    for col in 0..n.saturating_sub(2) {
        let off = col + 1;
        let m = n - off;
        d[col] = a[col * n + col];
        let x = &a[col * n + off..col * n + n];
        let tail_sq: f64 = x[1..].iter().map(|v| v * v).sum();
        if tail_sq == 0.0 {
            e[col] = x[0];
            continue;
        }
        let x0 = x[0];
        let norm = libm::sqrt(x0 * x0 + tail_sq);
        let alpha = if x0 >= 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = x.to_vec();
        v[0] -= alpha;
        let vtv = v[0] * v[0] + tail_sq;
        let beta = 2.0 / vtv;
        e[col] = alpha;

        // p = β·S·v on the trailing block S = a[off.., off..]
        let p = &mut p[..m];
        for (r, pr) in p.iter_mut().enumerate() {
            let row = &a[(off + r) * n + off..(off + r) * n + n];
            *pr = beta * row.iter().zip(&v).map(|(s, vi)| s * vi).sum::<f64>();
        }
        let ptv: f64 = p.iter().zip(&v).map(|(a, b)| a * b).sum();
        let half = 0.5 * beta * ptv;
        // w = p − (β/2)(pᵀv)·v, stored in p
        for (pr, vr) in p.iter_mut().zip(&v) {
            *pr -= half * vr;
        }
        for r in 0..m {
            let (vr, wr) = (v[r], p[r]);
            let row = &mut a[(off + r) * n + off..(off + r) * n + n];
            for ((s, vc), wc) in row.iter_mut().zip(&v).zip(p.iter()) {
                *s -= vr * wc + wr * vc;
            }
        }
        if keep {
            reflectors.push(Reflector { offset: off, v, beta });
        }
    }
    if n >= 2 {
        d[n - 2] = a[(n - 2) * n + n - 2];
        d[n - 1] = a[(n - 1) * n + n - 1];
        e[n - 2] = a[(n - 1) * n + n - 2];
    } else if n == 1 {
        d[0] = a[0];
    }
    (d, e, reflectors)
}

/// Forms `Qᵀ = H_last ··· H_0` row-major, so row `j` of the result is column `j` of `Q`.
fn accumulate_reflectors(n: usize, reflectors: &[Reflector]) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    let mut w = vec![0.0; n];
    for h in reflectors {
        let off = h.offset;
        w.iter_mut().for_each(|x| *x = 0.0);
        for (r, vr) in h.v.iter().enumerate() {
            let row = &m[(off + r) * n..(off + r + 1) * n];
            for (wc, mc) in w.iter_mut().zip(row) {
                *wc += vr * mc;
            }
        }
        for (r, vr) in h.v.iter().enumerate() {
            let f = h.beta * vr;
            let row = &mut m[(off + r) * n..(off + r + 1) * n];
            for (mc, wc) in row.iter_mut().zip(&w) {
                *mc -= f * wc;
            }
        }
    }
    m
}

/// Implicit QL with Wilkinson shifts on a symmetric tridiagonal matrix.
///
/// `z`, when given, holds the transposed eigenvector matrix (one vector per
/// row) and receives the rotations.
fn tridiagonal_ql(d: &mut [f64], e: &mut [f64], mut z: Option<&mut Vec<f64>>) -> Result<()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    e[n - 1] = 0.0;
    let mut total_iterations = 0usize;
    for l in 0..n {
        let mut iter = 0usize;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            total_iterations += 1;
            if iter > MAX_QL_SWEEPS {
                return Err(Error::NoConvergence {
                    iterations: total_iterations,
                });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = libm::hypot(g, 1.0);
            g = d[m] - d[l] + e[l] / (g + if g >= 0.0 { r.abs() } else { -r.abs() });
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = libm::hypot(f, g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(z) = z.as_deref_mut() {
                    let (lo, hi) = z.split_at_mut((i + 1) * n);
                    let zi = &mut lo[i * n..];
                    let zi1 = &mut hi[..n];
                    for (a, b) in zi.iter_mut().zip(zi1.iter_mut()) {
                        let f = *b;
                        *b = s * *a + c * f;
                        *a = c * *a - s * f;
                    }
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Lower Cholesky factor of a symmetric positive-definite `d × d` matrix (row-major).
pub fn cholesky(a: &[f64], d: usize) -> Result<Vec<f64>> {
    if a.len() != d * d {
        return Err(Error::DimensionMismatch {
            expected: d * d,
            found: a.len(),
        });
    }
    let scale = (0..d).fold(0.0f64, |m, i| m.max(a[i * d + i].abs()));
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i * d + k] * l[j * d + k]).sum();
            if i == j {
                let v = a[i * d + i] - s;
                if !(v > 1e-12 * scale) {
                    return Err(Error::Input(alloc::format!(
                        "covariance matrix is singular or not positive definite (pivot {i}); reduce the dimension"
                    )));
                }
                l[i * d + i] = libm::sqrt(v);
            } else {
                l[i * d + j] = (a[i * d + j] - s) / l[j * d + j];
            }
        }
    }
    Ok(l)
}

/// Solves `L·y = x` in place for lower-triangular `L`.
pub fn solve_lower_in_place(l: &[f64], d: usize, x: &mut [f64]) {
    for i in 0..d {
        let s: f64 = (0..i).map(|k| l[i * d + k] * x[k]).sum();
        x[i] = (x[i] - s) / l[i * d + i];
    }
}
