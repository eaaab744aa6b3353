use alloc::vec::Vec;

use crate::error::{Error, Result};

/// A dense `n × d` sample stored row-major; each row is one observation.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl Sample {
    pub fn new(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if d == 0 {
            return Err(Error::Input("observations must have dimension ≥ 1".into()));
        }
        if data.len() != n * d {
            return Err(Error::DimensionMismatch {
                expected: n * d,
                found: data.len(),
            });
        }
        Ok(Sample { n, d, data })
    }

    pub fn zeros(n: usize, d: usize) -> Self {
        Sample {
            n,
            d,
            data: alloc::vec![0.0; n * d],
        }
    }

    /// Builds a sample from rows, rejecting empty input and ragged rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let first = rows.first().ok_or_else(|| Error::Input("empty sample".into()))?;
        let d = first.as_ref().len();
        if d == 0 {
            return Err(Error::Input("observations must have dimension ≥ 1".into()));
        }
        let mut data = Vec::with_capacity(rows.len() * d);
        for row in rows {
            let row = row.as_ref();
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Sample { n: rows.len(), d, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.d)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Rows selected by index, in the given order.
    pub fn select(&self, indices: &[usize]) -> Sample {
        let mut data = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Sample {
            n: indices.len(),
            d: self.d,
            data,
        }
    }

    /// Coordinate-wise mean.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = alloc::vec![0.0; self.d];
        for row in self.rows() {
            for (acc, x) in m.iter_mut().zip(row) {
                *acc += x;
            }
        }
        let inv = 1.0 / self.n as f64;
        m.iter_mut().for_each(|x| *x *= inv);
        m
    }

    /// Empirical covariance with the `1/n` normalization, as a `d × d` row-major matrix.
    pub fn covariance(&self) -> Vec<f64> {
        let d = self.d;
        let mean = self.mean();
        let mut cov = alloc::vec![0.0; d * d];
        let mut centered = alloc::vec![0.0; d];
        for row in self.rows() {
            for (c, (x, m)) in centered.iter_mut().zip(row.iter().zip(&mean)) {
                *c = x - m;
            }
            for a in 0..d {
                let ca = centered[a];
                for b in a..d {
                    cov[a * d + b] += ca * centered[b];
                }
            }
        }
        let inv = 1.0 / self.n as f64;
        for a in 0..d {
            for b in a..d {
                let v = cov[a * d + b] * inv;
                cov[a * d + b] = v;
                cov[b * d + a] = v;
            }
        }
        cov
    }
}

// Four independent accumulators let the compiler vectorize; the summation
// order is fixed, so results stay reproducible.
#[inline]
fn lanes(x: &[f64], y: &[f64], f: impl Fn(f64, f64) -> f64) -> f64 {
    let n = x.len().min(y.len());
    let (xa, xr) = x[..n].split_at(n - n % 4);
    let (ya, yr) = y[..n].split_at(n - n % 4);
    let mut acc = [0.0f64; 4];
    for (a, b) in xa.chunks_exact(4).zip(ya.chunks_exact(4)) {
        for k in 0..4 {
            acc[k] += f(a[k], b[k]);
        }
    }
    let tail: f64 = xr.iter().zip(yr).map(|(a, b)| f(*a, *b)).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    lanes(x, y, |a, b| a * b)
}

#[inline]
pub(crate) fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    lanes(x, y, |a, b| {
        let t = a - b;
        t * t
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_ragged_and_empty() {
        let empty: [[f64; 2]; 0] = [];
        assert!(Sample::from_rows(&empty).is_err());
        let ragged = [alloc::vec![1.0, 2.0], alloc::vec![3.0]];
        assert_eq!(
            Sample::from_rows(&ragged),
            Err(Error::DimensionMismatch { expected: 2, found: 1 })
        );
    }

    #[test]
    fn moments() {
        let s = Sample::from_rows(&[[1.0, 0.0], [-1.0, 2.0]]).unwrap();
        assert_eq!(s.mean(), [0.0, 1.0]);
        assert_eq!(s.covariance(), [1.0, -1.0, -1.0, 1.0]);
    }
}
