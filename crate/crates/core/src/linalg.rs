//! Row-major dense matrices and the handful of kernels the nets need.
//!
//! The multiply kernel uses the i-k-j update order: the inner loop over
//! output columns has no loop-carried dependency, so it vectorizes without
//! reassociating floating-point sums and stays bit-deterministic.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::numeric::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<F> {
    rows: usize,
    cols: usize,
    data: Vec<F>,
}

impl<F: Real> Matrix<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![F::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<F>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(CoreError::Shape(format!(
                "matrix {rows}x{cols} needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Stacks equal-length rows into a matrix.
    pub fn from_rows(rows: &[&[F]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(CoreError::Shape(format!(
                    "ragged rows: expected {cols}, got {}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[F] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [F] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> F {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: F) {
        self.data[r * self.cols + c] = v;
    }

    pub fn as_slice(&self) -> &[F] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn transposed(&self) -> Matrix<F> {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    pub fn fill(&mut self, v: F) {
        for x in &mut self.data {
            *x = v;
        }
    }

    pub fn iter(&self) -> core::slice::Iter<'_, F> {
        self.data.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// `self * other`, allocating the result.
    pub fn matmul(&self, other: &Matrix<F>) -> Result<Matrix<F>> {
        let mut out = Matrix::zeros(self.rows, other.cols);
        gemm_accumulate(&mut out, self, other)?;
        Ok(out)
    }

    pub fn map<G: FnMut(F) -> F>(&self, mut f: G) -> Matrix<F> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn to_f64_lossy(&self) -> Matrix<f64> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x.to_f64_lossy()).collect(),
        }
    }
}

/// `c += a * b` with `a: m x k`, `b: k x n`, `c: m x n`.
pub fn gemm_accumulate<F: Real>(c: &mut Matrix<F>, a: &Matrix<F>, b: &Matrix<F>) -> Result<()> {
    if a.cols != b.rows || c.rows != a.rows || c.cols != b.cols {
        return Err(CoreError::Shape(format!(
            "gemm: ({}x{}) * ({}x{}) -> ({}x{})",
            a.rows, a.cols, b.rows, b.cols, c.rows, c.cols
        )));
    }
    let n = b.cols;
    let k = a.cols;
    for (a_row, c_row) in a.data.chunks_exact(k).zip(c.data.chunks_exact_mut(n)) {
        for (&aik, b_row) in a_row.iter().zip(b.data.chunks_exact(n)) {
            if aik == F::zero() {
                continue;
            }
            for (cj, &bj) in c_row.iter_mut().zip(b_row) {
                *cj = *cj + aik * bj;
            }
        }
    }
    Ok(())
}

/// Adds `v` to every row of `m` in place.
pub fn add_row_broadcast<F: Real>(m: &mut Matrix<F>, v: &[F]) -> Result<()> {
    if v.len() != m.cols {
        return Err(CoreError::Shape(format!(
            "broadcast len {} vs {} cols",
            v.len(),
            m.cols
        )));
    }
    for row in m.data.chunks_exact_mut(m.cols) {
        for (x, &b) in row.iter_mut().zip(v) {
            *x = *x + b;
        }
    }
    Ok(())
}

/// Column sums of `m` (used for bias gradients).
pub fn column_sums<F: Real>(m: &Matrix<F>) -> Vec<F> {
    let mut out = vec![F::zero(); m.cols];
    for row in m.data.chunks_exact(m.cols) {
        for (o, &x) in out.iter_mut().zip(row) {
            *o = *o + x;
        }
    }
    out
}

pub fn dot<F: Real>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}
