//! Dense Cholesky factorization for symmetric positive-definite systems.

use crate::error::{Error, Result};

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Lower-triangular factor `L` with `A = L Lᵀ`, stored row-major in an `n × n` buffer.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Factors the symmetric matrix held (row-major, lower triangle read) in `a`.
    ///
    /// The buffer is reused for the factor. A non-positive or non-finite pivot
    /// yields [`Error::SingularSystem`] carrying the offending pivot.
    pub fn factor(mut a: Vec<f64>, n: usize) -> Result<Self> {
        assert_eq!(a.len(), n * n, "matrix buffer must be n*n");
        for j in 0..n {
            let (head, tail) = a.split_at_mut(j * n);
            let row_j = &mut tail[..n];
            // off-diagonal entries of row j
            for k in 0..j {
                let row_k = &head[k * n..k * n + k];
                let s = row_j[k] - dot(&row_j[..k], row_k);
                row_j[k] = s / head[k * n + k];
            }
            let pivot = row_j[j] - dot(&row_j[..j], &row_j[..j]);
            if !(pivot > 0.0) || !pivot.is_finite() {
                return Err(Error::SingularSystem { index: j, pivot });
            }
            row_j[j] = pivot.sqrt();
            for v in &mut row_j[j + 1..] {
                *v = 0.0;
            }
        }
        Ok(Self { n, l: a })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn factor_row(&self, i: usize) -> &[f64] {
        &self.l[i * self.n..i * self.n + i + 1]
    }

    /// Smallest diagonal entry of `L` (square root of the smallest pivot).
    pub fn min_pivot(&self) -> f64 {
        (0..self.n)
            .map(|i| self.l[i * self.n + i])
            .fold(f64::INFINITY, f64::min)
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.n).map(|i| self.l[i * self.n + i].ln()).sum::<f64>()
    }

    /// Solves `L y = b` in place.
    pub fn forward_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        assert_eq!(b.len(), n);
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            let s = b[i] - dot(row, &b[..i]);
            b[i] = s / self.l[i * n + i];
        }
    }

    /// Solves `Lᵀ x = y` in place.
    pub fn backward_in_place(&self, y: &mut [f64]) {
        let n = self.n;
        assert_eq!(y.len(), n);
        for i in (0..n).rev() {
            let xi = y[i] / self.l[i * n + i];
            y[i] = xi;
            let row = &self.l[i * n..i * n + i];
            for (yk, lik) in y[..i].iter_mut().zip(row) {
                *yk -= lik * xi;
            }
        }
    }

    /// `A⁻¹ b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.forward_in_place(&mut x);
        self.backward_in_place(&mut x);
        x
    }

    /// `L v`.
    pub fn mul_lower(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(v.len(), n);
        (0..n)
            .map(|i| dot(&self.l[i * n..i * n + i + 1], &v[..i + 1]))
            .collect()
    }

    /// Diagonal of `A⁻¹`, from the squared column norms of `L⁻¹`.
    pub fn inverse_diagonal(&self) -> Vec<f64> {
        let n = self.n;
        let mut diag = vec![0.0; n];
        let mut col = vec![0.0; n];
        // column j of L⁻¹ solves L c = e_j and is zero above j
        for j in 0..n {
            col[j..].iter_mut().for_each(|v| *v = 0.0);
            col[j] = 1.0 / self.l[j * n + j];
            for i in j + 1..n {
                let row = &self.l[i * n + j..i * n + i];
                let s = dot(row, &col[j..i]);
                col[i] = -s / self.l[i * n + i];
            }
            diag[j] = dot(&col[j..], &col[j..]);
        }
        diag
    }
}
