//! Small dense linear algebra: a row-major matrix and Householder QR.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length does not match shape");
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Matrix { rows: rows.len(), cols, data }
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol))
    }

    /// `A * B`.
    pub fn matmul(&self, other: &Matrix<T>) -> Matrix<T> {
        assert_eq!(self.cols, other.rows);
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Matrix<T> {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(&a, &b)| a * b).sum())
            .collect()
    }
}

/// Householder QR of a tall matrix (`rows >= cols`).
#[derive(Debug, Clone)]
pub struct Qr<T> {
    rows: usize,
    cols: usize,
    /// Householder vectors, one per column, each of length `rows - j`.
    reflectors: Vec<Vec<T>>,
    /// Upper-triangular factor, `cols x cols`, row-major.
    r: Vec<T>,
    column_norms: Vec<T>,
}

impl<T: Scalar> Qr<T> {
    pub fn new(a: &Matrix<T>) -> Result<Self> {
        let (m, n) = (a.rows, a.cols);
        if m < n {
            return Err(Error::SingularDesign { columns: (m..n).collect() });
        }
        let mut w = a.data.clone();
        let column_norms = (0..n)
            .map(|j| (0..m).map(|i| w[i * n + j] * w[i * n + j]).sum::<T>().sqrt())
            .collect();
        let mut reflectors = Vec::with_capacity(n);
        for j in 0..n {
            let norm = (j..m).map(|i| w[i * n + j] * w[i * n + j]).sum::<T>().sqrt();
            let mut v: Vec<T> = (j..m).map(|i| w[i * n + j]).collect();
            if norm > T::zero() {
                let alpha = if v[0] >= T::zero() { -norm } else { norm };
                v[0] -= alpha;
                let vnorm = v.iter().map(|&x| x * x).sum::<T>().sqrt();
                if vnorm > T::zero() {
                    v.iter_mut().for_each(|x| *x /= vnorm);
                    for k in j..n {
                        let dot: T = (j..m).map(|i| v[i - j] * w[i * n + k]).sum();
                        let two_dot = dot + dot;
                        for i in j..m {
                            w[i * n + k] -= two_dot * v[i - j];
                        }
                    }
                } else {
                    v.iter_mut().for_each(|x| *x = T::zero());
                }
            } else {
                v.iter_mut().for_each(|x| *x = T::zero());
            }
            reflectors.push(v);
        }
        let mut r = vec![T::zero(); n * n];
        for i in 0..n {
            for k in i..n {
                r[i * n + k] = w[i * n + k];
            }
        }
        Ok(Qr { rows: m, cols: n, reflectors, r, column_norms })
    }

    fn tolerance() -> T {
        T::epsilon().powf(T::of(2.0 / 3.0)) * T::of(10.0)
    }

    /// Columns whose diagonal entry of R vanishes relative to the column norm,
    /// i.e. columns lying (numerically) in the span of the preceding ones.
    pub fn deficient_columns(&self) -> Vec<usize> {
        let tol = Self::tolerance();
        (0..self.cols)
            .filter(|&j| {
                let d = self.r[j * self.cols + j].abs();
                self.column_norms[j] == T::zero() || d <= tol * self.column_norms[j]
            })
            .collect()
    }

    pub fn ensure_full_rank(&self) -> Result<()> {
        let bad = self.deficient_columns();
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::SingularDesign { columns: bad })
        }
    }

    fn apply_qt(&self, b: &mut [T]) {
        for (j, v) in self.reflectors.iter().enumerate() {
            let dot: T = (j..self.rows).map(|i| v[i - j] * b[i]).sum();
            let two_dot = dot + dot;
            for i in j..self.rows {
                b[i] -= two_dot * v[i - j];
            }
        }
    }

    /// Least-squares solution of `A x = b`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        assert_eq!(b.len(), self.rows);
        let mut qtb = b.to_vec();
        self.apply_qt(&mut qtb);
        let n = self.cols;
        let mut x = vec![T::zero(); n];
        for i in (0..n).rev() {
            let mut s = qtb[i];
            for k in i + 1..n {
                s -= self.r[i * n + k] * x[k];
            }
            x[i] = s / self.r[i * n + i];
        }
        x
    }

    /// `(AᵀA)⁻¹ = R⁻¹ R⁻ᵀ`.
    pub fn gram_inverse(&self) -> Matrix<T> {
        let n = self.cols;
        // R⁻¹ by back substitution, column by column
        let mut rinv = vec![T::zero(); n * n];
        for c in 0..n {
            for i in (0..=c).rev() {
                let mut s = if i == c { T::one() } else { T::zero() };
                for k in i + 1..=c {
                    s -= self.r[i * n + k] * rinv[k * n + c];
                }
                rinv[i * n + c] = s / self.r[i * n + i];
            }
        }
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let s: T = (j..n).map(|k| rinv[i * n + k] * rinv[j * n + k]).sum();
                out.set(i, j, s);
                out.set(j, i, s);
            }
        }
        out
    }
}
