//! Minimal dense matrices for the small (N <= ~16) systems in the analysis.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DenseMatrix<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Real> DenseMatrix<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![T::zero(); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        Self { dim, data }
    }

    /// Circulant matrix whose entry `(i, j)` is `first_row[(j - i) mod N]`.
    pub fn circulant(first_row: &[T]) -> Self {
        let dim = first_row.len();
        Self::from_fn(dim, |i, j| first_row[(j + dim - i) % dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)])
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        (0..self.dim).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.dim);
        (0..self.dim)
            .map(|i| self.row(i).iter().zip(x).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    /// `x^T A x`.
    pub fn quadratic_form(&self, x: &[T]) -> T {
        self.mul_vec(x).iter().zip(x).map(|(&a, &b)| a * b).sum()
    }

    /// Solves `A x = b` by Gaussian elimination with partial pivoting.
    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        let n = self.dim;
        assert_eq!(b.len(), n);
        let mut a = self.data.clone();
        let mut x = b.to_vec();
        let scale = a.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        let tiny = scale * T::epsilon() * T::of_usize(n.max(1));

        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&p, &q| {
                    a[p * n + col]
                        .abs()
                        .partial_cmp(&a[q * n + col].abs())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
                .expect("non-empty range");
            if !(a[pivot * n + col].abs() > tiny) {
                return Err(Error::Singular);
            }
            if pivot != col {
                for j in 0..n {
                    a.swap(pivot * n + j, col * n + j);
                }
                x.swap(pivot, col);
            }
            let diag = a[col * n + col];
            for row in col + 1..n {
                let factor = a[row * n + col] / diag;
                if factor == T::zero() {
                    continue;
                }
                for j in col..n {
                    let v = a[col * n + j];
                    a[row * n + j] -= factor * v;
                }
                let v = x[col];
                x[row] -= factor * v;
            }
        }
        for row in (0..n).rev() {
            let mut acc = x[row];
            for j in row + 1..n {
                acc -= a[row * n + j] * x[j];
            }
            x[row] = acc / a[row * n + row];
        }
        Ok(x)
    }
}

impl<T> std::ops::Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;

    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.dim + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for DenseMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.dim + j]
    }
}
