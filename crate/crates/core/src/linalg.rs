//! Minimal dense linear algebra for small (d <= ~30) symmetric matrices.
//!
//! The posterior covariance updates only need mat-vec products, rank-one
//! corrections, quadratic forms, and a Cholesky factor; a tiny row-major
//! implementation avoids pulling a full linear-algebra stack into a
//! `no_std` crate.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;

/// Dense row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Matrix {
    dim: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = 1.0;
        }
        m
    }

    pub fn scaled_identity(dim: usize, s: f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = s;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.dim);
        let mut out = vec![0.0; self.dim];
        for i in 0..self.dim {
            let row = &self.data[i * self.dim..(i + 1) * self.dim];
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(x) {
                acc += a * b;
            }
            out[i] = acc;
        }
        out
    }

    /// x' M x for a vector x.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        dot(&self.matvec(x), x)
    }

    /// Subtract `c * u u'` in place and re-symmetrize.
    pub fn sub_outer_symmetrize(&mut self, c: f64, u: &[f64]) {
        let d = self.dim;
        for i in 0..d {
            for j in 0..=i {
                let v = self.data[i * d + j] - c * u[i] * u[j];
                self.data[i * d + j] = v;
                self.data[j * d + i] = v;
            }
        }
    }

    /// Lower-triangular Cholesky factor, or `None` if not positive definite.
    pub fn cholesky(&self) -> Option<Matrix> {
        let d = self.dim;
        let mut l = Matrix::zeros(d);
        for i in 0..d {
            for j in 0..=i {
                let mut sum = self.get(i, j);
                for k in 0..j {
                    sum -= l.get(i, k) * l.get(j, k);
                }
                if i == j {
                    if sum <= 0.0 || !sum.is_finite() {
                        return None;
                    }
                    l.set(i, j, math::sqrt(sum));
                } else {
                    l.set(i, j, sum / l.get(j, j));
                }
            }
        }
        Some(l)
    }

    /// Solves `M v = b` for symmetric positive-definite `M` via Cholesky
    /// factorization with forward and back substitution.
    pub fn solve_spd(&self, b: &[f64]) -> Option<Vec<f64>> {
        let l = self.cholesky()?;
        let d = self.dim;
        let mut y = b.to_vec();
        for i in 0..d {
            for j in 0..i {
                y[i] -= l.get(i, j) * y[j];
            }
            y[i] /= l.get(i, i);
        }
        for i in (0..d).rev() {
            for j in (i + 1)..d {
                y[i] -= l.get(j, i) * y[j];
            }
            y[i] /= l.get(i, i);
        }
        Some(y)
    }

    /// Largest absolute asymmetry |M[i,j] - M[j,i]|.
    pub fn asymmetry(&self) -> f64 {
        let d = self.dim;
        let mut worst = 0.0_f64;
        for i in 0..d {
            for j in 0..i {
                let a = (self.get(i, j) - self.get(j, i)).abs();
                if a > worst {
                    worst = a;
                }
            }
        }
        worst
    }

    pub fn add_diagonal(&mut self, v: f64) {
        for i in 0..self.dim {
            self.data[i * self.dim + i] += v;
        }
    }

    pub fn frobenius_distance(&self, other: &Matrix) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        let mut acc = 0.0;
        for (a, b) in self.data.iter().zip(&other.data) {
            acc += (a - b) * (a - b);
        }
        math::sqrt(acc)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}
