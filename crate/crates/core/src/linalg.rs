//! Small dense and banded kernels shared by the solvers.

use std::ops::{Div, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Field types accepted by [`solve_tridiagonal`].
pub trait Scalar: Copy + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> {
    fn modulus(self) -> f64;
}

impl Scalar for f64 {
    fn modulus(self) -> f64 {
        self.abs()
    }
}

impl Scalar for Complex64 {
    fn modulus(self) -> f64 {
        self.norm()
    }
}

/// Thomas elimination for `sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1] = rhs[i]`.
///
/// `sub[0]` and `sup[len-1]` are ignored. Returns the index of the first
/// vanishing pivot on failure.
pub fn solve_tridiagonal<T: Scalar>(sub: &[T], diag: &[T], sup: &[T], rhs: &[T]) -> Result<Vec<T>, usize> {
    let len = diag.len();
    assert!(sub.len() == len && sup.len() == len && rhs.len() == len, "band length mismatch");
    let scale = diag.iter().map(|d| d.modulus()).fold(0.0, f64::max);
    let tiny = f64::EPSILON * scale.max(f64::MIN_POSITIVE);
    let mut c = Vec::with_capacity(len);
    let mut d = Vec::with_capacity(len);
    for i in 0..len {
        let pivot = if i == 0 { diag[0] } else { diag[i] - sub[i] * c[i - 1] };
        if !(pivot.modulus() > tiny) {
            return Err(i);
        }
        let ci = if i + 1 < len { sup[i] / pivot } else { sup[i] };
        let di = if i == 0 { rhs[0] / pivot } else { (rhs[i] - sub[i] * d[i - 1]) / pivot };
        c.push(ci);
        d.push(di);
    }
    let mut x = d;
    for i in (0..len.saturating_sub(1)).rev() {
        x[i] = x[i] - c[i] * x[i + 1];
    }
    Ok(x)
}

/// Dense Neumann Laplacian on `n + 1` sites.
pub fn neumann_laplacian_matrix(n: usize) -> DMatrix<f64> {
    let size = n + 1;
    let mut m = DMatrix::zeros(size, size);
    for x in 0..size {
        if x > 0 {
            m[(x, x - 1)] = 1.0;
            m[(x, x)] -= 1.0;
        }
        if x < n {
            m[(x, x + 1)] = 1.0;
            m[(x, x)] -= 1.0;
        }
    }
    m
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
