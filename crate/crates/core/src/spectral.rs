//! Neumann Laplacian eigenstructure, Green's functions and the transport coefficient.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::quadrature::unit_trapezoid;

#[derive(Debug, Error, PartialEq)]
pub enum SpectralError {
    #[error("vector length {got} does not match {expected} sites")]
    LengthMismatch { expected: usize, got: usize },
    #[error("resonant denominator at harmonic {ell}, mode {mode}")]
    ResonantDenominator { ell: i64, mode: usize },
}

/// Closed-form eigenpairs of `-Δ_N` on sites `0..=n`, shifted by `ω₀²`.
#[derive(Clone, Debug)]
pub struct NeumannEigenbasis {
    n: usize,
    omega0: f64,
    lambdas: Vec<f64>,
    mus: Vec<f64>,
    /// Row `j` holds `ψ_j(·)`.
    psi: DMatrix<f64>,
}

impl NeumannEigenbasis {
    pub fn new(n: usize, omega0: f64) -> Self {
        let size = n + 1;
        let nf = size as f64;
        let lambdas: Vec<f64> = (0..size).map(|j| 4.0 * (PI * j as f64 / (2.0 * nf)).sin().powi(2)).collect();
        let mus = lambdas.iter().map(|l| omega0 * omega0 + l).collect();
        let psi = DMatrix::from_fn(size, size, |j, x| {
            let norm = if j == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
            norm * (PI * j as f64 * (2 * x + 1) as f64 / (2.0 * nf)).cos()
        });
        NeumannEigenbasis { n, omega0, lambdas, mus, psi }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sites(&self) -> usize {
        self.n + 1
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// `μ_j = ω₀² + λ_j`.
    pub fn mus(&self) -> &[f64] {
        &self.mus
    }

    /// `ψ_j(x)`.
    pub fn psi(&self, j: usize, x: usize) -> f64 {
        self.psi[(j, x)]
    }

    /// Orthogonal matrix with rows `ψ_j`.
    pub fn psi_matrix(&self) -> &DMatrix<f64> {
        &self.psi
    }

    pub fn laplacian_apply<T>(&self, f: &[T]) -> Result<Vec<T>, SpectralError>
    where
        T: Copy + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T>,
    {
        if f.len() != self.sites() {
            return Err(SpectralError::LengthMismatch { expected: self.sites(), got: f.len() });
        }
        Ok(neumann_laplacian(f))
    }
}

/// `(Δ_N f)_x = f_{x+1} + f_{x-1} - 2 f_x` with `f_{-1} = f_0`, `f_{n+1} = f_n`.
pub fn neumann_laplacian<T>(f: &[T]) -> Vec<T>
where
    T: Copy + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T>,
{
    let last = f.len() - 1;
    (0..f.len())
        .map(|x| {
            let left = f[x.saturating_sub(1)];
            let right = f[(x + 1).min(last)];
            left + right - f[x] * 2.0
        })
        .collect()
}

/// Complex shift `ω₀² - (2πℓ/θ)² + 4γπiℓ/θ` of the harmonic operator `L = shift - Δ_N`.
pub fn harmonic_shift(omega0: f64, gamma: f64, theta: f64, ell: i64) -> Complex64 {
    let k = 2.0 * PI * ell as f64 / theta;
    Complex64::new(omega0 * omega0 - k * k, 2.0 * gamma * k)
}

/// Applies `L = shift - Δ_N`.
pub fn apply_harmonic_operator(shift: Complex64, f: &[Complex64]) -> Vec<Complex64> {
    let lap = neumann_laplacian(f);
    f.iter().zip(lap).map(|(&v, l)| shift * v - l).collect()
}

/// Finite-chain Green's function of one harmonic, with lazily cached columns.
pub struct GreensFunction<'a> {
    basis: &'a NeumannEigenbasis,
    ell: i64,
    shift: Complex64,
    inv_denoms: Vec<Complex64>,
    columns: HashMap<usize, Vec<Complex64>>,
}

impl<'a> GreensFunction<'a> {
    pub fn new(basis: &'a NeumannEigenbasis, gamma: f64, theta: f64, ell: i64) -> Result<Self, SpectralError> {
        let shift = harmonic_shift(basis.omega0(), gamma, theta, ell);
        let mut inv_denoms = Vec::with_capacity(basis.sites());
        for (mode, &lam) in basis.lambdas().iter().enumerate() {
            let d = shift + lam;
            if d.norm() == 0.0 {
                return Err(SpectralError::ResonantDenominator { ell, mode });
            }
            inv_denoms.push(d.inv());
        }
        Ok(GreensFunction { basis, ell, shift, inv_denoms, columns: HashMap::new() })
    }

    pub fn ell(&self) -> i64 {
        self.ell
    }

    pub fn shift(&self) -> Complex64 {
        self.shift
    }

    /// `G(x, y) = Σ_j ψ_j(x) ψ_j(y) / (λ_j + shift)`.
    pub fn entry(&self, x: usize, y: usize) -> Complex64 {
        let psi = self.basis.psi_matrix();
        self.inv_denoms.iter().enumerate().map(|(j, &w)| w * (psi[(j, x)] * psi[(j, y)])).sum()
    }

    /// Column `G(·, y)`.
    pub fn column(&mut self, y: usize) -> &[Complex64] {
        let basis = self.basis;
        let inv = &self.inv_denoms;
        self.columns.entry(y).or_insert_with(|| {
            let psi = basis.psi_matrix();
            let weights: Vec<Complex64> = (0..basis.sites()).map(|j| inv[j] * psi[(j, y)]).collect();
            (0..basis.sites())
                .map(|x| weights.iter().enumerate().map(|(j, &w)| w * psi[(j, x)]).sum())
                .collect()
        })
    }

    /// `‖L G(·, y) - δ_y‖_∞`.
    pub fn residual(&mut self, y: usize) -> f64 {
        let shift = self.shift;
        let lg = apply_harmonic_operator(shift, self.column(y));
        lg.iter()
            .enumerate()
            .map(|(x, v)| (v - if x == y { 1.0 } else { 0.0 }).norm())
            .fold(0.0, f64::max)
    }
}

fn lattice_rate(omega0: f64) -> f64 {
    1.0 + 0.5 * omega0 * omega0 + omega0 * (1.0 + 0.25 * omega0 * omega0).sqrt()
}

/// Green's function of `-Δ + ω₀²` on `ℤ`.
pub fn greens_lattice(omega0: f64, x: i64) -> f64 {
    let pre = 1.0 / (omega0 * (omega0 * omega0 + 4.0).sqrt());
    pre * lattice_rate(omega0).powi(-(x.unsigned_abs() as i32))
}

/// Integral representation `∫₀¹ cos(2πux) / (4 sin²(πu) + ω₀²) du`.
pub fn greens_lattice_quadrature(omega0: f64, x: i64) -> f64 {
    unit_trapezoid(|u| (2.0 * PI * u * x as f64).cos() / (4.0 * (PI * u).sin().powi(2) + omega0 * omega0))
}

/// Transport coefficient `D = 2 / (2 + ω₀² + ω₀√(ω₀² + 4))`.
pub fn transport_coefficient(omega0: f64) -> f64 {
    2.0 / (2.0 + omega0 * omega0 + omega0 * (omega0 * omega0 + 4.0).sqrt())
}

/// Three independent evaluations of `D`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct TransportEvaluations {
    pub closed_form: f64,
    pub green_form: f64,
    pub kubo: f64,
}

impl TransportEvaluations {
    pub fn max_disagreement(&self) -> f64 {
        let v = [self.closed_form, self.green_form, self.kubo];
        let hi = v.iter().copied().fold(f64::MIN, f64::max);
        let lo = v.iter().copied().fold(f64::MAX, f64::min);
        hi - lo
    }
}

/// Closed form, `1 - ω₀²(G(0) + G(1))` with quadrature Green values, and the
/// group-velocity integral `2∫ (ω'(k)/2π)² dk`.
pub fn transport_evaluations(omega0: f64) -> TransportEvaluations {
    let w2 = omega0 * omega0;
    let green_form = 1.0 - w2 * (greens_lattice_quadrature(omega0, 0) + greens_lattice_quadrature(omega0, 1));
    let kubo = 2.0 * unit_trapezoid(|k| (2.0 * PI * k).sin().powi(2) / (w2 + 4.0 * (PI * k).sin().powi(2)));
    TransportEvaluations { closed_form: transport_coefficient(omega0), green_form, kubo }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::neumann_laplacian_matrix;

    #[test]
    fn stencil_examples() {
        assert_eq!(neumann_laplacian(&[1.0, 0.0]), vec![-1.0, 1.0]);
        assert_eq!(neumann_laplacian(&[2.5; 7]), vec![0.0; 7]);
        let b = NeumannEigenbasis::new(3, 1.0);
        assert_eq!(
            b.laplacian_apply(&[1.0, 2.0]),
            Err(SpectralError::LengthMismatch { expected: 4, got: 2 })
        );
    }

    #[test]
    fn eigenpairs_match_dense_eigensolver() {
        let n = 12;
        let basis = NeumannEigenbasis::new(n, 1.3);
        let neg_lap = -neumann_laplacian_matrix(n);
        let mut dense: Vec<f64> = neg_lap.symmetric_eigen().eigenvalues.iter().copied().collect();
        dense.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (j, &lam) in basis.lambdas().iter().enumerate() {
            assert!((dense[j] - lam).abs() < 1e-12);
            let psi: Vec<f64> = (0..=n).map(|x| basis.psi(j, x)).collect();
            let lap = basis.laplacian_apply(&psi).unwrap();
            for x in 0..=n {
                assert!((lap[x] + lam * psi[x]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn orthonormal_and_ordered() {
        let basis = NeumannEigenbasis::new(40, 0.5);
        let p = basis.psi_matrix();
        let gram = p * p.transpose();
        for j in 0..41 {
            for k in 0..41 {
                let want = if j == k { 1.0 } else { 0.0 };
                assert!((gram[(j, k)] - want).abs() < 1e-12);
            }
        }
        assert_eq!(basis.lambdas()[0], 0.0);
        assert!(basis.lambdas().windows(2).all(|w| w[0] < w[1]));
        assert!(basis.mus().iter().all(|&m| (0.25..=4.25).contains(&m)));
    }

    #[test]
    fn static_green_matches_dense_inverse() {
        let n = 10;
        let basis = NeumannEigenbasis::new(n, 1.0);
        let mut g = GreensFunction::new(&basis, 1.0, 1.0, 0).unwrap();
        let op = DMatrix::<f64>::identity(n + 1, n + 1) - neumann_laplacian_matrix(n);
        let inv = op.try_inverse().unwrap();
        for y in 0..=n {
            let col = g.column(y).to_vec();
            for x in 0..=n {
                assert!((col[x].re - inv[(x, y)]).abs() < 1e-12);
                assert!(col[x].im.abs() < 1e-15);
                assert_eq!(g.entry(x, y), g.entry(y, x));
            }
        }
    }

    #[test]
    fn driven_green_matches_dense_complex_solve() {
        let n = 9;
        let basis = NeumannEigenbasis::new(n, 1.0);
        let mut g = GreensFunction::new(&basis, 0.7, 1.3, 2).unwrap();
        let shift = g.shift();
        let lap = neumann_laplacian_matrix(n).map(|v| Complex64::new(v, 0.0));
        let op = DMatrix::<Complex64>::identity(n + 1, n + 1) * shift - lap;
        let inv = op.try_inverse().unwrap();
        let col = g.column(4).to_vec();
        for x in 0..=n {
            assert!((col[x] - inv[(x, 4)]).norm() < 1e-12);
        }
        assert!(g.residual(4) < 1e-12);
    }

    #[test]
    fn bulk_diagonal_approaches_lattice_value() {
        let target = greens_lattice(1.0, 0);
        let errs: Vec<f64> = [4usize, 8, 16, 32]
            .iter()
            .map(|&n| {
                let b = NeumannEigenbasis::new(n, 1.0);
                let g = GreensFunction::new(&b, 1.0, 1.0, 0).unwrap();
                (g.entry(n / 2, n / 2).re - target).abs()
            })
            .collect();
        assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    }

    #[test]
    fn lattice_green_values() {
        assert!((greens_lattice(1.0, 0) - 0.4472135955).abs() < 1e-10);
        assert!((greens_lattice(1.0, 1) - 0.1708203932).abs() < 1e-10);
        for w in [0.3, 1.0, 2.5] {
            for x in -4..=4 {
                assert!((greens_lattice(w, x) - greens_lattice_quadrature(w, x)).abs() < 1e-10);
                assert_eq!(greens_lattice(w, x), greens_lattice(w, -x));
            }
        }
    }

    #[test]
    fn transport_coefficient_routes_and_limits() {
        let e = transport_evaluations(1.0);
        assert!((e.closed_form - 0.3819660113).abs() < 1e-10);
        assert!(e.max_disagreement() < 1e-9);
        assert!((transport_coefficient(1e-4) - 1.0).abs() < 1e-3);
        assert!(transport_coefficient(1e4) < 1e-3);
        for w in [0.01, 0.5, 1.0, 3.0, 50.0] {
            let d = transport_coefficient(w);
            assert!(d > 0.0 && d < 1.0);
        }
    }
}
