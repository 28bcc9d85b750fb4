use std::f64::consts::PI;

use nalgebra::{ComplexField, DMatrix};
use num_complex::Complex64;

use super::SecondMomentError;
use crate::quadrature::composite_gauss_unit;
use crate::spectral::NeumannEigenbasis;

const SYMMETRY_TOL: f64 = 1e-12;
const ROW_SUM_TOL: f64 = 1e-10;

/// `Θ(μ, μ') = [1 + (μ - μ')² / (8γ²(μ + μ'))]^{-1}`.
pub fn theta_weight(mu: f64, mu_p: f64, gamma: f64) -> f64 {
    let d = mu - mu_p;
    1.0 / (1.0 + d * d / (8.0 * gamma * gamma * (mu + mu_p)))
}

/// Symmetric bistochastic matrix coupling site temperatures.
#[derive(Clone, Debug)]
pub struct MixingMatrix {
    n: usize,
    m: DMatrix<f64>,
    /// `ln M_{x,y}`; finite even where `M_{x,y}` underflows.
    log_m: Option<DMatrix<f64>>,
    contraction_rho: f64,
}

impl MixingMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn log_matrix(&self) -> Option<&DMatrix<f64>> {
        self.log_m.as_ref()
    }

    /// Spectral radius of `M` restricted to sites `1..=n`.
    pub fn contraction_rho(&self) -> f64 {
        self.contraction_rho
    }

    pub fn max_asymmetry(&self) -> f64 {
        (&self.m - self.m.transpose()).amax()
    }

    pub fn max_row_sum_error(&self) -> f64 {
        self.m.row_iter().map(|r| (r.sum() - 1.0).abs()).fold(0.0, f64::max)
    }

    pub fn min_entry(&self) -> f64 {
        self.m.min()
    }

    /// Smallest `ln M_{x,y}`.
    pub fn min_log_entry(&self) -> f64 {
        match &self.log_m {
            Some(l) => l.min(),
            None => self.m.min().ln(),
        }
    }
}

/// `Σ_{j,j'} W_{j,j'} ψ_j(x)ψ_{j'}(x)ψ_j(y)ψ_{j'}(y)` in `O(n³)`.
///
/// Uses `ψ_j(x)ψ_j(y) = (c_j/N)[cos(πj(x-y)/N) + cos(πj(x+y+1)/N)]`, so the
/// contraction reduces to `K = C W Cᵀ` over the `2N` cosine phases.
pub(crate) fn spectral_contraction<T>(size: usize, weights: &DMatrix<T>) -> DMatrix<T>
where
    T: ComplexField<RealField = f64> + Copy,
{
    let nf = size as f64;
    let cos = DMatrix::<T>::from_fn(2 * size, size, |k, j| {
        let c = if j == 0 { 0.5 } else { 1.0 };
        T::from_real(c * (PI * (j * k) as f64 / nf).cos())
    });
    let k = &cos * weights * cos.transpose();
    let scale = T::from_real(1.0 / (nf * nf));
    DMatrix::from_fn(size, size, |x, y| {
        let d = x.abs_diff(y);
        let s = x + y + 1;
        (k[(d, d)] + k[(d, s)] + k[(s, d)] + k[(s, s)]) * scale
    })
}

pub(crate) fn theta_table(basis: &NeumannEigenbasis, gamma: f64) -> DMatrix<f64> {
    let mus = basis.mus();
    DMatrix::from_fn(basis.sites(), basis.sites(), |j, k| theta_weight(mus[j], mus[k], gamma))
}

/// Builds `M` and asserts symmetry, bistochasticity, positivity and `ρ < 1`.
///
/// Entries come from `M_{x,y} = (4γ/π) ∫₀^∞ ω² |R_{x,y}(ω)|² dω` with
/// `R(ω) = (ω₀² - Δ_N - ω² + 2iγω)^{-1}`. Each entry of the tridiagonal
/// resolvent is a product of elimination pivots, so every `M_{x,y}` is an
/// integral of a positive quantity evaluated without cancellation; the
/// exponentially small far entries keep full relative accuracy.
pub fn mixing_matrix(basis: &NeumannEigenbasis, gamma: f64) -> Result<MixingMatrix, SecondMomentError> {
    let (m, log_m) = resolvent_assembly(basis.n(), basis.omega0(), gamma);
    let out = from_parts(basis.n(), m, Some(log_m));
    out.check()?;
    Ok(out)
}

/// `M` by the spectral double sum; accurate to rounding in absolute terms only.
pub fn mixing_matrix_spectral(basis: &NeumannEigenbasis, gamma: f64) -> MixingMatrix {
    from_parts(basis.n(), spectral_contraction(basis.sites(), &theta_table(basis, gamma)), None)
}

fn quadrature_panels(gamma: f64) -> usize {
    (16.0 * (1.0 / gamma).max(1.0)).ceil().min(4096.0) as usize
}

fn resolvent_assembly(n: usize, omega0: f64, gamma: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let size = n + 1;
    // Running log-sum-exp per upper-triangular entry.
    let mut peak = vec![f64::NEG_INFINITY; size * size];
    let mut acc = vec![0.0; size * size];
    let mut fwd = vec![Complex64::default(); size];
    let mut bwd = vec![Complex64::default(); size];
    let mut diag = vec![Complex64::default(); size];
    let mut log_prefix = vec![0.0; size + 1];
    for (u, wu) in composite_gauss_unit(quadrature_panels(gamma), 16) {
        let w = u / (1.0 - u);
        let jac = 1.0 / ((1.0 - u) * (1.0 - u));
        let shift = Complex64::new(omega0 * omega0 - w * w, 2.0 * gamma * w);
        for (x, d) in diag.iter_mut().enumerate() {
            let edges = usize::from(x == 0) + usize::from(x == n);
            *d = shift + (2 - edges) as f64;
        }
        fwd[0] = diag[0];
        for k in 1..size {
            fwd[k] = diag[k] - fwd[k - 1].inv();
        }
        bwd[n] = diag[n];
        for k in (0..n).rev() {
            bwd[k] = diag[k] - bwd[k + 1].inv();
        }
        for k in 0..size {
            log_prefix[k + 1] = log_prefix[k] + fwd[k].norm().ln();
        }
        let base = (wu * jac * w * w).ln();
        for y in 0..size {
            // R_{x,y} = R_{y,y} Π_{k=x}^{y-1} 1/fwd_k for x ≤ y.
            let log_ryy = -(fwd[y] + bwd[y] - diag[y]).norm().ln();
            for x in 0..=y {
                let l = base + 2.0 * (log_ryy - (log_prefix[y] - log_prefix[x]));
                let k = x * size + y;
                if l > peak[k] {
                    acc[k] = acc[k] * (peak[k] - l).exp() + 1.0;
                    peak[k] = l;
                } else {
                    acc[k] += (l - peak[k]).exp();
                }
            }
        }
    }
    let pre = (4.0 * gamma / PI).ln();
    let mut log_m = DMatrix::zeros(size, size);
    for x in 0..size {
        for y in x..size {
            let v = pre + peak[x * size + y] + acc[x * size + y].ln();
            log_m[(x, y)] = v;
            log_m[(y, x)] = v;
        }
    }
    (log_m.map(f64::exp), log_m)
}

fn from_parts(n: usize, m: DMatrix<f64>, log_m: Option<DMatrix<f64>>) -> MixingMatrix {
    let contraction_rho = if n == 0 {
        0.0
    } else {
        let block = m.view((1, 1), (n, n)).clone_owned();
        block.symmetric_eigen().eigenvalues.amax()
    };
    MixingMatrix { n, m, log_m, contraction_rho }
}

impl MixingMatrix {
    fn check(&self) -> Result<(), SecondMomentError> {
        let size = self.n + 1;
        for x in 0..size {
            let row_sum: f64 = self.m.row(x).sum();
            if (row_sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(SecondMomentError::InvariantFailure { check: "row sum", row: x, col: 0, value: row_sum });
            }
            for y in 0..size {
                let v = self.m[(x, y)];
                let positive = match &self.log_m {
                    Some(l) => l[(x, y)].is_finite(),
                    None => v > 0.0,
                };
                if !positive {
                    return Err(SecondMomentError::InvariantFailure { check: "positivity", row: x, col: y, value: v });
                }
                let asym = (v - self.m[(y, x)]).abs();
                if asym > SYMMETRY_TOL {
                    return Err(SecondMomentError::InvariantFailure { check: "symmetry", row: x, col: y, value: asym });
                }
            }
        }
        if !(self.contraction_rho < 1.0) {
            return Err(SecondMomentError::InvariantFailure {
                check: "contraction",
                row: 0,
                col: 0,
                value: self.contraction_rho,
            });
        }
        Ok(())
    }
}

/// Direct `O(n⁴)` evaluation of the defining double sum.
pub fn mixing_matrix_brute_force(basis: &NeumannEigenbasis, gamma: f64) -> MixingMatrix {
    let size = basis.sites();
    let theta = theta_table(basis, gamma);
    let mut m = DMatrix::zeros(size, size);
    for x in 0..size {
        for y in 0..size {
            let mut acc = 0.0;
            for j in 0..size {
                for k in 0..size {
                    acc += theta[(j, k)] * basis.psi(j, x) * basis.psi(k, x) * basis.psi(j, y) * basis.psi(k, y);
                }
            }
            m[(x, y)] = acc;
        }
    }
    from_parts(basis.n(), m, None)
}
