//! Periodic means in frequency space, the exact current and its large-`n` limit.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::linalg::solve_tridiagonal;
use crate::model::{ChainParams, Model};
use crate::quadrature::unit_trapezoid;
use crate::spectral::{apply_harmonic_operator, harmonic_shift};

/// Relative agreement required between the two current evaluations.
pub const ROUTE_TOL: f64 = 1e-12;
/// Relative agreement required between closed forms and quadrature.
pub const CLOSED_FORM_TOL: f64 = 1e-8;

#[derive(Debug, Error, PartialEq)]
pub enum FirstMomentError {
    #[error("vanishing pivot at row {row} of harmonic {ell}")]
    SingularPivot { ell: i64, row: usize },
    #[error("(a, b) = ({a}, {b}) is outside the scaling regime")]
    Regime { a: f64, b: f64 },
    #[error("current evaluations disagree: {spectral} vs {plancherel}")]
    RouteMismatch { spectral: f64, plancherel: f64 },
    #[error("closed form {closed} and quadrature {quadrature} disagree at harmonic {ell}")]
    ClosedFormMismatch { ell: i64, closed: f64, quadrature: f64 },
}

/// Fourier coefficients `q̃(ℓ)`, `p̃(ℓ)` of the periodic means, one entry per harmonic in the force support.
#[derive(Clone, Debug)]
pub struct HarmonicField {
    model: Model,
    ells: Vec<i64>,
    q: Vec<Vec<Complex64>>,
    p: Vec<Vec<Complex64>>,
}

impl HarmonicField {
    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn params(&self) -> &ChainParams {
        self.model.params()
    }

    pub fn ells(&self) -> &[i64] {
        &self.ells
    }

    pub fn q(&self, k: usize) -> &[Complex64] {
        &self.q[k]
    }

    pub fn p(&self, k: usize) -> &[Complex64] {
        &self.p[k]
    }

    /// Position of harmonic `ell` in [`Self::ells`].
    pub fn index_of(&self, ell: i64) -> Option<usize> {
        self.ells.iter().position(|&l| l == ell)
    }

    /// `2πℓ/θ_n`.
    pub fn frequency(&self, ell: i64) -> f64 {
        2.0 * PI * ell as f64 / self.params().theta_n()
    }

    /// `n^a 𝓕̃(ℓ)`.
    pub fn forcing(&self, ell: i64) -> Complex64 {
        self.model.force().coeff(ell) * self.params().amplitude()
    }

    /// `‖L q̃(ℓ) - n^a 𝓕̃(ℓ) e_n‖_∞` for the `k`-th harmonic.
    pub fn residual(&self, k: usize) -> f64 {
        let p = self.params();
        let ell = self.ells[k];
        let lq = apply_harmonic_operator(harmonic_shift(p.omega0, p.gamma, p.theta_n(), ell), &self.q[k]);
        let rhs = self.forcing(ell);
        lq.iter()
            .enumerate()
            .map(|(x, v)| (v - if x == p.n { rhs } else { Complex64::default() }).norm())
            .fold(0.0, f64::max)
    }
}

/// Solves `L q̃(ℓ) = n^a 𝓕̃(ℓ) e_n` for every harmonic by tridiagonal elimination.
pub fn solve_harmonics(model: &Model) -> Result<HarmonicField, FirstMomentError> {
    let p = *model.params();
    let ells = model.force().support();
    let size = p.sites();
    let solved: Result<Vec<_>, _> = ells
        .par_iter()
        .map(|&ell| {
            let shift = harmonic_shift(p.omega0, p.gamma, p.theta_n(), ell);
            let one = Complex64::new(1.0, 0.0);
            let off = vec![-one; size];
            let diag: Vec<Complex64> = (0..size)
                .map(|x| shift + if x == 0 || x == p.n { 1.0 } else { 2.0 })
                .collect();
            let mut rhs = vec![Complex64::default(); size];
            rhs[p.n] = model.force().coeff(ell) * p.amplitude();
            let q = solve_tridiagonal(&off, &diag, &off, &rhs)
                .map_err(|row| FirstMomentError::SingularPivot { ell, row })?;
            let iw = Complex64::new(0.0, 2.0 * PI * ell as f64 / p.theta_n());
            let pt = q.iter().map(|&v| iw * v).collect();
            Ok((q, pt))
        })
        .collect();
    let (q, pt) = solved?.into_iter().unzip();
    Ok(HarmonicField { model: model.clone(), ells, q, p: pt })
}

/// `(q̄(t), p̄(t))`.
pub fn mean_trajectory(field: &HarmonicField, t: f64) -> (Vec<f64>, Vec<f64>) {
    let size = field.params().sites();
    let mut q = vec![0.0; size];
    let mut p = vec![0.0; size];
    for (k, &ell) in field.ells.iter().enumerate() {
        let phase = Complex64::from_polar(1.0, field.frequency(ell) * t);
        for x in 0..size {
            q[x] += (field.q[k][x] * phase).re;
            p[x] += (field.p[k][x] * phase).re;
        }
    }
    (q, p)
}

/// Both evaluations of the time-averaged current `J_n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CurrentExact {
    /// `-2γ Σ_ℓ (2πℓ/θ_n)² Σ_x |q̃_x(ℓ)|²`.
    pub spectral: f64,
    /// `-n^a Σ_ℓ 𝓕̃(ℓ) p̃_n(ℓ)*`.
    pub plancherel: f64,
}

pub fn current_exact(field: &HarmonicField) -> Result<CurrentExact, FirstMomentError> {
    let p = field.params();
    let mut spectral = 0.0;
    let mut plancherel = 0.0;
    for (k, &ell) in field.ells.iter().enumerate() {
        let w = field.frequency(ell);
        let norm: f64 = field.q[k].iter().map(|v| v.norm_sqr()).sum();
        spectral -= 2.0 * p.gamma * w * w * norm;
        plancherel -= (field.forcing(ell) * field.p[k][p.n].conj()).re;
    }
    let scale = spectral.abs().max(plancherel.abs());
    if (spectral - plancherel).abs() > ROUTE_TOL * scale {
        return Err(FirstMomentError::RouteMismatch { spectral, plancherel });
    }
    Ok(CurrentExact { spectral, plancherel })
}

/// `𝒬(ℓ)` by quadrature and by closed form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QEntry {
    pub ell: i64,
    pub quadrature: f64,
    pub closed_form: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AsymptoticCurrent {
    /// `lim n J_n`.
    pub j_limit: f64,
    pub q_table: Vec<QEntry>,
}

fn check_regime(p: &ChainParams) -> Result<(), FirstMomentError> {
    if p.in_scaling_regime() {
        Ok(())
    } else {
        Err(FirstMomentError::Regime { a: p.a, b: p.b })
    }
}

/// `(4 sin²(πz/2) + c)² + β²` denominators for the limit integrals, with `c = ω₀² - Ω²`.
fn limit_denominator(z: f64, c: f64, beta: f64) -> f64 {
    let s = 4.0 * (0.5 * PI * z).sin().powi(2) + c;
    s * s + beta * beta
}

fn half_cos2(z: f64) -> f64 {
    (0.5 * PI * z).cos().powi(2)
}

/// `𝒬(ℓ)` by quadrature in the `b = 0` regime.
pub fn q_quadrature_resonant(p: &ChainParams, f2: f64, ell: i64) -> f64 {
    let w = 2.0 * PI * ell as f64 / p.theta;
    let c = p.omega0 * p.omega0 - w * w;
    let beta = 2.0 * p.gamma * w;
    4.0 * p.gamma * f2 * unit_trapezoid(|z| half_cos2(z) / limit_denominator(z, c, beta))
}

/// `𝒬(ℓ)` in the `b = 0` regime from the complex lattice Green's function at `λ = ω₀² - Ω² + iβ`.
pub fn q_closed_resonant(p: &ChainParams, f2: f64, ell: i64) -> f64 {
    let w = 2.0 * PI * ell as f64 / p.theta;
    let lambda = Complex64::new(p.omega0 * p.omega0 - w * w, 2.0 * p.gamma * w);
    let s = (1.0 + 4.0 / lambda).sqrt();
    let g0 = 1.0 / (lambda * s);
    let rho = 1.0 + lambda * 0.5 * (1.0 + s);
    let g1 = g0 / rho;
    -p.theta * f2 / (2.0 * PI * ell as f64) * (g0 + g1).im
}

/// `𝒬(ℓ)` by quadrature in the `b > 0` regime.
pub fn q_quadrature_slow(p: &ChainParams, f2: f64) -> f64 {
    let w2 = p.omega0 * p.omega0;
    4.0 * p.gamma * f2 * unit_trapezoid(|z| half_cos2(z) / limit_denominator(z, w2, 0.0))
}

/// `2γ|𝓕̃|²(4 + ω₀²)/(ω₀⁴ + 4ω₀²)^{3/2}`.
pub fn q_closed_slow(p: &ChainParams, f2: f64) -> f64 {
    let w2 = p.omega0 * p.omega0;
    2.0 * p.gamma * f2 * (4.0 + w2) / (w2 * w2 + 4.0 * w2).powf(1.5)
}

/// `J = -(2π/θ)² Σ_ℓ ℓ² 𝒬(ℓ)` with both evaluations of `𝒬` cross-checked.
pub fn current_asymptotic(model: &Model) -> Result<AsymptoticCurrent, FirstMomentError> {
    let p = model.params();
    check_regime(p)?;
    let mut q_table = Vec::new();
    let mut sum = 0.0;
    for ell in model.force().support() {
        let f2 = model.force().coeff(ell).norm_sqr();
        let (quadrature, closed) = if p.b > 0.0 {
            (q_quadrature_slow(p, f2), q_closed_slow(p, f2))
        } else {
            (q_quadrature_resonant(p, f2, ell), q_closed_resonant(p, f2, ell))
        };
        if (quadrature - closed).abs() > CLOSED_FORM_TOL * quadrature.abs().max(f64::MIN_POSITIVE) {
            return Err(FirstMomentError::ClosedFormMismatch { ell, closed, quadrature });
        }
        sum += (ell * ell) as f64 * quadrature;
        q_table.push(QEntry { ell, quadrature, closed_form: closed });
    }
    let k = 2.0 * PI / p.theta;
    Ok(AsymptoticCurrent { j_limit: -k * k * sum, q_table })
}

/// Work functional `I_n = n^a Σ_ℓ 𝓕̃(ℓ) q̃_n(ℓ)*`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WorkReport {
    pub i_n: f64,
    /// Imaginary residue of the spectral sum; zero for Hermitian forces.
    pub i_n_imag: f64,
    /// `lim I_n / n^{2a}` when the scaling regime holds.
    pub limit_coeff: Option<f64>,
}

pub fn work_functional(field: &HarmonicField) -> WorkReport {
    let n = field.params().n;
    let total: Complex64 = field
        .ells
        .iter()
        .enumerate()
        .map(|(k, &ell)| field.forcing(ell) * field.q[k][n].conj())
        .sum();
    WorkReport { i_n: total.re, i_n_imag: total.im, limit_coeff: work_limit(field.model()).ok() }
}

/// `lim I_n / n^{2a}` by quadrature.
pub fn work_limit(model: &Model) -> Result<f64, FirstMomentError> {
    let p = model.params();
    check_regime(p)?;
    let w2 = p.omega0 * p.omega0;
    let mut total = 0.0;
    for ell in model.force().support() {
        let f2 = model.force().coeff(ell).norm_sqr();
        let integral = if p.b > 0.0 {
            unit_trapezoid(|z| half_cos2(z) / (4.0 * (0.5 * PI * z).sin().powi(2) + w2))
        } else {
            let w = 2.0 * PI * ell as f64 / p.theta;
            let c = w2 - w * w;
            let beta = 2.0 * p.gamma * w;
            unit_trapezoid(|z| {
                half_cos2(z) * (4.0 * (0.5 * PI * z).sin().powi(2) + c) / limit_denominator(z, c, beta)
            })
        };
        total += 2.0 * f2 * integral;
    }
    Ok(total)
}

/// Period averages `⟨p̄_x²⟩` and `⟨q̄_x²⟩`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeanSquares {
    pub p2: Vec<f64>,
    pub q2: Vec<f64>,
}

impl MeanSquares {
    pub fn p2_sum(&self) -> f64 {
        self.p2.iter().sum()
    }

    pub fn q2_sum(&self) -> f64 {
        self.q2.iter().sum()
    }
}

pub fn mean_square_averages(field: &HarmonicField) -> MeanSquares {
    let size = field.params().sites();
    let mut p2 = vec![0.0; size];
    let mut q2 = vec![0.0; size];
    for k in 0..field.ells.len() {
        for x in 0..size {
            p2[x] += field.p[k][x].norm_sqr();
            q2[x] += field.q[k][x].norm_sqr();
        }
    }
    MeanSquares { p2, q2 }
}

/// Finite-`n` current data together with its asymptotic counterparts.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurrentReport {
    pub n: usize,
    pub j_n: f64,
    pub j_limit: Option<f64>,
    pub q_ell: Vec<QEntry>,
    pub i_n: f64,
    pub i_limit_coeff: Option<f64>,
    pub p2_sum: f64,
    pub q2_sum: f64,
}

impl CurrentReport {
    /// `|n J_n - J| / |J|`.
    pub fn relative_error(&self) -> Option<f64> {
        self.j_limit.map(|j| relative(self.n as f64 * self.j_n, j))
    }

    /// `|I_n / n^{2a} - 𝔍| / |𝔍|` given the amplitude exponent.
    pub fn work_relative_error(&self, a: f64) -> Option<f64> {
        self.i_limit_coeff.map(|c| relative(self.i_n / (self.n as f64).powf(2.0 * a), c))
    }
}

fn relative(value: f64, reference: f64) -> f64 {
    if reference == 0.0 {
        value.abs()
    } else {
        (value - reference).abs() / reference.abs()
    }
}

/// Runs every first-moment computation for one model.
pub fn current_report(model: &Model) -> Result<CurrentReport, FirstMomentError> {
    let field = solve_harmonics(model)?;
    let exact = current_exact(&field)?;
    let work = work_functional(&field);
    let ms = mean_square_averages(&field);
    let asym = if model.params().in_scaling_regime() { Some(current_asymptotic(model)?) } else { None };
    Ok(CurrentReport {
        n: model.n(),
        j_n: exact.spectral,
        j_limit: asym.as_ref().map(|a| a.j_limit),
        q_ell: asym.map(|a| a.q_table).unwrap_or_default(),
        i_n: work.i_n,
        i_limit_coeff: work.limit_coeff,
        p2_sum: ms.p2_sum(),
        q2_sum: ms.q2_sum(),
    })
}
