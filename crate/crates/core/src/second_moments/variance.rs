use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::mixing::spectral_contraction;
use super::SecondMomentError;
use crate::first_moments::HarmonicField;
use crate::spectral::NeumannEigenbasis;

/// Frequency-dependent mixing weight, `Θ_0 = Θ`.
///
/// With `α = 2πim/θ_n`:
/// `Θ_m = 4γ/(4γ+α) · {1 + [α(c+c') + (c-c')²/(2γ+α)] / [(4γ+α)(c+c' + (2γ+α)α)]}^{-1}`.
pub fn theta_weight_m(c: f64, cp: f64, gamma: f64, theta_n: f64, m: i64) -> Complex64 {
    let alpha = Complex64::new(0.0, 2.0 * PI * m as f64 / theta_n);
    let g2 = alpha + 2.0 * gamma;
    let g4 = alpha + 4.0 * gamma;
    let sum = c + cp;
    let diff = c - cp;
    let inner = (alpha * sum + diff * diff / g2) / (g4 * (sum + g2 * alpha));
    4.0 * gamma / g4 / (1.0 + inner)
}

/// `M(m)_{x,y} = Σ_{j,j'} Θ_m(μ_j, μ_{j'}) ψ_j(x)ψ_{j'}(x)ψ_j(y)ψ_{j'}(y)`.
pub fn mixing_matrix_m(basis: &NeumannEigenbasis, gamma: f64, theta_n: f64, m: i64) -> DMatrix<Complex64> {
    let mus = basis.mus();
    let size = basis.sites();
    let weights = DMatrix::from_fn(size, size, |j, k| theta_weight_m(mus[j], mus[k], gamma, theta_n, m));
    spectral_contraction(size, &weights)
}

/// Harmonics of `V_x(t) = E p_x²(t) - ⟨p_x²⟩`.
#[derive(Clone, Debug, Serialize)]
pub struct VarianceReport {
    pub n: usize,
    /// `Ṽ(m)` for every `m ≠ 0` in the support of `p̄²`.
    #[serde(skip)]
    pub harmonics: BTreeMap<i64, Vec<Complex64>>,
    /// `Σ_x (1/θ_n)∫ V_x(t)² dt`.
    pub total_variance: f64,
    /// `n² · total_variance`.
    pub scaled: f64,
}

/// Solves `(I - M(m)P) Ṽ(m) = ṽ(m)` for each `m`, `P` dropping the bath column,
/// with `ṽ_x(m) = Σ_ℓ p̃_x(ℓ) p̃_x(m - ℓ)`.
pub fn variance_harmonics(basis: &NeumannEigenbasis, field: &HarmonicField) -> Result<VarianceReport, SecondMomentError> {
    let p = field.params();
    if (p.a + 0.5).abs() > 1e-12 || p.b != 0.0 {
        return Err(SecondMomentError::Regime { a: p.a, b: p.b });
    }
    assert_eq!(basis.n(), p.n, "basis size");
    let size = p.sites();
    let ells = field.ells();
    let mut sources: BTreeMap<i64, Vec<Complex64>> = BTreeMap::new();
    for (k1, &l1) in ells.iter().enumerate() {
        for (k2, &l2) in ells.iter().enumerate() {
            let m = l1 + l2;
            if m == 0 {
                continue;
            }
            let v = sources.entry(m).or_insert_with(|| vec![Complex64::default(); size]);
            for x in 0..size {
                v[x] += field.p(k1)[x] * field.p(k2)[x];
            }
        }
    }
    let solved: Result<Vec<(i64, Vec<Complex64>)>, SecondMomentError> = sources
        .into_par_iter()
        .filter(|(_, v)| v.iter().any(|z| z.norm() > 0.0))
        .map(|(m, v)| {
            let mut op = -mixing_matrix_m(basis, p.gamma, p.theta_n(), m);
            for x in 0..size {
                op[(x, 0)] = Complex64::default();
                op[(x, x)] += 1.0;
            }
            let sol = op
                .lu()
                .solve(&DVector::from_vec(v))
                .ok_or_else(|| SecondMomentError::SingularSystem(format!("I - M(m)P at m = {m}")))?;
            Ok((m, sol.iter().copied().collect()))
        })
        .collect();
    let harmonics: BTreeMap<i64, Vec<Complex64>> = solved?.into_iter().collect();
    let total_variance: f64 = harmonics.values().flat_map(|v| v.iter().map(|z| z.norm_sqr())).sum();
    let nf = p.n as f64;
    Ok(VarianceReport { n: p.n, harmonics, total_variance, scaled: nf * nf * total_variance })
}
