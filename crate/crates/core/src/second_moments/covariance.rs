use nalgebra::DMatrix;
use serde::Serialize;

use super::mixing::theta_table;
use super::{Profile, SecondMomentError};
use crate::first_moments::HarmonicField;
use crate::model::Model;
use crate::spectral::NeumannEigenbasis;

const PSD_TOL: f64 = 1e-10;

/// Time-averaged second moments of the periodic state.
///
/// `sq`, `sp`, `sqp` are centred; `sqp[(a, b)] = ⟨q_a p_b⟩`. Every other
/// field includes the contribution of the periodic means.
#[derive(Clone, Debug, Serialize)]
pub struct CovarianceSolution {
    pub profile: Vec<f64>,
    #[serde(skip)]
    pub sq: DMatrix<f64>,
    #[serde(skip)]
    pub sp: DMatrix<f64>,
    #[serde(skip)]
    pub sqp: DMatrix<f64>,
    /// `⟨q_x q_{x+k}⟩` for `k = 0, 1, 2`, with `q_{n+1} = q_n` closure.
    pub q_corr: [Vec<f64>; 3],
    /// `⟨(q_x - q_{x-1})²⟩`, zero at `x = 0`.
    pub r2: Vec<f64>,
    /// Fluctuation–dissipation functional `⟨𝔉_x⟩`.
    pub f_functional: Vec<f64>,
    /// `⟨j_{x,x+1}⟩` for `x = -1..=n`.
    pub bond_currents: Vec<f64>,
    /// `⟨ℰ_x⟩`.
    pub energy: Vec<f64>,
    /// Full second moments including means.
    #[serde(skip)]
    pub full_q: DMatrix<f64>,
    #[serde(skip)]
    pub full_qp: DMatrix<f64>,
}

impl CovarianceSolution {
    pub fn sites(&self) -> usize {
        self.profile.len()
    }

    /// Largest relative deviation of any bond current from `reference`.
    pub fn current_spread(&self, reference: f64) -> f64 {
        self.bond_currents.iter().map(|j| (j - reference).abs()).fold(0.0, f64::max) / reference.abs()
    }

    /// `max_{1≤x≤n-1} |⟨𝔉_x⟩ - ⟨𝔉_1⟩ - slope (x - 1)| / |⟨𝔉_0⟩|`.
    pub fn f_affine_deviation(&self, slope: f64) -> f64 {
        let n = self.sites() - 1;
        let f = &self.f_functional;
        (1..n).map(|x| (f[x] - f[1] - slope * (x - 1) as f64).abs()).fold(0.0, f64::max) / f[0].abs()
    }
}

/// Covariance blocks from a solved profile.
///
/// In the eigenbasis `F̃ = Ψ diag(T₋, ⟨p_1²⟩, …, ⟨p_n²⟩) Ψᵀ`,
/// `S̃p = Θ∘F̃`, `S̃q = 2Θ/(μ+μ')∘F̃`, `4γ S̃qp = (μ - μ')∘S̃q`.
pub fn covariance_blocks(
    model: &Model,
    basis: &NeumannEigenbasis,
    field: &HarmonicField,
    profile: &Profile,
) -> Result<CovarianceSolution, SecondMomentError> {
    let p = model.params();
    let size = p.sites();
    let n = p.n;
    let psi = basis.psi_matrix();
    let mus = basis.mus();
    let theta = theta_table(basis, p.gamma);

    let mut bath = profile.p2.clone();
    bath[0] = p.t_minus;
    let f_tilde = psi * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(bath)) * psi.transpose();
    let sp_t = theta.component_mul(&f_tilde);
    let sq_t = DMatrix::from_fn(size, size, |j, k| 2.0 * theta[(j, k)] / (mus[j] + mus[k]) * f_tilde[(j, k)]);
    let sqp_t = DMatrix::from_fn(size, size, |j, k| sq_t[(j, k)] * (mus[j] - mus[k]) / (4.0 * p.gamma));
    let to_sites = |m: &DMatrix<f64>| psi.transpose() * m * psi;
    let sp = to_sites(&sp_t);
    let sq = to_sites(&sq_t);
    let sqp = to_sites(&sqp_t);
    psd_check("Sp", &sp)?;
    psd_check("Sq", &sq)?;

    let mut mean_qq = DMatrix::zeros(size, size);
    let mut mean_qp = DMatrix::zeros(size, size);
    for k in 0..field.ells().len() {
        let (q, pt) = (field.q(k), field.p(k));
        for x in 0..size {
            for y in 0..size {
                mean_qq[(x, y)] += (q[x] * q[y].conj()).re;
                mean_qp[(x, y)] += (q[x] * pt[y].conj()).re;
            }
        }
    }
    let full_q = &sq + mean_qq;
    let full_qp = &sqp + mean_qp;

    let cq = |x: isize, y: isize| {
        let c = |v: isize| v.clamp(0, n as isize) as usize;
        full_q[(c(x), c(y))]
    };
    let w2 = p.omega0 * p.omega0;
    let mut q_corr = [vec![0.0; size], vec![0.0; size], vec![0.0; size]];
    let mut r2 = vec![0.0; size];
    let mut f_functional = vec![0.0; size];
    let mut energy = vec![0.0; size];
    for x in 0..size {
        let xi = x as isize;
        for (k, row) in q_corr.iter_mut().enumerate() {
            row[x] = cq(xi, xi + k as isize);
        }
        r2[x] = cq(xi, xi) - 2.0 * cq(xi, xi - 1) + cq(xi - 1, xi - 1);
        f_functional[x] = profile.p2[x] + cq(xi + 1, xi) - cq(xi + 1, xi - 1) - cq(xi, xi) + cq(xi, xi - 1)
            - w2 * cq(xi, xi);
        energy[x] = 0.5 * (profile.p2[x] + r2[x] + w2 * cq(xi, xi));
    }

    let mut bond_currents = Vec::with_capacity(size + 1);
    bond_currents.push(2.0 * p.gamma * (p.t_minus - profile.p2[0]));
    for x in 0..n {
        bond_currents.push(-(full_qp[(x + 1, x)] - full_qp[(x, x)]));
    }
    let work: f64 = field
        .ells()
        .iter()
        .enumerate()
        .map(|(k, &ell)| (field.forcing(ell) * field.p(k)[n].conj()).re)
        .sum();
    bond_currents.push(-work);

    Ok(CovarianceSolution {
        profile: profile.p2.clone(),
        sq,
        sp,
        sqp,
        q_corr,
        r2,
        f_functional,
        bond_currents,
        energy,
        full_q,
        full_qp,
    })
}

/// Necessary conditions for positive semidefiniteness: nonnegative diagonal
/// and every 2×2 principal minor nonnegative.
fn psd_check(block: &'static str, m: &DMatrix<f64>) -> Result<(), SecondMomentError> {
    let size = m.nrows();
    let scale = m.diagonal().amax().max(f64::MIN_POSITIVE);
    for x in 0..size {
        if m[(x, x)] < -PSD_TOL * scale {
            return Err(SecondMomentError::PsdFailure { block, row: x, col: x });
        }
        for y in 0..x {
            if m[(x, x)] * m[(y, y)] - m[(x, y)] * m[(y, x)] < -PSD_TOL * scale * scale {
                return Err(SecondMomentError::PsdFailure { block, row: x, col: y });
            }
        }
    }
    Ok(())
}
