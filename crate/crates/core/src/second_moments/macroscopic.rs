use std::f64::consts::PI;

use serde::Serialize;

use super::CovarianceSolution;
use crate::model::Model;
use crate::quadrature::unit_trapezoid;
use crate::spectral::transport_coefficient;

/// Fixed battery of test functions on `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum TestFunction {
    One,
    Linear,
    Quadratic,
    Sine,
}

impl TestFunction {
    pub const ALL: [TestFunction; 4] = [TestFunction::One, TestFunction::Linear, TestFunction::Quadratic, TestFunction::Sine];

    pub fn eval(self, u: f64) -> f64 {
        match self {
            TestFunction::One => 1.0,
            TestFunction::Linear => u,
            TestFunction::Quadratic => u * u,
            TestFunction::Sine => (PI * u).sin(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WeakCheck {
    pub phi: TestFunction,
    /// `(1/n) Σ_x φ(x/n) ⟨ℰ_x⟩`.
    pub lattice: f64,
    /// `∫₀¹ φ T`.
    pub continuum: f64,
    /// `(1/n) Σ_x φ(x/n)(⟨p_x²⟩ - ⟨r_x²⟩ - ω₀²⟨q_x²⟩)`.
    pub equipartition: f64,
}

/// Distance of a finite-`n` profile from `T(u) = T₋ - 4γJu/D`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProfileDeviation {
    pub n: usize,
    pub max_dev: f64,
    pub argmax: usize,
    pub limit_slope: f64,
    pub weak: Vec<WeakCheck>,
}

impl ProfileDeviation {
    pub fn max_equipartition(&self) -> f64 {
        self.weak.iter().map(|w| w.equipartition.abs()).fold(0.0, f64::max)
    }

    pub fn max_weak_error(&self) -> f64 {
        self.weak.iter().map(|w| (w.lattice - w.continuum).abs()).fold(0.0, f64::max)
    }
}

/// Compares a solved profile with the linear macroscopic law for the limit current `j_limit`.
pub fn macroscopic_profile_check(solution: &CovarianceSolution, model: &Model, j_limit: f64) -> ProfileDeviation {
    let p = model.params();
    let n = p.n;
    let nf = n as f64;
    let slope = -4.0 * p.gamma * j_limit / transport_coefficient(p.omega0);
    let law = |u: f64| p.t_minus + slope * u;
    let (argmax, max_dev) = solution
        .profile
        .iter()
        .enumerate()
        .map(|(x, &v)| (x, (v - law(x as f64 / nf)).abs()))
        .fold((0, 0.0), |best, cur| if cur.1 > best.1 { cur } else { best });
    let w2 = p.omega0 * p.omega0;
    let weak = TestFunction::ALL
        .iter()
        .map(|&phi| {
            let mut lattice = 0.0;
            let mut equipartition = 0.0;
            for x in 0..=n {
                let f = phi.eval(x as f64 / nf);
                lattice += f * solution.energy[x];
                equipartition += f * (solution.profile[x] - solution.r2[x] - w2 * solution.q_corr[0][x]);
            }
            WeakCheck {
                phi,
                lattice: lattice / nf,
                continuum: unit_trapezoid(|u| phi.eval(u) * law(u)),
                equipartition: equipartition / nf,
            }
        })
        .collect();
    ProfileDeviation { n, max_dev, argmax, limit_slope: slope, weak }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::first_moments::{mean_square_averages, solve_harmonics};
    use crate::model::{validate, ChainParams, ForceSpec, Requirements};
    use crate::second_moments::{covariance_blocks, mixing_matrix, solve_profile, ProfileMethod};
    use crate::spectral::NeumannEigenbasis;

    fn check(n: usize, force: ForceSpec, j: f64) -> ProfileDeviation {
        let model = validate(ChainParams::standard(n), force, Requirements::default()).unwrap();
        let basis = NeumannEigenbasis::new(n, 1.0);
        let field = solve_harmonics(&model).unwrap();
        let mix = mixing_matrix(&basis, 1.0).unwrap();
        let prof = solve_profile(&model, &mix, &mean_square_averages(&field).p2, ProfileMethod::Direct).unwrap();
        let cov = covariance_blocks(&model, &basis, &field, &prof).unwrap();
        macroscopic_profile_check(&cov, &model, j)
    }

    #[test]
    fn equilibrium_has_zero_deviation() {
        let d = check(20, ForceSpec::zero(), 0.0);
        assert_eq!(d.max_dev, 0.0);
        assert_eq!(d.limit_slope, 0.0);
    }

    #[test]
    fn driven_deviation_shrinks() {
        let j = -0.025308764223263447;
        let a = check(24, ForceSpec::cosine(1.0), j);
        let b = check(48, ForceSpec::cosine(1.0), j);
        assert!(b.max_dev < a.max_dev);
        assert!(b.max_equipartition() < a.max_equipartition());
    }
}
