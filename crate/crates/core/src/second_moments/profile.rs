use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{MixingMatrix, SecondMomentError};
use crate::model::Model;

const FIXED_POINT_TOL: f64 = 1e-12;
const FIXED_POINT_CAP: usize = 100_000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub enum ProfileMethod {
    /// Cholesky factorisation of `I - M` restricted to sites `1..=n`.
    #[default]
    Direct,
    /// Iteration of the contraction `T ↦ T₋M_{·,0} + M_{·,≥1}T + ⟨p̄²⟩`.
    FixedPoint,
}

/// Time-averaged kinetic temperature profile `⟨p_x²⟩`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Profile {
    pub t_minus: f64,
    pub p2: Vec<f64>,
    pub method: ProfileMethod,
    pub iterations: usize,
}

impl Profile {
    /// Excess `⟨p_x²⟩ - T₋`.
    pub fn excess(&self) -> Vec<f64> {
        self.p2.iter().map(|v| v - self.t_minus).collect()
    }
}

/// Solves `T_x = T₋M_{x,0} + Σ_{x'≥1} M_{x,x'}T_{x'} + ⟨p̄_x²⟩`.
///
/// Works with the excess `τ = T - T₋`, for which the bath column drops out
/// by bistochasticity: `τ_x = Σ_{x'≥1} M_{x,x'}τ_{x'} + ⟨p̄_x²⟩`.
pub fn solve_profile(
    model: &Model,
    mixing: &MixingMatrix,
    mean_p2: &[f64],
    method: ProfileMethod,
) -> Result<Profile, SecondMomentError> {
    let size = model.params().sites();
    assert_eq!(mean_p2.len(), size, "mean square vector length");
    assert_eq!(mixing.n(), model.n(), "mixing matrix size");
    let m = mixing.matrix();
    let n = size - 1;
    let (tau, iterations) = match method {
        ProfileMethod::Direct => {
            let block = DMatrix::<f64>::identity(n, n) - m.view((1, 1), (n, n));
            let chol = block
                .cholesky()
                .ok_or_else(|| SecondMomentError::SingularSystem("I - M on sites 1..n is not positive definite".into()))?;
            let tail = chol.solve(&DVector::from_column_slice(&mean_p2[1..]));
            let head = m.view((0, 1), (1, n)).dot(&tail.transpose()) + mean_p2[0];
            let mut tau = vec![head];
            tau.extend(tail.iter());
            (tau, 0)
        }
        ProfileMethod::FixedPoint => fixed_point(m, mean_p2)?,
    };
    let t_minus = model.params().t_minus;
    Ok(Profile { t_minus, p2: tau.iter().map(|v| t_minus + v).collect(), method, iterations })
}

fn fixed_point(m: &DMatrix<f64>, source: &[f64]) -> Result<(Vec<f64>, usize), SecondMomentError> {
    let size = source.len();
    let mut tau = source.to_vec();
    let mut prev_increment = f64::INFINITY;
    let mut next = vec![0.0; size];
    for it in 1..=FIXED_POINT_CAP {
        for x in 0..size {
            let row = m.row(x);
            next[x] = source[x] + (1..size).map(|y| row[y] * tau[y]).sum::<f64>();
        }
        let increment = tau.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        std::mem::swap(&mut tau, &mut next);
        // A posteriori bound: remaining error ≤ increment · r / (1 - r).
        let ratio = increment / prev_increment;
        let bound = if it > 1 && ratio < 1.0 { increment * ratio / (1.0 - ratio) } else { f64::INFINITY };
        if increment == 0.0 || bound < FIXED_POINT_TOL {
            return Ok((tau, it));
        }
        prev_increment = increment;
    }
    Err(SecondMomentError::NoConvergence { iterations: FIXED_POINT_CAP, increment: prev_increment })
}
