//! Second moments of the periodic state.
//!
//! The temperature profile solves a self-consistent equation with the
//! bistochastic mixing matrix `M`; covariance blocks follow in the Neumann
//! eigenbasis; the time variance of `E p_x²(t)` is computed per harmonic and
//! cross-checked against a direct integration of the periodic moment ODE.

mod covariance;
mod macroscopic;
mod mixing;
mod ode;
mod profile;
mod variance;

use thiserror::Error;

use crate::first_moments::FirstMomentError;

pub use covariance::{covariance_blocks, CovarianceSolution};
pub use macroscopic::{macroscopic_profile_check, ProfileDeviation, TestFunction, WeakCheck};
pub use mixing::{mixing_matrix, mixing_matrix_brute_force, mixing_matrix_spectral, theta_weight, MixingMatrix};
pub use ode::{periodic_covariance_ode, OdeOptions, PeriodicMoments};
pub use profile::{solve_profile, Profile, ProfileMethod};
pub use variance::{mixing_matrix_m, theta_weight_m, variance_harmonics, VarianceReport};

#[derive(Debug, Error, PartialEq)]
pub enum SecondMomentError {
    #[error("{check} fails at ({row}, {col}): {value:e}")]
    InvariantFailure { check: &'static str, row: usize, col: usize, value: f64 },
    #[error("fixed point not reached after {iterations} iterations (last increment {increment:e})")]
    NoConvergence { iterations: usize, increment: f64 },
    #[error("singular system: {0}")]
    SingularSystem(String),
    #[error("block {block} is not positive semidefinite at ({row}, {col})")]
    PsdFailure { block: &'static str, row: usize, col: usize },
    #[error("(a, b) = ({a}, {b}) is not supported; only (-1/2, 0) is")]
    Regime { a: f64, b: f64 },
    #[error("periodic orbit not reached: period-map gap {gap:e}")]
    NoPeriodicConvergence { gap: f64 },
    #[error(transparent)]
    FirstMoments(#[from] FirstMomentError),
}
