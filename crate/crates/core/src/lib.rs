//! Periodic steady states of a pinned harmonic chain.
//!
//! The chain has sites `0..=n`, a Langevin bath at site `0`, random velocity
//! flips in the bulk and a time-periodic force acting on site `n`. Two
//! engines compute its periodic stationary state: an exact spectral engine
//! (first and second moments) and a stochastic simulator.

pub mod first_moments;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod pdmp;
pub mod quadrature;
pub mod second_moments;
pub mod spectral;

pub use num_complex::Complex64;

pub use first_moments::{
    current_asymptotic, current_exact, mean_square_averages, mean_trajectory, solve_harmonics,
    work_functional, AsymptoticCurrent, CurrentReport, HarmonicField,
};
pub use model::{force_value, validate, ChainConfig, ChainParams, ForceSpec, Model, Requirements};
pub use second_moments::{
    covariance_blocks, macroscopic_profile_check, mixing_matrix, periodic_covariance_ode,
    solve_profile, theta_weight, theta_weight_m, variance_harmonics, CovarianceSolution,
    MixingMatrix, VarianceReport,
};
pub use spectral::{greens_lattice, transport_coefficient, GreensFunction, NeumannEigenbasis};
