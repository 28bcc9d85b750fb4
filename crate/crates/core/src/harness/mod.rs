//! Command-level orchestration: sweeps, cross-engine comparisons and reports.
//!
//! Exit-code contract of the CLI: [`EXIT_PASS`] when every check passes,
//! [`EXIT_CHECK_FAILURE`] when a check or an engine invariant fails,
//! [`EXIT_CONFIG`] for unreadable or inadmissible configurations.

mod commands;
mod config;
pub mod output;
mod report;

use thiserror::Error;

pub use commands::{
    cmd_current, cmd_profile, cmd_simulate, cmd_variance, compare_simulation, mixing_checks, mixing_sweep,
    profile_checks, profile_sweep, solve_profile_pipeline, spectral_checks, spread_ratio, trend_check, verify_all,
    ProfileBounds, ProfileSolution, ScalingRow, Trend,
};
pub use config::{HarnessConfig, SimSettings, Sweeps, Tolerances};
pub use report::{Check, Report};

use crate::first_moments::FirstMomentError;
use crate::model::ModelError;
use crate::pdmp::SimError;
use crate::second_moments::SecondMomentError;
use crate::spectral::SpectralError;

pub const EXIT_PASS: u8 = 0;
pub const EXIT_CHECK_FAILURE: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("malformed config: {0}")]
    Json(serde_json::Error),
    #[error("cannot access {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot write csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Usage(String),
    #[error("engine failure: {0}")]
    Engine(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> u8 {
        match self {
            HarnessError::Engine(_) => EXIT_CHECK_FAILURE,
            _ => EXIT_CONFIG,
        }
    }
}

impl From<FirstMomentError> for HarnessError {
    fn from(e: FirstMomentError) -> Self {
        match e {
            FirstMomentError::Regime { .. } => HarnessError::Usage(e.to_string()),
            _ => HarnessError::Engine(e.to_string()),
        }
    }
}

impl From<SecondMomentError> for HarnessError {
    fn from(e: SecondMomentError) -> Self {
        match e {
            SecondMomentError::Regime { .. } => HarnessError::Usage(e.to_string()),
            SecondMomentError::FirstMoments(inner) => inner.into(),
            _ => HarnessError::Engine(e.to_string()),
        }
    }
}

impl From<SimError> for HarnessError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::FirstMoments(inner) => inner.into(),
            SimError::SecondMoments(inner) => inner.into(),
            SimError::StepTooLarge(_) | SimError::EmptyRun | SimError::PhaseGrid { .. } => HarnessError::Usage(e.to_string()),
        }
    }
}

impl From<SpectralError> for HarnessError {
    fn from(e: SpectralError) -> Self {
        HarnessError::Engine(e.to_string())
    }
}
