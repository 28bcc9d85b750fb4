use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::HarnessError;
use crate::model::ChainConfig;
use crate::pdmp::{SimOptions, DEFAULT_PERIODS, DEFAULT_REPLICAS, DEFAULT_STEPS_PER_PERIOD};

/// Pass/fail thresholds of every harness check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative agreement of the two finite-`n` current evaluations.
    pub current_routes: f64,
    /// Relative agreement of `2γ(T₋ - ⟨p_0²⟩)` with `J_n`.
    pub bath_identity: f64,
    /// Relative deviation of `⟨𝔉_x⟩` from an affine function of slope `-4γJ_n`.
    pub f_affine: f64,
    /// Relative spread of the bond currents around `J_n`.
    pub bond_current: f64,
    /// Largest `|⟨p_x²⟩ - T₋|` for an undriven chain.
    pub equilibrium_flat: f64,
    /// Allowed undershoot of `min_x ⟨p_x²⟩` below `T₋`.
    pub profile_floor: f64,
    /// Bound on `|nJ_n - J|/|J|` at the largest `n` of the sweep.
    pub asymptotic_final: f64,
    /// Errors at or below this value count as converged in trend checks.
    pub trend_abs_floor: f64,
    /// Largest max/min ratio of the energy and gradient bounds over a sweep.
    pub bound_ratio: f64,
    /// Largest max/min ratio of `n² · total_variance` over a sweep.
    pub variance_ratio: f64,
    /// Relative agreement of the frequency-domain variance with the ODE oracle.
    pub ode_variance: f64,
    /// Largest admissible `|z|` of a Monte Carlo estimate.
    pub z_max: f64,
    /// Symmetry of the mixing matrix.
    pub mixing_symmetry: f64,
    /// Row sums of the mixing matrix.
    pub mixing_row_sum: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            current_routes: 1e-12,
            bath_identity: 1e-9,
            f_affine: 1e-9,
            bond_current: 1e-9,
            equilibrium_flat: 1e-12,
            profile_floor: 1e-12,
            asymptotic_final: 0.05,
            trend_abs_floor: 0.0,
            bound_ratio: 10.0,
            variance_ratio: 10.0,
            ode_variance: 0.01,
            z_max: 3.0,
            mixing_symmetry: 1e-12,
            mixing_row_sum: 1e-10,
        }
    }
}

/// Monte Carlo run length; `burn_in = None` selects the automatic burn-in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSettings {
    pub replicas: usize,
    pub periods: usize,
    pub burn_in: Option<usize>,
    pub steps_per_period: usize,
}

impl Default for SimSettings {
    fn default() -> Self {
        SimSettings {
            replicas: DEFAULT_REPLICAS,
            periods: DEFAULT_PERIODS,
            burn_in: None,
            steps_per_period: DEFAULT_STEPS_PER_PERIOD,
        }
    }
}

impl SimSettings {
    pub fn options(&self, seed: u64) -> SimOptions {
        SimOptions {
            replicas: self.replicas,
            burn_in: self.burn_in,
            periods: self.periods,
            steps_per_period: self.steps_per_period,
            seed,
        }
    }
}

/// Chain sizes used by the sweeps of `verify-all` and as command defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sweeps {
    pub current: Vec<usize>,
    pub profile: Vec<usize>,
    pub variance: Vec<usize>,
    pub mixing: Vec<usize>,
    pub greens: Vec<usize>,
    pub simulate: usize,
    pub ode: usize,
}

impl Default for Sweeps {
    fn default() -> Self {
        Sweeps {
            current: vec![64, 128, 256, 512],
            profile: vec![32, 64, 128, 256],
            variance: vec![16, 32, 64],
            mixing: vec![4, 16, 64, 128],
            greens: vec![4, 64, 512],
            simulate: 16,
            ode: 8,
        }
    }
}

/// Model parameters plus the optional `tolerances`, `simulation` and
/// `sweeps` sections of a config file.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct HarnessConfig {
    #[serde(flatten)]
    pub chain: ChainConfig,
    pub tolerances: Tolerances,
    pub simulation: SimSettings,
    pub sweeps: Sweeps,
}

impl HarnessConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let mut value: Value = serde_json::from_str(text).map_err(HarnessError::Json)?;
        let Some(map) = value.as_object_mut() else {
            return Err(HarnessError::Usage("config must be a JSON object".into()));
        };
        fn section<T: for<'de> Deserialize<'de> + Default>(v: Option<Value>) -> Result<T, HarnessError> {
            v.map_or_else(|| Ok(T::default()), |v| serde_json::from_value(v).map_err(HarnessError::Json))
        }
        let tolerances = section(map.remove("tolerances"))?;
        let simulation = section(map.remove("simulation"))?;
        let sweeps = section(map.remove("sweeps"))?;
        let chain = serde_json::from_value(value).map_err(HarnessError::Json)?;
        Ok(HarnessConfig { chain, tolerances, simulation, sweeps })
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }
}
