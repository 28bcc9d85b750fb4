//! Stochastic simulation of the chain: bulk velocity flips at rate `γ`,
//! Langevin bath on `p_0`, periodic force on `p_n`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::first_moments::{mean_trajectory, solve_harmonics, FirstMomentError};
use crate::model::{force_value, Model};
use crate::second_moments::{mixing_matrix, SecondMomentError};
use crate::spectral::NeumannEigenbasis;

pub const DEFAULT_STEPS_PER_PERIOD: usize = 256;
/// Floor of the automatic burn-in, in periods.
pub const DEFAULT_BURN_IN: usize = 50;
/// Automatic burn-in leaves `e^{-B θ_n / t_relax} ≤ BURN_IN_RESIDUAL` of the initial transient.
pub const BURN_IN_RESIDUAL: f64 = 1e-3;
pub const DEFAULT_PERIODS: usize = 500;
pub const DEFAULT_REPLICAS: usize = 32;
/// Coarsest admissible step is `θ_n / MIN_STEPS_PER_PERIOD`.
pub const MIN_STEPS_PER_PERIOD: usize = 64;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("at least {MIN_STEPS_PER_PERIOD} steps per period required, got {0}")]
    StepTooLarge(usize),
    #[error("replicas and periods must be positive")]
    EmptyRun,
    #[error("{steps} steps per period is not a multiple of {phases} phases")]
    PhaseGrid { steps: usize, phases: usize },
    #[error(transparent)]
    FirstMoments(#[from] FirstMomentError),
    #[error(transparent)]
    SecondMoments(#[from] SecondMomentError),
}

/// Phase-space point `(q, p)` at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainState {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub t: f64,
}

impl ChainState {
    pub fn zeros(sites: usize) -> Self {
        ChainState { q: vec![0.0; sites], p: vec![0.0; sites], t: 0.0 }
    }

    /// `ℰ_x = ½(p_x² + (q_x - q_{x-1})² + ω₀² q_x²)` with `q_{-1} = q_0`.
    pub fn site_energy(&self, omega0: f64, x: usize) -> f64 {
        let r = if x == 0 { 0.0 } else { self.q[x] - self.q[x - 1] };
        0.5 * (self.p[x] * self.p[x] + r * r + omega0 * omega0 * self.q[x] * self.q[x])
    }

    /// `𝓗 = Σ_x ℰ_x`.
    pub fn energy(&self, omega0: f64) -> f64 {
        (0..self.q.len()).map(|x| self.site_energy(omega0, x)).sum()
    }
}

/// Run length and seeding of a simulation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SimOptions {
    pub replicas: usize,
    /// Periods discarded per replica; `None` derives it from the relaxation time.
    pub burn_in: Option<usize>,
    pub periods: usize,
    pub steps_per_period: usize,
    pub seed: u64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            replicas: DEFAULT_REPLICAS,
            burn_in: None,
            periods: DEFAULT_PERIODS,
            steps_per_period: DEFAULT_STEPS_PER_PERIOD,
            seed: 0,
        }
    }
}

impl SimOptions {
    fn validate(&self) -> Result<(), SimError> {
        if self.steps_per_period < MIN_STEPS_PER_PERIOD {
            return Err(SimError::StepTooLarge(self.steps_per_period));
        }
        if self.replicas == 0 || self.periods == 0 {
            return Err(SimError::EmptyRun);
        }
        Ok(())
    }

    pub fn step_size(&self, model: &Model) -> f64 {
        model.params().theta_n() / self.steps_per_period as f64
    }

    /// Burn-in in periods, resolving `None` through [`relaxation_time`].
    pub fn resolved_burn_in(&self, model: &Model) -> Result<usize, SimError> {
        if let Some(b) = self.burn_in {
            return Ok(b);
        }
        if model.force().is_zero() {
            return Ok(DEFAULT_BURN_IN);
        }
        let periods = -BURN_IN_RESIDUAL.ln() * relaxation_time(model)? / model.params().theta_n();
        Ok(DEFAULT_BURN_IN.max(periods.ceil() as usize))
    }
}

/// Slowest relaxation time of the kinetic temperature profile, `1/(2γ(1 - ρ))`
/// with `ρ` the spectral radius of the mixing matrix on sites `1..=n`.
pub fn relaxation_time(model: &Model) -> Result<f64, SimError> {
    let p = model.params();
    let mix = mixing_matrix(&NeumannEigenbasis::new(p.n, p.omega0), p.gamma)?;
    Ok(1.0 / (2.0 * p.gamma * (1.0 - mix.contraction_rho())))
}

/// Sample mean and standard error of the mean.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    fn from_samples(samples: impl Iterator<Item = f64> + Clone) -> Self {
        let count = samples.clone().count() as f64;
        let mean = samples.clone().sum::<f64>() / count;
        let stderr = if count > 1.0 {
            (samples.map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1.0) / count).sqrt()
        } else {
            f64::NAN
        };
        Estimate { mean, stderr }
    }

    /// `(mean - reference) / stderr`; a deterministic estimate (`stderr = 0`)
    /// scores `0` on an exact match and `±∞` otherwise.
    pub fn z_score(&self, reference: f64) -> f64 {
        let d = self.mean - reference;
        if self.stderr == 0.0 && d == 0.0 {
            0.0
        } else {
            d / self.stderr
        }
    }
}

/// Replica statistics of period-averaged observables.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimEstimate {
    /// `⟨p_x²⟩` for `x = 0..=n`.
    pub p2_profile: Vec<Estimate>,
    /// `⟨j_{x,x+1}⟩` for `x = -1..=n`.
    pub currents: Vec<Estimate>,
    pub replicas: usize,
    pub periods_averaged: usize,
    pub burn_in_periods: usize,
    pub steps_per_period: usize,
    pub h: f64,
    pub seed: u64,
}

impl SimEstimate {
    /// `max_x |z_x|` against `reference(x)`.
    pub fn max_abs_z<'a>(estimates: &'a [Estimate], reference: impl Fn(usize) -> f64 + 'a) -> f64 {
        estimates.iter().enumerate().map(|(x, e)| e.z_score(reference(x)).abs()).fold(0.0, f64::max)
    }
}

/// Forcing on `p_n` sampled on the step grid of one period.
struct ForceTable {
    values: Vec<f64>,
}

impl ForceTable {
    fn new(model: &Model, steps: usize) -> Self {
        let h = model.params().theta_n() / steps as f64;
        ForceTable { values: (0..steps).map(|k| force_value(model, k as f64 * h)).collect() }
    }

    fn at(&self, step: usize) -> f64 {
        self.values[step % self.values.len()]
    }
}

/// `−(ω₀² − Δ_N) q`.
fn harmonic_force(q: &[f64], omega0: f64, out: &mut [f64]) {
    let n = q.len() - 1;
    let w2 = omega0 * omega0;
    for x in 0..=n {
        let left = q[x.saturating_sub(1)];
        let right = q[(x + 1).min(n)];
        out[x] = left + right - 2.0 * q[x] - w2 * q[x];
    }
}

/// Flips each `p_x`, `x ≥ 1`, with the parity probability of a rate-`γ` clock over `tau`.
fn flip_half_step<R: Rng>(state: &mut ChainState, gamma: f64, tau: f64, rng: &mut R) {
    let flip = 0.5 * (1.0 - (-2.0 * gamma * tau).exp());
    for v in state.p.iter_mut().skip(1) {
        if rng.random::<f64>() < flip {
            *v = -*v;
        }
    }
}

fn ou_half_step<R: Rng>(state: &mut ChainState, gamma: f64, t_minus: f64, tau: f64, rng: &mut R) {
    let decay = (-2.0 * gamma * tau).exp();
    let xi: f64 = rng.sample(StandardNormal);
    state.p[0] = decay * state.p[0] + (t_minus * (1.0 - decay * decay)).sqrt() * xi;
}

fn verlet(state: &mut ChainState, omega0: f64, h: f64, f_start: f64, f_end: f64, scratch: &mut [f64]) {
    let n = state.q.len() - 1;
    harmonic_force(&state.q, omega0, scratch);
    scratch[n] += f_start;
    for (p, a) in state.p.iter_mut().zip(scratch.iter()) {
        *p += 0.5 * h * a;
    }
    for (q, p) in state.q.iter_mut().zip(&state.p) {
        *q += h * p;
    }
    harmonic_force(&state.q, omega0, scratch);
    scratch[n] += f_end;
    for (p, a) in state.p.iter_mut().zip(scratch.iter()) {
        *p += 0.5 * h * a;
    }
}

/// Advances `state` by `h`: flips then bath over `h/2`, Verlet over `h`, bath
/// then flips over `h/2`.
///
/// # Panics
/// If `h ≤ 0` or `h > θ_n/64`.
pub fn step<R: Rng>(state: &mut ChainState, model: &Model, h: f64, rng: &mut R) {
    let p = model.params();
    assert!(h > 0.0 && h <= p.theta_n() / MIN_STEPS_PER_PERIOD as f64, "step size {h}");
    let mut scratch = vec![0.0; state.q.len()];
    let (f0, f1) = (force_value(model, state.t), force_value(model, state.t + h));
    strang(state, model, h, f0, f1, &mut scratch, rng);
}

fn strang<R: Rng>(state: &mut ChainState, model: &Model, h: f64, f0: f64, f1: f64, scratch: &mut [f64], rng: &mut R) {
    let p = model.params();
    let tau = 0.5 * h;
    flip_half_step(state, p.gamma, tau, rng);
    ou_half_step(state, p.gamma, p.t_minus, tau, rng);
    verlet(state, p.omega0, h, f0, f1, scratch);
    ou_half_step(state, p.gamma, p.t_minus, tau, rng);
    flip_half_step(state, p.gamma, tau, rng);
    state.t += h;
}

/// Replica `r` of the run seeded by `seed`: an independent ChaCha8 stream.
pub fn replica_rng(seed: u64, replica: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica as u64);
    rng
}

/// Periodic means at `t = 0` plus an equilibrium fluctuation at `T₋`.
fn initial_state<R: Rng>(model: &Model, basis: &NeumannEigenbasis, rng: &mut R) -> Result<ChainState, SimError> {
    let p = model.params();
    let size = p.sites();
    let (mut q, mut pm) = if model.force().is_zero() {
        (vec![0.0; size], vec![0.0; size])
    } else {
        mean_trajectory(&solve_harmonics(model)?, 0.0)
    };
    let scale = p.t_minus.sqrt();
    for (j, mu) in basis.mus().iter().enumerate() {
        let xi: f64 = rng.sample(StandardNormal);
        let amp = scale * xi / mu.sqrt();
        for (x, v) in q.iter_mut().enumerate() {
            *v += amp * basis.psi(j, x);
        }
    }
    for v in pm.iter_mut() {
        let xi: f64 = rng.sample(StandardNormal);
        *v += scale * xi;
    }
    Ok(ChainState { q, p: pm, t: 0.0 })
}

/// Per-replica time averages.
struct ReplicaAverages {
    p2: Vec<f64>,
    currents: Vec<f64>,
}

fn run_replica(
    model: &Model,
    basis: &NeumannEigenbasis,
    forces: &ForceTable,
    opts: &SimOptions,
    burn_in: usize,
    replica: usize,
) -> Result<ReplicaAverages, SimError> {
    let p = model.params();
    let size = p.sites();
    let n = p.n;
    let h = opts.step_size(model);
    let steps = opts.steps_per_period;
    let mut rng = replica_rng(opts.seed, replica);
    let mut state = initial_state(model, basis, &mut rng)?;
    let mut scratch = vec![0.0; size];
    for k in 0..burn_in * steps {
        strang(&mut state, model, h, forces.at(k), forces.at(k + 1), &mut scratch, &mut rng);
    }
    let mut p2 = vec![0.0; size];
    let mut currents = vec![0.0; size + 1];
    for k in 0..opts.periods * steps {
        let f = forces.at(k);
        currents[0] += 2.0 * p.gamma * (p.t_minus - state.p[0] * state.p[0]);
        for (acc, v) in p2.iter_mut().zip(&state.p) {
            *acc += v * v;
        }
        for x in 0..n {
            currents[x + 1] -= state.p[x] * (state.q[x + 1] - state.q[x]);
        }
        currents[size] -= f * state.p[n];
        strang(&mut state, model, h, f, forces.at(k + 1), &mut scratch, &mut rng);
    }
    let samples = (opts.periods * steps) as f64;
    p2.iter_mut().chain(currents.iter_mut()).for_each(|v| *v /= samples);
    Ok(ReplicaAverages { p2, currents })
}

/// Replica estimates of `⟨p_x²⟩` and every bond current in the periodic state.
///
/// Each replica starts from the periodic means plus Gibbs noise at `T₋`, runs the burn-in, and
/// then averages over `periods` periods on the step grid. Results are
/// reduced in replica order, so they do not depend on the thread count.
pub fn estimate_periodic_averages(model: &Model, opts: SimOptions) -> Result<SimEstimate, SimError> {
    opts.validate()?;
    let burn_in = opts.resolved_burn_in(model)?;
    let p = model.params();
    let basis = NeumannEigenbasis::new(p.n, p.omega0);
    let forces = ForceTable::new(model, opts.steps_per_period);
    let runs: Vec<ReplicaAverages> = (0..opts.replicas)
        .into_par_iter()
        .map(|r| run_replica(model, &basis, &forces, &opts, burn_in, r))
        .collect::<Result<_, _>>()?;
    let column = |pick: &dyn Fn(&ReplicaAverages) -> f64| Estimate::from_samples(runs.iter().map(pick));
    let p2_profile = (0..p.sites()).map(|x| column(&|r| r.p2[x])).collect();
    let currents = (0..p.sites() + 1).map(|x| column(&|r| r.currents[x])).collect();
    Ok(SimEstimate {
        p2_profile,
        currents,
        replicas: opts.replicas,
        periods_averaged: opts.periods,
        burn_in_periods: burn_in,
        steps_per_period: opts.steps_per_period,
        h: opts.step_size(model),
        seed: opts.seed,
    })
}

/// Ensemble means of `q` and `p` at phases `t = kθ_n/P`, `k = 0..=P`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseMeans {
    pub times: Vec<f64>,
    /// Indexed `[k][x]`.
    pub q: Vec<Vec<Estimate>>,
    pub p: Vec<Vec<Estimate>>,
}

/// Per-replica `(q, p)` period averages at every phase.
type PhaseSums = (Vec<Vec<f64>>, Vec<Vec<f64>>);

/// Samples every replica once per period at each of `phases + 1` phases
/// (the last one wraps to the next period) and averages over periods, then
/// reports the replica mean and standard error.
pub fn phase_resolved_means(model: &Model, opts: SimOptions, phases: usize) -> Result<PhaseMeans, SimError> {
    opts.validate()?;
    let burn_in = opts.resolved_burn_in(model)?;
    if phases == 0 || !opts.steps_per_period.is_multiple_of(phases) {
        return Err(SimError::PhaseGrid { steps: opts.steps_per_period, phases });
    }
    let p = model.params();
    let size = p.sites();
    let basis = NeumannEigenbasis::new(p.n, p.omega0);
    let forces = ForceTable::new(model, opts.steps_per_period);
    let stride = opts.steps_per_period / phases;
    let h = opts.step_size(model);
    let runs: Vec<PhaseSums> = (0..opts.replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = replica_rng(opts.seed, r);
            let mut state = initial_state(model, &basis, &mut rng)?;
            let mut scratch = vec![0.0; size];
            let steps = opts.steps_per_period;
            for k in 0..burn_in * steps {
                strang(&mut state, model, h, forces.at(k), forces.at(k + 1), &mut scratch, &mut rng);
            }
            let mut q = vec![vec![0.0; size]; phases + 1];
            let mut pm = vec![vec![0.0; size]; phases + 1];
            for k in 0..=opts.periods * steps {
                let phase = k % steps;
                let total = opts.periods * steps;
                let mut record = |slot: usize| {
                    for x in 0..size {
                        q[slot][x] += state.q[x];
                        pm[slot][x] += state.p[x];
                    }
                };
                if phase.is_multiple_of(stride) && k < total {
                    record(phase / stride);
                }
                if phase == 0 && k > 0 {
                    record(phases);
                }
                if k < total {
                    strang(&mut state, model, h, forces.at(k), forces.at(k + 1), &mut scratch, &mut rng);
                }
            }
            let count = opts.periods as f64;
            q.iter_mut().chain(pm.iter_mut()).flatten().for_each(|v| *v /= count);
            Ok((q, pm))
        })
        .collect::<Result<_, SimError>>()?;
    let reduce = |pick: &dyn Fn(&PhaseSums) -> &Vec<Vec<f64>>| -> Vec<Vec<Estimate>> {
        (0..=phases)
            .map(|k| (0..size).map(|x| Estimate::from_samples(runs.iter().map(|r| pick(r)[k][x]))).collect())
            .collect()
    };
    Ok(PhaseMeans {
        times: (0..=phases).map(|k| k as f64 * p.theta_n() / phases as f64).collect(),
        q: reduce(&|r| &r.0),
        p: reduce(&|r| &r.1),
    })
}
