use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use serde_json::json;

use super::config::{HarnessConfig, Tolerances};
use super::output::{self, CompareRow, CurrentRow};
use super::report::{Check, Report};
use super::HarnessError;
use crate::first_moments::{
    current_exact, current_report, mean_square_averages, solve_harmonics, FirstMomentError, HarmonicField,
};
use crate::model::{Model, Requirements};
use crate::pdmp::{estimate_periodic_averages, SimEstimate};
use crate::second_moments::{
    covariance_blocks, macroscopic_profile_check, mixing_matrix, mixing_matrix_brute_force, periodic_covariance_ode,
    solve_profile, variance_harmonics, CovarianceSolution, MixingMatrix, OdeOptions, ProfileDeviation, ProfileMethod,
    VarianceReport,
};
use crate::spectral::{transport_evaluations, GreensFunction, NeumannEigenbasis};

/// One row of a current sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingRow {
    pub n: usize,
    pub j_n: f64,
    pub n_j_n: f64,
    pub j_limit: f64,
    pub relative_error: f64,
    pub i_n: f64,
    pub work_relative_error: Option<f64>,
    pub runtime_s: f64,
}

/// How a sequence of errors over increasing `n` is judged.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Trend {
    /// Least-squares slope of `ln e` against `ln n` is `≤ 0`.
    FittedSlope,
    /// Every consecutive error strictly decreases.
    Strict,
}

impl Trend {
    pub fn from_strict(strict: bool) -> Self {
        if strict {
            Trend::Strict
        } else {
            Trend::FittedSlope
        }
    }
}

/// Trend check over `(n, e)` pairs; errors `≤ floor` count as converged.
pub fn trend_check(name: &str, ns: &[usize], errors: &[f64], floor: f64, trend: Trend) -> Check {
    let converged = |e: f64| e <= floor;
    if errors.iter().all(|&e| converged(e)) {
        return Check::boolean(name, true, format!("all errors ≤ {floor:e}"));
    }
    match trend {
        Trend::Strict => {
            let bad: Vec<String> = errors
                .windows(2)
                .zip(ns.windows(2))
                .filter(|(e, _)| !(e[1] < e[0] || converged(e[1])))
                .map(|(e, n)| format!("n={}→{}: {:.3e}→{:.3e}", n[0], n[1], e[0], e[1]))
                .collect();
            Check::boolean(name, bad.is_empty(), if bad.is_empty() { "strictly decreasing".into() } else { bad.join(", ") })
        }
        Trend::FittedSlope => {
            let pts: Vec<(f64, f64)> =
                ns.iter().zip(errors).map(|(&n, &e)| ((n as f64).ln(), e.max(floor).max(f64::MIN_POSITIVE).ln())).collect();
            let k = pts.len() as f64;
            let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
            let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
            let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
            let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
            Check::at_most(name, slope, 0.0).with_detail("fitted slope of ln(error) vs ln(n)")
        }
    }
}

fn relative_gap(value: f64, reference: f64) -> f64 {
    if reference == 0.0 {
        value.abs()
    } else {
        (value - reference).abs() / reference.abs()
    }
}

fn with_n(cfg: &HarnessConfig, n: usize, req: Requirements) -> Result<Model, HarnessError> {
    let mut chain = cfg.chain.clone();
    chain.n = n;
    Ok(chain.build(req)?)
}

/// `current`: finite-`n` currents against the limit `J` over a sweep.
pub fn cmd_current(cfg: &HarnessConfig, ns: &[usize], trend: Trend, out: &Path) -> Result<Report, HarnessError> {
    let tol = &cfg.tolerances;
    let mut report = Report::new("current");
    let mut rows = Vec::new();
    let mut csv_rows = Vec::new();
    let mut last_field = None;
    for &n in ns {
        let start = Instant::now();
        let model = with_n(cfg, n, Requirements { driven: false, asymptotic: true })?;
        let field = solve_harmonics(&model)?;
        let routes = match current_exact(&field) {
            Ok(c) => relative_gap(c.plancherel, c.spectral),
            Err(FirstMomentError::RouteMismatch { spectral, plancherel }) => relative_gap(plancherel, spectral),
            Err(e) => return Err(e.into()),
        };
        report.push(Check::at_most(format!("current routes n={n}"), routes, tol.current_routes));
        let r = current_report(&model)?;
        let j_limit = r.j_limit.unwrap_or(0.0);
        rows.push(ScalingRow {
            n,
            j_n: r.j_n,
            n_j_n: n as f64 * r.j_n,
            j_limit,
            relative_error: r.relative_error().unwrap_or(f64::NAN),
            i_n: r.i_n,
            work_relative_error: r.work_relative_error(model.params().a),
            runtime_s: start.elapsed().as_secs_f64(),
        });
        csv_rows.push(CurrentRow { n, j_n: r.j_n, n_j_n: n as f64 * r.j_n, j_limit, i_n: r.i_n });
        last_field = Some(field);
    }
    if let Some(last) = rows.last() {
        report.push(Check::at_most(format!("asymptotic error n={}", last.n), last.relative_error, tol.asymptotic_final));
        let errors: Vec<f64> = rows.iter().map(|r| r.relative_error).collect();
        report.push(trend_check("asymptotic trend", ns, &errors, tol.trend_abs_floor, trend));
    }
    output::write_current(out, &csv_rows)?;
    if let Some(f) = &last_field {
        output::write_harmonics(out, f)?;
    }
    report.data = json!({ "rows": rows });
    Ok(report)
}

/// Every exact-engine object for one model.
pub struct ProfileSolution {
    pub model: Model,
    pub field: HarmonicField,
    pub mixing: MixingMatrix,
    pub covariance: CovarianceSolution,
    pub j_n: f64,
    /// Current fixing the macroscopic law: `J` in the scaling regime, else `n J_n`.
    pub j_macro: f64,
}

pub fn solve_profile_pipeline(model: Model) -> Result<ProfileSolution, HarnessError> {
    let p = *model.params();
    let basis = NeumannEigenbasis::new(p.n, p.omega0);
    let field = solve_harmonics(&model)?;
    let j_n = current_exact(&field)?.spectral;
    let mixing = mixing_matrix(&basis, p.gamma)?;
    let profile = solve_profile(&model, &mixing, &mean_square_averages(&field).p2, ProfileMethod::Direct)?;
    let covariance = covariance_blocks(&model, &basis, &field, &profile)?;
    let j_macro = match current_report(&model)?.j_limit {
        Some(j) => j,
        None => p.n as f64 * j_n,
    };
    Ok(ProfileSolution { model, field, mixing, covariance, j_n, j_macro })
}

/// Exact identities of one solved profile.
pub fn profile_checks(sol: &ProfileSolution, tol: &Tolerances) -> Vec<Check> {
    let p = sol.model.params();
    let n = p.n;
    let cov = &sol.covariance;
    let mut checks = Vec::new();
    let bath = 2.0 * p.gamma * (p.t_minus - cov.profile[0]);
    checks.push(Check::at_most(format!("bath identity n={n}"), relative_gap(bath, sol.j_n), tol.bath_identity));
    let spread = if sol.j_n == 0.0 {
        cov.bond_currents.iter().map(|j| j.abs()).fold(0.0, f64::max)
    } else {
        cov.current_spread(sol.j_n)
    };
    checks.push(Check::at_most(format!("bond currents n={n}"), spread, tol.bond_current));
    if n >= 3 {
        let dev = cov.f_affine_deviation(-4.0 * p.gamma * sol.j_n);
        checks.push(Check::at_most(format!("F affine n={n}"), dev, tol.f_affine));
    }
    let (argmin, min) = cov.profile.iter().enumerate().fold((0, f64::INFINITY), |b, (x, &v)| if v < b.1 { (x, v) } else { b });
    checks.push(
        Check::at_most(format!("profile floor n={n}"), p.t_minus - min, tol.profile_floor).with_detail(format!("min at x={argmin}")),
    );
    if sol.model.force().is_zero() {
        let flat = cov.profile.iter().map(|v| (v - p.t_minus).abs()).fold(0.0, f64::max);
        checks.push(Check::at_most(format!("equilibrium flat n={n}"), flat, tol.equilibrium_flat));
    }
    checks
}

/// Mixing-matrix invariants.
pub fn mixing_checks(mix: &MixingMatrix, tol: &Tolerances) -> Vec<Check> {
    let n = mix.n();
    vec![
        Check::at_most(format!("mixing symmetry n={n}"), mix.max_asymmetry(), tol.mixing_symmetry),
        Check::at_most(format!("mixing row sums n={n}"), mix.max_row_sum_error(), tol.mixing_row_sum),
        Check::boolean(format!("mixing positivity n={n}"), mix.min_log_entry().is_finite(), format!("min ln M = {:.3}", mix.min_log_entry())),
        Check::above(format!("mixing contraction gap n={n}"), 1.0 - mix.contraction_rho(), 0.0).with_detail("1 - ρ"),
    ]
}

/// `profile`: solved temperature profile, its exact identities and distance from the linear law.
pub fn cmd_profile(cfg: &HarnessConfig, n: usize, out: &Path) -> Result<Report, HarnessError> {
    let model = with_n(cfg, n, Requirements::default())?;
    let sol = solve_profile_pipeline(model)?;
    let mut report = Report::new("profile");
    for c in mixing_checks(&sol.mixing, &cfg.tolerances).into_iter().chain(profile_checks(&sol, &cfg.tolerances)) {
        report.push(c);
    }
    let dev = macroscopic_profile_check(&sol.covariance, &sol.model, sol.j_macro);
    let t_minus = sol.model.params().t_minus;
    output::write_profile(out, &sol.covariance, |u| t_minus + dev.limit_slope * u)?;
    report.data = json!({ "deviation": dev, "j_n": sol.j_n, "j_macro": sol.j_macro, "bath_current": sol.covariance.bond_currents[0] });
    Ok(report)
}

/// Scalar bounds over a profile sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProfileBounds {
    pub n: usize,
    /// `(1/(n+1)) Σ_x ⟨ℰ_x⟩`.
    pub mean_energy: f64,
    /// `sup_x ⟨p_x²⟩`.
    pub sup_p2: f64,
    /// `(n+1) Σ_x (⟨p_{x+1}²⟩ - ⟨p_x²⟩)²`.
    pub gradient: f64,
}

impl ProfileBounds {
    pub fn of(cov: &CovarianceSolution) -> Self {
        let size = cov.sites();
        let s = size as f64;
        ProfileBounds {
            n: size - 1,
            mean_energy: cov.energy.iter().sum::<f64>() / s,
            sup_p2: cov.profile.iter().copied().fold(f64::MIN, f64::max),
            gradient: s * cov.profile.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>(),
        }
    }
}

/// `max/min` of a positive sequence; `1` when all entries vanish.
pub fn spread_ratio(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::MIN, f64::max);
    let min = values.fold(f64::MAX, f64::min);
    if max == 0.0 && min == 0.0 {
        1.0
    } else if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Profile sweep: exact identities at every `n`, shrinking distance from the law, bounded energies.
pub fn profile_sweep(cfg: &HarnessConfig, ns: &[usize], trend: Trend, out: &Path) -> Result<Report, HarnessError> {
    let tol = &cfg.tolerances;
    let mut report = Report::new("profile-sweep");
    let mut devs: Vec<ProfileDeviation> = Vec::new();
    let mut bounds = Vec::new();
    for &n in ns {
        let sol = solve_profile_pipeline(with_n(cfg, n, Requirements::default())?)?;
        for c in profile_checks(&sol, tol) {
            report.push(c);
        }
        devs.push(macroscopic_profile_check(&sol.covariance, &sol.model, sol.j_macro));
        bounds.push(ProfileBounds::of(&sol.covariance));
        if Some(&n) == ns.last() {
            let t_minus = sol.model.params().t_minus;
            let slope = devs.last().map_or(0.0, |d| d.limit_slope);
            output::write_profile(out, &sol.covariance, |u| t_minus + slope * u)?;
        }
    }
    let errors: Vec<f64> = devs.iter().map(|d| d.max_dev).collect();
    report.push(trend_check("profile law deviation", ns, &errors, tol.trend_abs_floor, trend));
    for (name, pick) in [
        ("mean energy bound", (|b: &ProfileBounds| b.mean_energy) as fn(&ProfileBounds) -> f64),
        ("sup p2 bound", |b| b.sup_p2),
        ("gradient bound", |b| b.gradient),
    ] {
        report.push(Check::at_most(name, spread_ratio(bounds.iter().map(pick)), tol.bound_ratio));
    }
    report.data = json!({ "deviations": devs, "bounds": bounds });
    Ok(report)
}

/// `simulate`: Monte Carlo estimates against the exact engine.
pub fn cmd_simulate(cfg: &HarnessConfig, n: usize, seed: u64, out: &Path) -> Result<Report, HarnessError> {
    let model = with_n(cfg, n, Requirements::default())?;
    let est = estimate_periodic_averages(&model, cfg.simulation.options(seed))?;
    let sol = solve_profile_pipeline(model)?;
    let (rows, report) = compare_simulation(&est, &sol.covariance, &cfg.tolerances, "simulate");
    output::write_sim(out, &est)?;
    output::write_compare(out, &rows)?;
    output::write_json(
        out,
        "sim_meta.json",
        &json!({ "seed": est.seed, "h": est.h, "R": est.replicas, "B": est.burn_in_periods, "K": est.periods_averaged, "steps_per_period": est.steps_per_period }),
    )?;
    Ok(report)
}

/// z-scores of every site `p²` and bond current.
pub fn compare_simulation(est: &SimEstimate, cov: &CovarianceSolution, tol: &Tolerances, name: &str) -> (Vec<CompareRow>, Report) {
    let mut rows = Vec::new();
    for (x, e) in est.p2_profile.iter().enumerate() {
        let a = cov.profile[x];
        rows.push(CompareRow { observable: "p2", index: x as i64, simulated: e.mean, stderr: e.stderr, analytic: a, z: e.z_score(a) });
    }
    for (k, e) in est.currents.iter().enumerate() {
        let a = cov.bond_currents[k];
        rows.push(CompareRow { observable: "current", index: k as i64 - 1, simulated: e.mean, stderr: e.stderr, analytic: a, z: e.z_score(a) });
    }
    let mut report = Report::new(name);
    for obs in ["p2", "current"] {
        let worst = rows.iter().filter(|r| r.observable == obs).max_by(|a, b| a.z.abs().total_cmp(&b.z.abs()));
        if let Some(w) = worst {
            let offenders: Vec<String> =
                rows.iter().filter(|r| r.observable == obs && !(r.z.abs() <= tol.z_max)).map(|r| format!("{}[{}] z={:.2}", obs, r.index, r.z)).collect();
            report.push(Check::at_most(format!("{obs} max |z|"), w.z.abs(), tol.z_max).with_detail(offenders.join(", ")));
        }
    }
    report.data = json!({ "rows": rows, "burn_in": est.burn_in_periods, "seed": est.seed });
    (rows, report)
}

/// `variance`: `n² · total_variance` over a sweep, optionally against the ODE oracle.
pub fn cmd_variance(cfg: &HarnessConfig, ns: &[usize], ode_n: Option<usize>, out: &Path) -> Result<Report, HarnessError> {
    let tol = &cfg.tolerances;
    let mut report = Report::new("variance");
    let mut reports: Vec<VarianceReport> = Vec::new();
    for &n in ns {
        let model = with_n(cfg, n, Requirements::default())?;
        let basis = NeumannEigenbasis::new(n, model.params().omega0);
        reports.push(variance_harmonics(&basis, &solve_harmonics(&model)?)?);
    }
    report.push(Check::at_most("scaled variance bounded", spread_ratio(reports.iter().map(|r| r.scaled)), tol.variance_ratio));
    let mut ode = None;
    if let Some(n) = ode_n {
        let model = with_n(cfg, n, Requirements::default())?;
        let basis = NeumannEigenbasis::new(n, model.params().omega0);
        let freq = variance_harmonics(&basis, &solve_harmonics(&model)?)?.total_variance;
        let moments = periodic_covariance_ode(&model, OdeOptions::default())?;
        let gap = relative_gap(freq, moments.total_variance);
        report.push(Check::at_most(format!("ODE oracle n={n}"), gap, tol.ode_variance));
        ode = Some(json!({ "n": n, "frequency": freq, "ode": moments.total_variance, "richardson_delta": moments.richardson_delta }));
    }
    if let Some(last) = reports.last() {
        output::write_variance(out, last)?;
    }
    output::write_variance_totals(out, &reports)?;
    report.data = json!({ "rows": reports, "ode": ode });
    Ok(report)
}

/// Spectral-core checks: three routes to `D` and Green's-function residuals.
pub fn spectral_checks(cfg: &HarnessConfig) -> Result<Report, HarnessError> {
    let p = cfg.chain.params();
    let mut report = Report::new("spectral");
    let d = transport_evaluations(p.omega0);
    report.push(Check::at_most("transport routes", d.max_disagreement(), 1e-9));
    for &n in &cfg.sweeps.greens {
        let basis = NeumannEigenbasis::new(n, p.omega0);
        for ell in [0, 1, 5] {
            let mut g = GreensFunction::new(&basis, p.gamma, p.theta, ell)?;
            let worst = [0, n / 2, n].into_iter().map(|y| g.residual(y)).fold(0.0, f64::max);
            report.push(Check::at_most(format!("greens residual n={n} l={ell}"), worst, 1e-10));
        }
    }
    report.data = json!({ "transport": d });
    Ok(report)
}

/// Mixing invariants over the configured sweep plus brute-force agreement at the smallest size.
pub fn mixing_sweep(cfg: &HarnessConfig) -> Result<Report, HarnessError> {
    let p = cfg.chain.params();
    let mut report = Report::new("mixing");
    for &n in &cfg.sweeps.mixing {
        let basis = NeumannEigenbasis::new(n, p.omega0);
        let mix = mixing_matrix(&basis, p.gamma)?;
        for c in mixing_checks(&mix, &cfg.tolerances) {
            report.push(c);
        }
        if Some(&n) == cfg.sweeps.mixing.first() {
            let brute = mixing_matrix_brute_force(&basis, p.gamma);
            report.push(Check::at_most(format!("mixing brute force n={n}"), (mix.matrix() - brute.matrix()).amax(), 1e-12));
        }
    }
    Ok(report)
}

/// `verify-all`: every command over the configured sweeps.
pub fn verify_all(cfg: &HarnessConfig, seed: u64, trend: Trend, out: &Path) -> Result<Report, HarnessError> {
    let mut report = Report::new("verify-all");
    report.absorb(spectral_checks(cfg)?);
    report.absorb(mixing_sweep(cfg)?);
    report.absorb(cmd_current(cfg, &cfg.sweeps.current, trend, &out.join("current"))?);
    report.absorb(profile_sweep(cfg, &cfg.sweeps.profile, trend, &out.join("profile"))?);
    let p = cfg.chain.params();
    if (p.a + 0.5).abs() < 1e-12 && p.b == 0.0 {
        report.absorb(cmd_variance(cfg, &cfg.sweeps.variance, Some(cfg.sweeps.ode), &out.join("variance"))?);
    }
    report.absorb(cmd_simulate(cfg, cfg.sweeps.simulate, seed, &out.join("simulate"))?);
    let mut equilibrium = cfg.clone();
    equilibrium.chain.force.clear();
    let mut eq = cmd_simulate(&equilibrium, cfg.sweeps.simulate, seed, &out.join("simulate-equilibrium"))?;
    eq.command = "simulate-equilibrium".into();
    report.absorb(eq);
    Ok(report)
}
