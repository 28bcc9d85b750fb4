//! Exit criteria, one test per criterion.
//!
//! Every test writes a single `PASS`/`FAIL` line straight to stdout (so it is
//! visible without `--nocapture`) and then asserts the same verdict.

use std::io::Write;
use std::time::{Duration, Instant};

use hchain::first_moments::{current_report, q_closed_resonant, q_closed_slow, q_quadrature_resonant, q_quadrature_slow};
use hchain::harness::{solve_profile_pipeline, spread_ratio, ProfileBounds};
use hchain::pdmp::{estimate_periodic_averages, Estimate, SimOptions};
use hchain::second_moments::{
    macroscopic_profile_check, mixing_matrix, mixing_matrix_brute_force, periodic_covariance_ode, variance_harmonics,
    OdeOptions,
};
use hchain::spectral::transport_evaluations;
use hchain::{current_exact, solve_harmonics, validate, ChainParams, ForceSpec, GreensFunction, Model, NeumannEigenbasis, Requirements};

const D_UNIT: f64 = 0.3819660113;
const D_TOL: f64 = 1e-9;
const GREEN_TOL: f64 = 1e-10;
const ROUTE_TOL: f64 = 1e-12;
const BATH_TOL: f64 = 1e-9;
const SYMMETRY_TOL: f64 = 1e-12;
const ROW_SUM_TOL: f64 = 1e-10;
const BRUTE_TOL: f64 = 1e-12;
const CURRENT_FINAL_TOL: f64 = 0.05;
const AFFINE_TOL: f64 = 1e-9;
const BOND_TOL: f64 = 1e-9;
const FLAT_TOL: f64 = 1e-12;
const FLOOR_TOL: f64 = 1e-12;
const BOUND_RATIO: f64 = 10.0;
const VARIANCE_RATIO: f64 = 10.0;
const ODE_TOL: f64 = 0.01;
const Z_MAX: f64 = 3.0;
const CLOSED_FORM_TOL: f64 = 1e-8;

const CURRENT_SWEEP: [usize; 4] = [64, 128, 256, 512];
const PROFILE_SWEEP: [usize; 4] = [32, 64, 128, 256];

fn verdict(id: u32, title: &str, pass: bool, detail: String) {
    let line = format!("{} criterion {id:>2} {title}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
    assert!(pass, "criterion {id} ({title}) failed: {detail}");
}

fn within(elapsed: Duration, secs: u64) -> bool {
    elapsed <= Duration::from_secs(secs)
}

fn standard(n: usize) -> Model {
    validate(ChainParams::standard(n), ForceSpec::cosine(1.0), Requirements::default()).unwrap()
}

fn equilibrium(n: usize) -> Model {
    validate(ChainParams::standard(n), ForceSpec::zero(), Requirements::default()).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>().join(", ")
}

#[test]
fn criterion_01_transport_coefficient() {
    let start = Instant::now();
    let d = transport_evaluations(1.0);
    let worst = [d.closed_form, d.green_form, d.kubo].iter().map(|v| (v - D_UNIT).abs()).fold(0.0, f64::max);
    let elapsed = start.elapsed();
    let pass = worst < D_TOL && within(elapsed, 1);
    verdict(1, "transport coefficient, three routes", pass, format!("max |D - {D_UNIT}| = {worst:.2e} (tol {D_TOL:.0e}), {elapsed:.2?}"));
}

#[test]
fn criterion_02_greens_residuals() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for n in [4, 64, 512] {
        let basis = NeumannEigenbasis::new(n, 1.0);
        for ell in [0, 1, 5] {
            let mut g = GreensFunction::new(&basis, 1.0, 1.0, ell).unwrap();
            for y in 0..=n {
                worst = worst.max(g.residual(y));
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = worst < GREEN_TOL && within(elapsed, 10);
    verdict(2, "Green's function residuals", pass, format!("max residual {worst:.2e} over all y (tol {GREEN_TOL:.0e}), {elapsed:.2?}"));
}

#[test]
fn criterion_03_current_identities() {
    let start = Instant::now();
    let model = standard(128);
    let field = solve_harmonics(&model).unwrap();
    let exact = current_exact(&field).unwrap();
    let routes = rel(exact.plancherel, exact.spectral);
    let sol = solve_profile_pipeline(model).unwrap();
    let p = sol.model.params();
    let bath = rel(2.0 * p.gamma * (p.t_minus - sol.covariance.profile[0]), sol.j_n);
    let elapsed = start.elapsed();
    let pass = routes < ROUTE_TOL && bath < BATH_TOL && within(elapsed, 30);
    verdict(
        3,
        "exact current identities n=128",
        pass,
        format!("routes {routes:.2e} (tol {ROUTE_TOL:.0e}), bath {bath:.2e} (tol {BATH_TOL:.0e}), {elapsed:.2?}"),
    );
}

#[test]
fn criterion_04_mixing_invariants() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let (mut asym, mut rows, mut rho, mut min_log) = (0.0f64, 0.0f64, 0.0f64, f64::INFINITY);
    for n in [4, 16, 64, 128] {
        let mix = mixing_matrix(&NeumannEigenbasis::new(n, 1.0), 1.0).unwrap();
        asym = asym.max(mix.max_asymmetry());
        rows = rows.max(mix.max_row_sum_error());
        rho = rho.max(mix.contraction_rho());
        min_log = min_log.min(mix.min_log_entry());
        if mix.max_asymmetry() > SYMMETRY_TOL || mix.max_row_sum_error() > ROW_SUM_TOL {
            failures.push(format!("n={n} sums"));
        }
        if !mix.min_log_entry().is_finite() || mix.min_entry() < 0.0 {
            failures.push(format!("n={n} positivity"));
        }
        if mix.contraction_rho() >= 1.0 {
            failures.push(format!("n={n} rho"));
        }
    }
    let basis = NeumannEigenbasis::new(4, 1.0);
    let brute = (mixing_matrix(&basis, 1.0).unwrap().matrix() - mixing_matrix_brute_force(&basis, 1.0).matrix()).amax();
    if brute > BRUTE_TOL {
        failures.push("brute force n=4".into());
    }
    let elapsed = start.elapsed();
    let pass = failures.is_empty() && within(elapsed, 60);
    verdict(
        4,
        "mixing matrix invariants",
        pass,
        format!(
            "asym {asym:.1e}, row sums {rows:.1e}, min ln M {min_log:.1}, max rho {rho:.12}, brute {brute:.1e}, {elapsed:.2?} {failures:?}"
        ),
    );
}

#[test]
fn criterion_05_asymptotic_current() {
    let start = Instant::now();
    let errors: Vec<f64> = CURRENT_SWEEP
        .iter()
        .map(|&n| current_report(&standard(n)).unwrap().relative_error().unwrap())
        .collect();
    let elapsed = start.elapsed();
    let decreasing = strictly_decreasing(&errors);
    let last = *errors.last().unwrap();
    let pass = decreasing && last < CURRENT_FINAL_TOL && within(elapsed, 300);
    verdict(
        5,
        "asymptotic current n in {64,128,256,512}",
        pass,
        format!("|nJ_n - J|/|J| = [{}], strictly decreasing: {decreasing}, final < {CURRENT_FINAL_TOL}: {}, {elapsed:.2?}", fmt_list(&errors), last < CURRENT_FINAL_TOL),
    );
}

#[test]
fn criterion_06_fluctuation_dissipation() {
    let sol = solve_profile_pipeline(standard(128)).unwrap();
    let gamma = sol.model.params().gamma;
    let affine = sol.covariance.f_affine_deviation(-4.0 * gamma * sol.j_n);
    let bonds = sol.covariance.current_spread(sol.j_n);
    let pass = affine < AFFINE_TOL && bonds < BOND_TOL;
    verdict(
        6,
        "local functional affine, bond currents constant n=128",
        pass,
        format!("affine {affine:.2e} (tol {AFFINE_TOL:.0e}), bonds {bonds:.2e} (tol {BOND_TOL:.0e})"),
    );
}

fn profile_sweep() -> Vec<(f64, f64, ProfileBounds)> {
    PROFILE_SWEEP
        .iter()
        .map(|&n| {
            let sol = solve_profile_pipeline(standard(n)).unwrap();
            let dev = macroscopic_profile_check(&sol.covariance, &sol.model, sol.j_macro).max_dev;
            let floor = sol.model.params().t_minus - sol.covariance.profile.iter().copied().fold(f64::INFINITY, f64::min);
            (dev, floor, ProfileBounds::of(&sol.covariance))
        })
        .collect()
}

#[test]
fn criterion_07_profile_law() {
    let start = Instant::now();
    let sweep = profile_sweep();
    let devs: Vec<f64> = sweep.iter().map(|s| s.0).collect();
    let floor = sweep.iter().map(|s| s.1).fold(f64::MIN, f64::max);
    let flat = PROFILE_SWEEP
        .iter()
        .map(|&n| {
            let sol = solve_profile_pipeline(equilibrium(n)).unwrap();
            sol.covariance.profile.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    let elapsed = start.elapsed();
    let decreasing = strictly_decreasing(&devs);
    let pass = decreasing && flat <= FLAT_TOL && floor <= FLOOR_TOL && within(elapsed, 600);
    verdict(
        7,
        "profile law n in {32,64,128,256}",
        pass,
        format!(
            "max deviation [{}], decreasing: {decreasing}, equilibrium flat {flat:.1e}, T- - min p2 = {floor:.1e}, {elapsed:.2?}",
            fmt_list(&devs)
        ),
    );
}

#[test]
fn criterion_08_energy_bounds() {
    let sweep = profile_sweep();
    let bounds: Vec<ProfileBounds> = sweep.iter().map(|s| s.2).collect();
    let ratios = [
        spread_ratio(bounds.iter().map(|b| b.mean_energy)),
        spread_ratio(bounds.iter().map(|b| b.sup_p2)),
        spread_ratio(bounds.iter().map(|b| b.gradient)),
    ];
    let pass = ratios.iter().all(|&r| r <= BOUND_RATIO);
    verdict(
        8,
        "energy, sup and gradient bounds",
        pass,
        format!("max/min ratios [{}] (tol {BOUND_RATIO})", fmt_list(&ratios)),
    );
}

#[test]
fn criterion_09_variance() {
    let start = Instant::now();
    let scaled: Vec<f64> = [16, 32, 64]
        .iter()
        .map(|&n| {
            let model = standard(n);
            variance_harmonics(&NeumannEigenbasis::new(n, 1.0), &solve_harmonics(&model).unwrap()).unwrap().scaled
        })
        .collect();
    let ratio = spread_ratio(scaled.iter().copied());
    let model = standard(8);
    let freq = variance_harmonics(&NeumannEigenbasis::new(8, 1.0), &solve_harmonics(&model).unwrap()).unwrap().total_variance;
    let ode = periodic_covariance_ode(&model, OdeOptions::default()).unwrap().total_variance;
    let gap = rel(freq, ode);
    let elapsed = start.elapsed();
    let pass = ratio <= VARIANCE_RATIO && gap <= ODE_TOL && within(elapsed, 600);
    verdict(
        9,
        "variance bound and ODE oracle",
        pass,
        format!("n^2 var [{}], ratio {ratio:.3} (tol {VARIANCE_RATIO}), ODE gap {gap:.2e} (tol {ODE_TOL}), {elapsed:.2?}", fmt_list(&scaled)),
    );
}

fn worst_z(estimates: &[Estimate], reference: impl Fn(usize) -> f64) -> (usize, f64) {
    estimates
        .iter()
        .enumerate()
        .map(|(k, e)| (k, e.z_score(reference(k)).abs()))
        .fold((0, 0.0), |best, cur| if cur.1 > best.1 || cur.1.is_nan() { cur } else { best })
}

#[test]
fn criterion_10_monte_carlo() {
    let start = Instant::now();
    let opts = SimOptions { replicas: 32, periods: 500, seed: 1, ..SimOptions::default() };

    let model = standard(16);
    let est = estimate_periodic_averages(&model, opts).unwrap();
    let sol = solve_profile_pipeline(model).unwrap();
    let (site, z_p2) = worst_z(&est.p2_profile, |x| sol.covariance.profile[x]);
    let (bond, z_j) = worst_z(&est.currents, |k| sol.covariance.bond_currents[k]);

    let eq = estimate_periodic_averages(&equilibrium(16), opts).unwrap();
    let (eq_site, z_eq) = worst_z(&eq.p2_profile, |_| 1.0);
    let elapsed = start.elapsed();

    let pass = z_p2 <= Z_MAX && z_j <= Z_MAX && z_eq <= Z_MAX && within(elapsed, 900);
    verdict(
        10,
        "Monte Carlo vs exact engine n=16",
        pass,
        format!(
            "max |z| p2 {z_p2:.2} (x={site}), current {z_j:.2} (bond {}), equilibrium {z_eq:.2} (x={eq_site}), R={} K={} B={}, {elapsed:.2?}",
            bond as i64 - 1,
            est.replicas,
            est.periods_averaged,
            est.burn_in_periods
        ),
    );
}

#[test]
fn criterion_11_closed_forms() {
    let resonant = ChainParams::standard(1);
    let res_gap = (1..=5)
        .map(|ell| rel(q_closed_resonant(&resonant, 0.25, ell), q_quadrature_resonant(&resonant, 0.25, ell)))
        .fold(0.0, f64::max);
    let slow = ChainParams { a: 0.0, b: 0.5, ..ChainParams::standard(1) };
    let slow_gap = [0.5, 1.0, 2.0]
        .iter()
        .map(|&w| {
            let p = ChainParams { omega0: w, ..slow };
            rel(q_closed_slow(&p, 0.25), q_quadrature_slow(&p, 0.25))
        })
        .fold(0.0, f64::max);
    let work: Vec<f64> = CURRENT_SWEEP
        .iter()
        .map(|&n| current_report(&standard(n)).unwrap().work_relative_error(-0.5).unwrap())
        .collect();
    let trend = strictly_decreasing(&work);
    let pass = res_gap <= CLOSED_FORM_TOL && slow_gap <= CLOSED_FORM_TOL && trend;
    verdict(
        11,
        "closed forms and work limit",
        pass,
        format!(
            "resonant Q gap {res_gap:.1e}, slow Q gap {slow_gap:.1e} (tol {CLOSED_FORM_TOL:.0e}), |I_n/n^(2a) - limit| = [{}], strictly decreasing: {trend}",
            fmt_list(&work)
        ),
    );
}
