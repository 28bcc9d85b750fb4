//! CSV and JSON emitters. Every CSV starts with a header row.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::HarnessError;
use crate::first_moments::HarmonicField;
use crate::pdmp::SimEstimate;
use crate::second_moments::{CovarianceSolution, VarianceReport};

fn create_dir(dir: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(|source| HarnessError::Io { path: dir.display().to_string(), source })
}

fn writer(dir: &Path, name: &str) -> Result<csv::Writer<fs::File>, HarnessError> {
    create_dir(dir)?;
    let path: PathBuf = dir.join(name);
    let file = fs::File::create(&path).map_err(|source| HarnessError::Io { path: path.display().to_string(), source })?;
    Ok(csv::Writer::from_writer(file))
}

pub fn write_json<T: Serialize + ?Sized>(dir: &Path, name: &str, value: &T) -> Result<(), HarnessError> {
    create_dir(dir)?;
    let path = dir.join(name);
    let text = serde_json::to_string_pretty(value).map_err(HarnessError::Json)?;
    fs::write(&path, text + "\n").map_err(|source| HarnessError::Io { path: path.display().to_string(), source })
}

/// `harmonics.csv`: `ell, x, re_q, im_q, re_p, im_p`.
pub fn write_harmonics(dir: &Path, field: &HarmonicField) -> Result<(), HarnessError> {
    let mut w = writer(dir, "harmonics.csv")?;
    w.write_record(["ell", "x", "re_q", "im_q", "re_p", "im_p"])?;
    for (k, &ell) in field.ells().iter().enumerate() {
        for (x, (q, p)) in field.q(k).iter().zip(field.p(k)).enumerate() {
            w.serialize((ell, x, q.re, q.im, p.re, p.im))?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// One row of `current.csv`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurrentRow {
    pub n: usize,
    #[serde(rename = "J_n")]
    pub j_n: f64,
    #[serde(rename = "nJ_n")]
    pub n_j_n: f64,
    #[serde(rename = "J_limit")]
    pub j_limit: f64,
    #[serde(rename = "I_n")]
    pub i_n: f64,
}

pub fn write_current(dir: &Path, rows: &[CurrentRow]) -> Result<(), HarnessError> {
    let mut w = writer(dir, "current.csv")?;
    if rows.is_empty() {
        w.write_record(["n", "J_n", "nJ_n", "J_limit", "I_n"])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// `profile.csv`: `x, x_over_n, p2, T_of_u, energy, F_functional, bond_current`,
/// with `bond_current` the current through the bond `(x, x+1)`.
pub fn write_profile(dir: &Path, cov: &CovarianceSolution, law: impl Fn(f64) -> f64) -> Result<(), HarnessError> {
    let mut w = writer(dir, "profile.csv")?;
    w.write_record(["x", "x_over_n", "p2", "T_of_u", "energy", "F_functional", "bond_current"])?;
    let n = cov.sites() - 1;
    for x in 0..=n {
        let u = x as f64 / n as f64;
        w.serialize((x, u, cov.profile[x], law(u), cov.energy[x], cov.f_functional[x], cov.bond_currents[x + 1]))?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// `variance.csv`: `m, x, re_V, im_V`.
pub fn write_variance(dir: &Path, report: &VarianceReport) -> Result<(), HarnessError> {
    let mut w = writer(dir, "variance.csv")?;
    w.write_record(["m", "x", "re_V", "im_V"])?;
    for (m, v) in &report.harmonics {
        for (x, z) in v.iter().enumerate() {
            w.serialize((m, x, z.re, z.im))?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// `variance_totals.csv`: `n, total_variance, scaled`.
pub fn write_variance_totals(dir: &Path, reports: &[VarianceReport]) -> Result<(), HarnessError> {
    let mut w = writer(dir, "variance_totals.csv")?;
    w.write_record(["n", "total_variance", "scaled"])?;
    for r in reports {
        w.serialize((r.n, r.total_variance, r.scaled))?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// `sim.csv`: `x, p2_mean, p2_stderr, current_mean, current_stderr` for
/// `x = -1..=n`; the current is through bond `(x, x+1)` and the `p2` fields
/// are empty at `x = -1`.
pub fn write_sim(dir: &Path, est: &SimEstimate) -> Result<(), HarnessError> {
    let mut w = writer(dir, "sim.csv")?;
    w.write_record(["x", "p2_mean", "p2_stderr", "current_mean", "current_stderr"])?;
    for (k, j) in est.currents.iter().enumerate() {
        let x = k as i64 - 1;
        let (m, s) = match k.checked_sub(1).map(|i| est.p2_profile[i]) {
            Some(e) => (Some(e.mean), Some(e.stderr)),
            None => (None, None),
        };
        w.serialize((x, m, s, j.mean, j.stderr))?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// One row of `sim_compare.csv`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompareRow {
    pub observable: &'static str,
    pub index: i64,
    pub simulated: f64,
    pub stderr: f64,
    pub analytic: f64,
    pub z: f64,
}

pub fn write_compare(dir: &Path, rows: &[CompareRow]) -> Result<(), HarnessError> {
    let mut w = writer(dir, "sim_compare.csv")?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
