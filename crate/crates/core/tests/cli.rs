use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::json;
use tempfile::TempDir;

fn hchain(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hchain"))
        .arg("--out-dir")
        .arg(dir)
        .args(args)
        .output()
        .expect("spawn hchain")
}

fn header(dir: &Path, file: &str) -> String {
    fs::read_to_string(dir.join(file)).unwrap().lines().next().unwrap().to_string()
}

/// Unit-parameter chain config with the keys of `extra` overriding the defaults.
fn config(extra: serde_json::Value) -> String {
    let mut base = json!({
        "n": 16, "gamma": 1.0, "omega0": 1.0, "t_minus": 1.0, "theta": 1.0, "a": -0.5, "b": 0.0,
        "force": [[1, 0.5, 0.0], [-1, 0.5, 0.0]]
    });
    for (k, v) in extra.as_object().unwrap() {
        base[k] = v.clone();
    }
    base.to_string()
}

fn report(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn profile_passes_and_writes_outputs() {
    let tmp = TempDir::new().unwrap();
    let out = hchain(tmp.path(), &["profile", "--n", "32"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.lines().last().unwrap().starts_with("PASS profile"));
    assert_eq!(header(tmp.path(), "profile.csv"), "x,x_over_n,p2,T_of_u,energy,F_functional,bond_current");
    let r = report(tmp.path());
    assert_eq!(r["command"], "profile");
    assert_eq!(r["pass"], true);
    assert!(r["checks"].as_array().unwrap().iter().all(|c| c["pass"] == true));
}

#[test]
fn current_and_variance_headers() {
    let tmp = TempDir::new().unwrap();
    let out = hchain(tmp.path(), &["current", "--n-list", "16,32"]);
    assert!(out.status.code().is_some_and(|c| c <= 1));
    assert_eq!(header(tmp.path(), "current.csv"), "n,J_n,nJ_n,J_limit,I_n");
    assert_eq!(header(tmp.path(), "harmonics.csv"), "ell,x,re_q,im_q,re_p,im_p");

    let out = hchain(tmp.path(), &["variance", "--n-list", "8,16", "--ode-n", "4"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert_eq!(header(tmp.path(), "variance.csv"), "m,x,re_V,im_V");
    assert_eq!(header(tmp.path(), "variance_totals.csv"), "n,total_variance,scaled");
}

#[test]
fn failing_check_exits_one() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, config(json!({"tolerances": {"bond_current": -1.0}}))).unwrap();
    let out = hchain(tmp.path(), &["--config", cfg.to_str().unwrap(), "profile"]);
    assert_eq!(out.status.code(), Some(1));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("FAIL bond currents n=16"));
    assert_eq!(report(tmp.path())["pass"], false);
}

#[test]
fn config_errors_exit_two() {
    let tmp = TempDir::new().unwrap();
    let cases = [
        config(json!({"t_minus": -1.0})),
        config(json!({"tolerances": {"no_such_field": 1.0}})),
        r#"{"n": 16}"#.to_string(),
        "{ not json".to_string(),
    ];
    for text in cases {
        let cfg = tmp.path().join("cfg.json");
        fs::write(&cfg, &text).unwrap();
        let out = hchain(tmp.path(), &["--config", cfg.to_str().unwrap(), "profile"]);
        assert_eq!(out.status.code(), Some(2), "{text}");
        assert!(String::from_utf8(out.stderr).unwrap().starts_with("error:"));
    }
    let missing = hchain(tmp.path(), &["--config", "/nonexistent/cfg.json", "profile"]);
    assert_eq!(missing.status.code(), Some(2));

    let cfg = tmp.path().join("regime.json");
    fs::write(&cfg, config(json!({"a": 0.0, "b": 0.5}))).unwrap();
    let out = hchain(tmp.path(), &["--config", cfg.to_str().unwrap(), "variance", "--n-list", "8"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("not supported"));
}

#[test]
fn simulate_is_byte_reproducible() {
    let args = ["--seed", "7", "simulate", "--n", "4", "--replicas", "2", "--periods", "4", "--burn-in", "2"];
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    assert!(hchain(a.path(), &args).status.code().is_some_and(|c| c <= 1));
    assert!(hchain(b.path(), &args).status.code().is_some_and(|c| c <= 1));
    for file in ["sim.csv", "sim_compare.csv", "sim_meta.json"] {
        assert_eq!(fs::read(a.path().join(file)).unwrap(), fs::read(b.path().join(file)).unwrap(), "{file}");
    }
    assert_eq!(header(a.path(), "sim.csv"), "x,p2_mean,p2_stderr,current_mean,current_stderr");
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.path().join("sim_meta.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"], 7);
    assert_eq!(meta["R"], 2);
    assert_eq!(meta["B"], 2);
    assert_eq!(meta["K"], 4);
}

#[test]
fn zero_force_simulation_passes() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, config(json!({"n": 4, "force": [], "simulation": {"replicas": 16, "periods": 50, "burn_in": 5}}))).unwrap();
    let out = hchain(tmp.path(), &["--config", cfg.to_str().unwrap(), "simulate"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
}
