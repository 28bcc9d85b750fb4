use std::ffi::{CStr, CString};
use std::ptr;

use hchain::first_moments::current_report;
use hchain::harness::solve_profile_pipeline;
use hchain::{ChainParams, ForceSpec, Requirements};
use hchain_ffi::*;

fn last_error() -> String {
    let len = unsafe { hc_last_error(ptr::null_mut(), 0) };
    let mut buf = vec![0 as std::ffi::c_char; len + 1];
    unsafe { hc_last_error(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn cosine_model(n: usize) -> *mut HcModel {
    let ells = [-1i64, 1];
    let re = [0.5, 0.5];
    let im = [0.0, 0.0];
    let mut m = ptr::null_mut();
    let s = unsafe {
        hc_model_new(n, 1.0, 1.0, 1.0, 1.0, -0.5, 0.0, ells.as_ptr(), re.as_ptr(), im.as_ptr(), 2, &mut m)
    };
    assert_eq!(s, HcStatus::Ok, "{}", last_error());
    m
}

#[test]
fn current_matches_library() {
    let m = cosine_model(32);
    assert_eq!(unsafe { hc_model_sites(m) }, 33);
    let (mut j_n, mut j) = (0.0, 0.0);
    assert_eq!(unsafe { hc_current(m, &mut j_n, &mut j) }, HcStatus::Ok);
    let model = hchain::validate(ChainParams::standard(32), ForceSpec::cosine(1.0), Requirements::default()).unwrap();
    let r = current_report(&model).unwrap();
    assert_eq!(j_n, r.j_n);
    assert_eq!(j, r.j_limit.unwrap());
    unsafe { hc_model_free(m) };
}

#[test]
fn profile_round_trip() {
    let m = cosine_model(8);
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { hc_profile_solve(m, &mut p) }, HcStatus::Ok, "{}", last_error());
    let mut p2 = vec![0.0; 9];
    let mut bonds = vec![0.0; 10];
    assert_eq!(unsafe { hc_profile_p2(p, p2.as_mut_ptr(), p2.len()) }, HcStatus::Ok);
    assert_eq!(unsafe { hc_profile_bond_currents(p, bonds.as_mut_ptr(), bonds.len()) }, HcStatus::Ok);
    let model = hchain::validate(ChainParams::standard(8), ForceSpec::cosine(1.0), Requirements::default()).unwrap();
    let sol = solve_profile_pipeline(model).unwrap();
    assert_eq!(p2, sol.covariance.profile);
    assert_eq!(bonds, sol.covariance.bond_currents);
    assert_eq!(unsafe { hc_profile_current(p) }, sol.j_n);

    let mut short = vec![0.0; 8];
    assert_eq!(unsafe { hc_profile_p2(p, short.as_mut_ptr(), short.len()) }, HcStatus::BufferTooSmall);
    assert!(last_error().contains("9 needed"));
    unsafe {
        hc_profile_free(p);
        hc_model_free(m);
    }
}

#[test]
fn json_config_and_errors() {
    let good = CString::new(r#"{"n": 4, "gamma": 1.0, "omega0": 1.0, "t_minus": 1.0, "theta": 1.0, "a": -0.5, "b": 0.0, "force": [[1, 0.5, 0.0], [-1, 0.5, 0.0]]}"#).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { hc_model_from_json(good.as_ptr(), &mut m) }, HcStatus::Ok, "{}", last_error());
    assert_eq!(unsafe { hc_model_sites(m) }, 5);
    unsafe { hc_model_free(m) };

    let malformed = CString::new("{ not json").unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { hc_model_from_json(malformed.as_ptr(), &mut m) }, HcStatus::InvalidConfig);
    assert!(m.is_null());
    assert!(!last_error().is_empty());

    let mut m = ptr::null_mut();
    let s = unsafe { hc_model_new(4, -1.0, 1.0, 1.0, 1.0, -0.5, 0.0, ptr::null(), ptr::null(), ptr::null(), 0, &mut m) };
    assert_eq!(s, HcStatus::InvalidModel);
    assert!(m.is_null());

    assert_eq!(unsafe { hc_model_from_json(ptr::null(), &mut m) }, HcStatus::NullPointer);
    let (mut a, mut b) = (0.0, 0.0);
    assert_eq!(unsafe { hc_current(ptr::null(), &mut a, &mut b) }, HcStatus::NullPointer);
    assert_eq!(unsafe { hc_model_sites(ptr::null()) }, 0);
    assert!(unsafe { hc_profile_current(ptr::null()) }.is_nan());
    unsafe {
        hc_model_free(ptr::null_mut());
        hc_profile_free(ptr::null_mut());
    }
}

#[test]
fn simulation_is_seed_reproducible() {
    let m = cosine_model(4);
    let opts = HcSimOptions { replicas: 2, periods: 5, burn_in: 5, steps_per_period: 64, seed: 9 };
    let run = || {
        let (mut mean, mut err) = (vec![0.0; 5], vec![0.0; 5]);
        let s = unsafe { hc_simulate_p2(m, &opts, mean.as_mut_ptr(), err.as_mut_ptr(), 5) };
        assert_eq!(s, HcStatus::Ok, "{}", last_error());
        (mean, err)
    };
    let (a, b) = (run(), run());
    assert_eq!(a, b);
    assert!(a.0.iter().all(|v| v.is_finite() && *v > 0.0));
    let bad = HcSimOptions { replicas: 0, ..opts };
    let (mut mean, mut err) = (vec![0.0; 5], vec![0.0; 5]);
    assert_eq!(unsafe { hc_simulate_p2(m, &bad, mean.as_mut_ptr(), err.as_mut_ptr(), 5) }, HcStatus::InvalidConfig);
    unsafe { hc_model_free(m) };
}

#[test]
fn status_strings_are_static() {
    for s in [HcStatus::Ok, HcStatus::BufferTooSmall, HcStatus::Panic] {
        let text = unsafe { CStr::from_ptr(hc_status_str(s)) }.to_str().unwrap();
        assert!(!text.is_empty());
    }
}

#[test]
fn header_declares_every_entry_point() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/hchain.h")).unwrap();
    for f in ["hc_model_new", "hc_model_from_json", "hc_current", "hc_profile_solve", "hc_simulate_p2", "hc_last_error"] {
        assert!(header.contains(f), "{f} missing from header");
    }
}
