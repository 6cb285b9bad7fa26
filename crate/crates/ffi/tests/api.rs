//! The C ABI called from Rust: handle lifecycles, error codes and buffers.

use std::ffi::{CStr, CString};
use std::ptr;

use coag_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(coag_last_error_message()) }.to_string_lossy().into_owned()
}

fn catalog(name: &str) -> *mut CoagDensity {
    let c = CString::new(name).unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { coag_density_from_catalog(c.as_ptr(), ptr::null(), 0, &mut out) }, CoagStatus::Ok, "{}", last_error());
    out
}

#[test]
fn version_matches_the_crate() {
    let v = unsafe { CStr::from_ptr(coag_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn density_round_trip_through_buffers() {
    let grid: Vec<f64> = (0..50).map(|i| 0.01 * 1.2f64.powi(i)).collect();
    let values: Vec<f64> = grid.iter().map(|x| (-x).exp()).collect();
    let mut d = ptr::null_mut();
    unsafe {
        assert_eq!(coag_density_new(grid.as_ptr(), values.as_ptr(), grid.len(), &mut d), CoagStatus::Ok);
        let mut n = 0usize;
        assert_eq!(coag_density_len(d, &mut n), CoagStatus::Ok);
        assert_eq!(n, 50);
        let (mut g2, mut v2) = (vec![0.0; 50], vec![0.0; 50]);
        assert_eq!(coag_density_samples(d, g2.as_mut_ptr(), v2.as_mut_ptr(), 49), CoagStatus::BufferTooSmall);
        assert_eq!(coag_density_samples(d, g2.as_mut_ptr(), v2.as_mut_ptr(), 50), CoagStatus::Ok);
        assert_eq!((g2, v2), (grid, values));
        coag_density_free(d);
    }
}

#[test]
fn file_io_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("g.csv").to_str().unwrap()).unwrap();
    let d = catalog("G_add");
    let mut back = ptr::null_mut();
    unsafe {
        assert_eq!(coag_density_write(d, path.as_ptr()), CoagStatus::Ok);
        assert_eq!(coag_density_read(path.as_ptr(), &mut back), CoagStatus::Ok);
        let mut m = [0.0; 3];
        assert_eq!(coag_density_moments(back, 2, m.as_mut_ptr()), CoagStatus::Ok);
        assert!(m[0].is_infinite());
        assert!((m[1] - 1.0).abs() < 1e-6 && (m[2] - 1.0).abs() < 1e-6, "{m:?}");
        coag_density_free(back);
        coag_density_free(d);
    }
}

#[test]
fn additive_profile_is_a_fixed_point() {
    let etas: Vec<f64> = (0..40).map(|i| 10f64.powf(-2.0 + 4.0 * i as f64 / 39.0)).collect();
    let mut p = ptr::null_mut();
    let (mut u0, mut u1) = (ptr::null_mut(), ptr::null_mut());
    unsafe {
        assert_eq!(coag_density_exact_profile(COAG_KERNEL_ADDITIVE, &mut p), CoagStatus::Ok);
        assert_eq!(coag_transform(p, COAG_TRANSFORM_BERNSTEIN, etas.as_ptr(), etas.len(), &mut u0), CoagStatus::Ok);
        assert_eq!(coag_curve_evolve(u0, COAG_KERNEL_ADDITIVE, 3.0, &mut u1), CoagStatus::Ok);
        let mut v = vec![0.0; etas.len()];
        assert_eq!(coag_curve_samples(u1, ptr::null_mut(), v.as_mut_ptr(), v.len()), CoagStatus::Ok);
        for (e, x) in etas.iter().zip(&v) {
            let exact = (1.0 + 2.0 * e).sqrt() - 1.0;
            assert!((x / exact - 1.0).abs() < 1e-6);
        }
        let mut d = f64::NAN;
        assert_eq!(coag_curve_distance(u0, u1, 2.5, &mut d), CoagStatus::Ok);
        assert!(d < 1e-6, "{d}");
        coag_curve_free(u0);
        coag_curve_free(u1);
        coag_density_free(p);
    }
}

#[test]
fn errors_map_to_status_codes() {
    let mut out = ptr::null_mut();
    let name = CString::new("lognormal").unwrap();
    unsafe {
        assert_eq!(coag_density_from_catalog(name.as_ptr(), ptr::null(), 0, &mut out), CoagStatus::UnknownName);
        assert!(out.is_null());
        assert!(last_error().contains("lognormal"));
        assert_eq!(coag_density_from_catalog(ptr::null(), ptr::null(), 0, &mut out), CoagStatus::NullPointer);
        assert_eq!(coag_density_exact_profile(7, &mut out), CoagStatus::InvalidArgument);
        let bad = [1.0, 0.5, 2.0];
        assert_eq!(coag_density_new(bad.as_ptr(), bad.as_ptr(), 3, &mut out), CoagStatus::InvalidGrid);
        let cfg = CString::new("kernel = const\nkappa = 5").unwrap();
        let mut r = ptr::null_mut();
        assert_eq!(coag_run_config(cfg.as_ptr(), &mut r), CoagStatus::Config);
        let cfg = CString::new("no equals sign").unwrap();
        assert_eq!(coag_run_config(cfg.as_ptr(), &mut r), CoagStatus::Parse);
        let d = catalog("exp");
        let mut c = ptr::null_mut();
        let etas = [0.1, 1.0, 10.0];
        assert_eq!(coag_transform(d, 9, etas.as_ptr(), 3, &mut c), CoagStatus::InvalidArgument);
        assert_eq!(coag_transform(d, COAG_TRANSFORM_BERNSTEIN, etas.as_ptr(), 3, &mut c), CoagStatus::Ok);
        let mut e = ptr::null_mut();
        assert_eq!(coag_curve_evolve(c, COAG_KERNEL_CONSTANT, 1.0, &mut e), CoagStatus::NonAdmissible);
        coag_curve_free(c);
        coag_density_free(d);
        coag_density_free(ptr::null_mut());
    }
}

#[test]
fn preset_report_accessors() {
    let name = CString::new("thm2").unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("r.json").to_str().unwrap()).unwrap();
    let mut r = ptr::null_mut();
    unsafe {
        assert_eq!(coag_run_preset(name.as_ptr(), &mut r), CoagStatus::Ok, "{}", last_error());
        let (mut passed, mut n) = (false, 0usize);
        assert_eq!(coag_report_passed(r, &mut passed), CoagStatus::Ok);
        assert_eq!(coag_report_kappa_count(r, &mut n), CoagStatus::Ok);
        assert!(passed);
        assert_eq!(n, 3);
        let (mut k, mut fit, mut th, mut holds) = (0.0, 0.0, 0.0, false);
        assert_eq!(coag_report_entry(r, 1, &mut k, &mut fit, &mut th, &mut holds), CoagStatus::Ok);
        assert_eq!((k, th, holds), (2.5, 0.25, true));
        assert!(fit.is_finite());
        assert_eq!(coag_report_entry(r, 3, &mut k, ptr::null_mut(), ptr::null_mut(), ptr::null_mut()), CoagStatus::InvalidArgument);
        assert_eq!(coag_report_write_json(r, path.as_ptr()), CoagStatus::Ok);
        coag_report_free(r);
    }
    let json = std::fs::read_to_string(dir.path().join("r.json")).unwrap();
    assert!(json.contains("\"theorem_rate\""));
}
