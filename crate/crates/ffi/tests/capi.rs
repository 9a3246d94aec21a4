use std::ffi::{CStr, CString};
use std::ptr;

use rtgrowth_ffi::*;

const REFERENCE: &str = r#"{"rho_plus": 2, "rho_minus": 1, "mu_plus": 1, "mu_minus": 1,
 "kappa_plus": 0, "kappa_minus": 0, "vartheta": 0, "g": 1, "lambda": 0,
 "m_bar": [0, 0, 0], "l": 1, "tau": 1, "l1": 1, "l2": 1}"#;

fn params(json: &str) -> (RtStatus, *mut RtParams) {
    let c = CString::new(json).unwrap();
    let mut p = ptr::null_mut();
    let s = unsafe { rt_params_from_json(c.as_ptr(), &mut p) };
    (s, p)
}

fn last_error() -> String {
    let m = rt_last_error_message();
    assert!(!m.is_null());
    unsafe { CStr::from_ptr(m) }.to_string_lossy().into_owned()
}

#[test]
fn growth_round_trip() {
    let (s, p) = params(REFERENCE);
    assert_eq!(s, RtStatus::Ok);
    assert!(rt_last_error_message().is_null());
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { rt_growth_solve(p, 12, 3, 1e-8, &mut g) }, RtStatus::Ok);
    let mut v = RtVerdict::Stable;
    assert_eq!(unsafe { rt_growth_verdict(g, &mut v) }, RtStatus::Ok);
    assert_eq!(v, RtVerdict::Unstable);
    let mut lam = 0.0;
    assert_eq!(unsafe { rt_growth_lambda(g, &mut lam) }, RtStatus::Ok);
    assert!(lam > 0.0);
    let (mut k1, mut k2) = (0i64, 0i64);
    assert_eq!(unsafe { rt_growth_wavevector(g, &mut k1, &mut k2) }, RtStatus::Ok);
    assert!(k1 > 0 || (k1 == 0 && k2 > 0));
    unsafe {
        rt_growth_free(g);
        rt_params_free(p);
    }
}

#[test]
fn stable_result_has_no_lambda() {
    let (_, p) = params(&REFERENCE.replace(r#""vartheta": 0"#, r#""vartheta": 2"#));
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { rt_growth_solve(p, 12, 3, 1e-8, &mut g) }, RtStatus::Ok);
    let mut lam = -1.0;
    assert_eq!(unsafe { rt_growth_lambda(g, &mut lam) }, RtStatus::NotAvailable);
    assert_eq!(lam, -1.0);
    let mut dis = 0.0;
    let mut v = RtVerdict::Unstable;
    assert_eq!(unsafe { rt_discriminant(p, 12, 3, &mut dis, &mut v) }, RtStatus::Ok);
    assert!((dis - 0.5).abs() < 1e-8);
    assert_eq!(v, RtVerdict::Stable);
    unsafe {
        rt_growth_free(g);
        rt_params_free(p);
    }
}

#[test]
fn pure_rt_discriminant_is_infinite() {
    let (_, p) = params(REFERENCE);
    let mut dis = 0.0;
    let mut v = RtVerdict::Stable;
    assert_eq!(unsafe { rt_discriminant(p, 12, 3, &mut dis, &mut v) }, RtStatus::Ok);
    assert!(dis.is_infinite() && dis > 0.0);
    assert_eq!(v, RtVerdict::Unstable);
    unsafe { rt_params_free(p) };
}

#[test]
fn errors_are_reported() {
    let (s, p) = params(&REFERENCE.replace(r#""rho_plus": 2"#, r#""rho_plus": 1"#));
    assert_eq!(s, RtStatus::InvalidParameters);
    assert!(p.is_null());
    assert!(last_error().contains("RT condition"));

    let (s, _) = params("{");
    assert_eq!(s, RtStatus::InvalidJson);

    let (s, _) = params(r#"{"rho_plus": 2}"#);
    assert_eq!(s, RtStatus::InvalidJson);
    assert!(last_error().contains("missing field"));

    let mut out = ptr::null_mut();
    assert_eq!(unsafe { rt_params_from_json(ptr::null(), &mut out) }, RtStatus::NullPointer);
    assert_eq!(unsafe { rt_growth_solve(ptr::null(), 12, 3, 1e-8, ptr::null_mut()) }, RtStatus::NullPointer);

    let mut x = 0.0;
    assert_eq!(unsafe { rt_vertical_field_threshold(1.0, 1.0, 0.0, 1.0, 1.0, &mut x) }, RtStatus::InvalidParameters);
    assert!(last_error().contains("lambda = 0"));
    unsafe { rt_params_free(ptr::null_mut()) };
}

#[test]
fn closed_forms() {
    let mut x = 0.0;
    assert_eq!(unsafe { rt_poincare_constant(1.0, 3.0, &mut x) }, RtStatus::Ok);
    assert_eq!(x, 0.75);
    assert_eq!(unsafe { rt_surface_tension_threshold(1.0, 1.0, 2.0, 1.0, &mut x) }, RtStatus::Ok);
    assert_eq!(x, 4.0);
    assert_eq!(unsafe { rt_vertical_field_threshold(2.0, 1.0, 2.0, 1.0, 1.0, &mut x) }, RtStatus::Ok);
    assert!((x - 0.5f64.sqrt()).abs() < 1e-16);
    let (mut n, mut m) = (0u64, 0i64);
    assert_eq!(unsafe { rt_dirichlet_approximation(2f64.sqrt(), 5, &mut n, &mut m) }, RtStatus::Ok);
    assert_eq!((n, m), (2, 3));
    assert_eq!(unsafe { rt_dirichlet_approximation(f64::NAN, 5, &mut n, &mut m) }, RtStatus::InvalidParameters);
}

#[test]
fn version_matches_engine() {
    let v = unsafe { CStr::from_ptr(rt_version()) }.to_str().unwrap();
    assert_eq!(v, rtgrowth::ENGINE_VERSION);
}

#[test]
fn header_declares_every_export() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/rtgrowth.h")).unwrap();
    for name in [
        "rt_params_from_json",
        "rt_params_free",
        "rt_growth_solve",
        "rt_growth_verdict",
        "rt_growth_lambda",
        "rt_growth_wavevector",
        "rt_growth_free",
        "rt_discriminant",
        "rt_poincare_constant",
        "rt_surface_tension_threshold",
        "rt_vertical_field_threshold",
        "rt_dirichlet_approximation",
        "rt_last_error_message",
        "rt_version",
        "typedef struct RtParams RtParams",
        "RT_STATUS_OK = 0",
    ] {
        assert!(h.contains(name), "{name} missing from header");
    }
}
