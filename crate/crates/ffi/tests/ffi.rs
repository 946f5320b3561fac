use std::ffi::{c_char, CStr, CString};
use std::ptr;

use fracfield_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 512];
    let n = unsafe { ff_last_error_message(buf.as_mut_ptr(), buf.len()) };
    let s = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap().to_string();
    assert_eq!(s.len(), n);
    s
}

fn grid(n: usize) -> *mut FfGrid {
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { ff_grid_new(0.0, 1.0, n, &mut g) }, FfStatus::Ok);
    g
}

fn density(spec: &str) -> *mut FfDensity {
    let mut d = ptr::null_mut();
    let s = CString::new(spec).unwrap();
    assert_eq!(unsafe { ff_density_parse(s.as_ptr(), &mut d) }, FfStatus::Ok);
    d
}

#[test]
fn version_and_errors() {
    let v = unsafe { CStr::from_ptr(ff_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));

    let mut g = ptr::null_mut();
    assert_eq!(unsafe { ff_grid_new(1.0, 0.0, 16, &mut g) }, FfStatus::Config);
    assert!(g.is_null());
    assert!(last_error().contains("configuration"));
    assert_eq!(ff_last_error_length(), last_error().len());
    assert_eq!(unsafe { ff_grid_new(0.0, 1.0, 16, ptr::null_mut()) }, FfStatus::NullPointer);
    assert!(last_error().contains("out"));

    // Truncation keeps the terminator.
    let mut small = [0 as c_char; 4];
    assert_eq!(unsafe { ff_last_error_message(small.as_mut_ptr(), 4) }, 3);
    assert_eq!(small[3], 0);
    assert_eq!(unsafe { ff_last_error_message(ptr::null_mut(), 4) }, 0);

    let bad = CString::new("nope:0.5").unwrap();
    let mut d = ptr::null_mut();
    assert_eq!(unsafe { ff_density_parse(bad.as_ptr(), &mut d) }, FfStatus::Config);
    assert_eq!(unsafe { ff_density_parse(ptr::null(), &mut d) }, FfStatus::NullPointer);

    // Success clears the message.
    let g = grid(16);
    assert_eq!(ff_last_error_length(), 0);
    unsafe { ff_grid_free(g) };
    unsafe { ff_grid_free(ptr::null_mut()) };
}

#[test]
fn caputo_of_linear_function() {
    let n = 64;
    let g = grid(n);
    assert_eq!(unsafe { ff_grid_len(g) }, n + 1);
    let x: Vec<f64> = (0..=n).map(|j| j as f64 / n as f64).collect();
    let mut out = vec![0.0; n + 1];
    let st = unsafe { ff_fracop_apply(FfOperator::CaputoLeft, 0.5, g, x.as_ptr(), out.as_mut_ptr(), n + 1) };
    assert_eq!(st, FfStatus::Ok);
    // 2 sqrt(x / pi), exact for L1 on linear data.
    for (xv, o) in x.iter().zip(&out) {
        assert!((o - 2.0 * (xv / std::f64::consts::PI).sqrt()).abs() < 1e-12);
    }
    let st = unsafe { ff_fracop_apply(FfOperator::RlRight, 1.5, g, x.as_ptr(), out.as_mut_ptr(), n + 1) };
    assert_eq!(st, FfStatus::Config);
    let st = unsafe { ff_fracop_apply(FfOperator::RlRight, 0.5, g, x.as_ptr(), out.as_mut_ptr(), n) };
    assert_eq!(st, FfStatus::Structural);
    unsafe { ff_grid_free(g) };
}

#[test]
fn variational_and_noether_entry_points() {
    let n = 32;
    let g = grid(n);
    let d = density("complex-scalar:0.5:1");
    assert_eq!(unsafe { ff_density_n_fields(d) }, 2);
    let nodes = n + 1;
    let xs: Vec<f64> = (0..nodes).map(|j| j as f64 / n as f64).collect();
    let re: Vec<f64> = xs.iter().chain(&xs).map(|x| 1.0 + x * x).collect();
    let im: Vec<f64> = xs.iter().map(|x| x.sin()).chain(xs.iter().map(|x| -x.sin())).collect();
    let mut c = ptr::null_mut();
    assert_eq!(unsafe { ff_config_new(g, 2, re.as_ptr(), im.as_ptr(), 2 * nodes, &mut c) }, FfStatus::Ok);

    let (mut sr, mut si) = (0.0, 0.0);
    assert_eq!(unsafe { ff_action(d, c, &mut sr, &mut si) }, FfStatus::Ok);
    assert!(sr.is_finite() && si.abs() < 1e-12);

    let (mut rr, mut ri) = (vec![0.0; 2 * nodes], vec![0.0; 2 * nodes]);
    assert_eq!(unsafe { ff_el_residual(d, c, FfMode::DiscreteExact, rr.as_mut_ptr(), ri.as_mut_ptr(), 2 * nodes) }, FfStatus::Ok);
    assert!(rr.iter().any(|v| v.abs() > 1e-3));

    let eta: Vec<f64> = xs.iter().chain(&xs).map(|x| x * (1.0 - x)).collect();
    let mut e = ptr::null_mut();
    assert_eq!(unsafe { ff_config_new(g, 2, eta.as_ptr(), ptr::null(), 2 * nodes, &mut e) }, FfStatus::Ok);
    let mut defect = f64::NAN;
    assert_eq!(unsafe { ff_variational_consistency(d, c, e, &mut defect) }, FfStatus::Ok);
    assert!(defect <= 1e-8 * (1.0 + sr.hypot(si)), "{defect}");
    // A perturbation that moves the boundary is rejected.
    assert_eq!(unsafe { ff_variational_consistency(d, c, c, &mut defect) }, FfStatus::Config);

    let (mut nr, mut ni) = (vec![0.0; nodes], vec![0.0; nodes]);
    let st = unsafe { ff_noether_residual_phase(d, c, 1.0, FfMode::DiscreteExact, nr.as_mut_ptr(), ni.as_mut_ptr(), nodes) };
    assert_eq!(st, FfStatus::Ok);

    let k = density("frac-kinetic:0.5");
    let st = unsafe { ff_noether_residual_phase(k, c, 1.0, FfMode::DiscreteExact, nr.as_mut_ptr(), ni.as_mut_ptr(), nodes) };
    assert_ne!(st, FfStatus::Ok);
    unsafe {
        ff_density_free(k);
        ff_config_free(e);
        ff_config_free(c);
        ff_density_free(d);
        ff_grid_free(g);
    }
}

#[test]
fn dirac_and_special_functions() {
    let n = 128;
    let (psi0, bar) = ([1.0, 0.0, 0.5, 0.0], [0.8, 0.0, -0.3, 0.0]);
    let (mut re, mut im) = (vec![0.0; n + 1], vec![0.0; n + 1]);
    let mut rel = f64::NAN;
    let st = unsafe {
        ff_dirac_conserved_residual(0.5, 1.0, 1.0, n, psi0.as_ptr(), bar.as_ptr(), FfMode::DiscreteExact, re.as_mut_ptr(), im.as_mut_ptr(), n + 1, &mut rel)
    };
    assert_eq!(st, FfStatus::Ok);
    assert!(rel <= 1e-10, "{rel}");

    let (mut a, mut b) = (0.0, 0.0);
    assert_eq!(unsafe { ff_mittag_leffler(1.0, 1.0, 1.0, 0.0, &mut a, &mut b) }, FfStatus::Ok);
    assert!((a - std::f64::consts::E).abs() < 1e-12 && b == 0.0);
    assert_eq!(unsafe { ff_mittag_leffler(0.5, 1.0, -1e4, 0.0, &mut a, &mut b) }, FfStatus::Range);
}
