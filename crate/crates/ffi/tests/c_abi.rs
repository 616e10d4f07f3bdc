use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use nharmonic_ffi::*;

fn metric(spec: &str) -> *mut NhMetric {
    let spec = CString::new(spec).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { nh_metric_parse(spec.as_ptr(), &mut m) }, NhStatus::Ok);
    m
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(nh_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn golden_values_through_the_abi() {
    let rho = metric("constant");
    let mut v = 0.0;
    unsafe {
        assert_eq!(nh_outer_radius(rho, 3, -5.0, 2.0, &mut v), NhStatus::Ok);
        assert!((v - 1.5902999119667365).abs() < 1e-12);
        assert_eq!(nh_nitsche_bound(rho, 3, 2.0, &mut v), NhStatus::Ok);
        assert!((v - 1.4358443229000065).abs() < 1e-10);
        assert_eq!(nh_kappa(4, &mut v), NhStatus::Ok);
        assert!((v - 1.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(nh_kappa(3, &mut v), NhStatus::Unbounded);
        let (mut lo, mut hi) = (0.0, 0.0);
        assert_eq!(nh_c_bounds(rho, 3, &mut lo, &mut hi), NhStatus::Ok);
        assert_eq!((lo, hi), (f64::NEG_INFINITY, 1.0));
        assert_eq!(nh_c_bounds(rho, 4, &mut lo, &mut hi), NhStatus::Ok);
        assert!((lo + 2.25).abs() < 1e-12);
        nh_metric_free(rho);
    }
}

#[test]
fn solution_lifecycle() {
    let rho = metric("power:-3");
    unsafe {
        let mut c = 0.0;
        assert_eq!(nh_solve_c(rho, 3, 2.0, 4.0, &mut c, ptr::null_mut()), NhStatus::Ok);
        assert!((c + 27f64.sqrt()).abs() < 1e-9);
        let mut sol = ptr::null_mut();
        assert_eq!(nh_solve_profile(rho, 3, c, 4.0, 128, &mut sol), NhStatus::Ok);
        let (mut h, mut dh) = (0.0, 0.0);
        assert_eq!(nh_solution_eval(sol, 1.5, &mut h, &mut dh), NhStatus::Ok);
        assert!((h - 2.25).abs() < 1e-9 && (dh - 3.0).abs() < 1e-8);
        assert_eq!(nh_solution_eval(sol, 3.0, &mut h, ptr::null_mut()), NhStatus::InvalidArgument);

        let mut len = 0usize;
        assert_eq!(nh_solution_grid_len(sol, &mut len), NhStatus::Ok);
        let mut t = vec![0.0; len];
        let mut hs = vec![0.0; len];
        assert_eq!(nh_solution_grid(sol, t.as_mut_ptr(), hs.as_mut_ptr(), len - 1), NhStatus::BufferTooSmall);
        assert_eq!(nh_solution_grid(sol, t.as_mut_ptr(), hs.as_mut_ptr(), len), NhStatus::Ok);
        assert_eq!((t[0], hs[0]), (1.0, 1.0));
        assert!((hs[len - 1] - 4.0).abs() < 1e-12);

        let mut json = ptr::null_mut();
        assert_eq!(nh_solution_to_json(sol, &mut json), NhStatus::Ok);
        let s = CStr::from_ptr(json).to_str().unwrap();
        assert!(s.starts_with("{\"n\":3,\"metric\":{\"kind\":\"power\",\"nu\":-3}"));
        nh_string_free(json);
        nh_solution_free(sol);
        nh_metric_free(rho);
    }
}

#[test]
fn error_statuses() {
    let rho = metric("constant");
    unsafe {
        let (mut c, mut min_r) = (0.0, 0.0);
        assert_eq!(nh_solve_c(rho, 3, 4.0, 1.0001, &mut c, &mut min_r), NhStatus::NitscheViolation);
        assert!((min_r - 2.7412616530002866).abs() < 1e-9);
        assert!(last_error().contains("Nitsche"));

        let bad = metric("power:-5");
        let mut ok = true;
        assert_eq!(nh_check_regular(bad, 4, 2.0, &mut ok), NhStatus::Ok);
        assert!(!ok);
        let mut sol = ptr::null_mut();
        assert_eq!(nh_solve_profile(bad, 4, 0.0, 2.0, 64, &mut sol), NhStatus::NonRegularMetric);
        assert!(sol.is_null());
        nh_metric_free(bad);

        let spec = CString::new("wobbly").unwrap();
        let mut m = ptr::null_mut();
        assert_eq!(nh_metric_parse(spec.as_ptr(), &mut m), NhStatus::Domain);
        assert_eq!(nh_metric_parse(ptr::null(), &mut m), NhStatus::NullPointer);
        assert_eq!(nh_phi(0.5, 2, &mut c), NhStatus::Domain);
        assert_eq!(nh_solution_info(ptr::null(), &mut c, ptr::null_mut(), ptr::null_mut()), NhStatus::NullPointer);
        nh_metric_free(rho);
        nh_metric_free(ptr::null_mut());
        nh_solution_free(ptr::null_mut());
    }
}

#[test]
fn nonminimality_through_the_abi() {
    let rho = metric("constant");
    unsafe {
        let mut sol = ptr::null_mut();
        assert_eq!(nh_solve_profile(rho, 4, -100.0, 2.0, 256, &mut sol), NhStatus::Ok);
        let (mut flag, mut w) = (false, 0.0);
        assert_eq!(nh_nonminimality(sol, 1.5, 16, &mut flag, &mut w), NhStatus::Ok);
        assert!(flag && w > 1.0 && w <= 1.5);
        nh_solution_free(sol);
        nh_metric_free(rho);
    }
}

fn target_dir() -> PathBuf {
    // <target>/<profile>/deps/<test binary>
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

fn cc_available() -> bool {
    Command::new("cc").arg("--version").output().is_ok_and(|o| o.status.success())
}

#[test]
fn header_compiles_and_links_from_c() {
    if !cc_available() {
        eprintln!("skipping: no C compiler");
        return;
    }
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    // `cargo test` leaves the staticlib in deps/; `cargo build` uplifts it.
    let dir = target_dir();
    let lib = [dir.join("deps/libnharmonic_ffi.a"), dir.join("libnharmonic_ffi.a")]
        .into_iter()
        .find(|p| p.exists())
        .expect("static library built alongside the test");
    let out = tempfile::tempdir().unwrap();
    let exe = out.path().join("smoke");
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-I"])
        .arg(root.join("include"))
        .arg(root.join("examples/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok 0.1.0"));
}
