use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use ksfront_ffi::*;

fn last_error() -> String {
    let p = ksf_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn model(chi: f64, a: f64, b: f64, lambda: f64, mu: f64) -> *mut KsfModel {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { ksf_model_new(chi, a, b, lambda, mu, &mut m) }, KsfStatus::Ok);
    m
}

#[test]
fn model_constants_round_trip() {
    let m = model(1.0, 4.0, 1.2, 0.25, 1.0);
    let mut c = KsfSpeedConstants::default();
    let mut flag = true;
    unsafe {
        assert_eq!(ksf_model_speed_constants(m, &mut c), KsfStatus::Ok);
        assert_eq!(ksf_model_hypothesis_h(m, &mut flag), KsfStatus::Ok);
        ksf_model_free(m);
    }
    assert!((c.c_star - 193.0 / 42.0).abs() < 1e-12);
    assert!((c.a_star - 7.0 / 6.0).abs() < 1e-12);
    assert!(!flag);
}

#[test]
fn errors_carry_status_and_message() {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { ksf_model_new(0.0, -1.0, 1.0, 1.0, 1.0, &mut m) }, KsfStatus::InvalidArgument);
    assert!(m.is_null());
    assert!(last_error().contains('a'));

    let m = model(2.0, 1.0, 1.0, 1.0, 1.0);
    let mut c = KsfSpeedConstants::default();
    assert_eq!(unsafe { ksf_model_speed_constants(m, &mut c) }, KsfStatus::Hypothesis);
    assert_eq!(unsafe { ksf_model_c_kappa(m, 0.0, &mut 0.0) }, KsfStatus::InvalidArgument);
    assert_eq!(unsafe { ksf_model_c_kappa(ptr::null(), 1.0, &mut 0.0) }, KsfStatus::NullPointer);
    assert!(last_error().contains("model"));
    unsafe { ksf_model_free(m) };
    unsafe { ksf_model_free(ptr::null_mut()) };
}

#[test]
fn kernel_matches_constant_solution() {
    // u = 1 with both tails continued: v = mu / lambda exactly.
    let m = model(0.5, 1.0, 1.0, 4.0, 2.0);
    let n = 201;
    let u = vec![1.0; n];
    let mut v = vec![0.0; n];
    let mut v_x = vec![1.0; n];
    let status = unsafe { ksf_psi_fast(m, 10.0, u.as_ptr(), n, KsfTail::ConstantBoth as i32, v.as_mut_ptr(), v_x.as_mut_ptr()) };
    assert_eq!(status, KsfStatus::Ok);
    assert!(v.iter().all(|&x| (x - 0.5).abs() < 1e-12));
    assert!(v_x.iter().all(|&x| x.abs() < 1e-12));
    assert_eq!(unsafe { ksf_psi_fast(m, 10.0, u.as_ptr(), n, 7, v.as_mut_ptr(), ptr::null_mut()) }, KsfStatus::InvalidArgument);
    unsafe { ksf_model_free(m) };
}

#[test]
fn simulation_relaxes_to_equilibrium() {
    let m = model(0.5, 1.0, 1.0, 1.0, 1.0);
    let n = 101;
    let u0 = vec![0.3; n];
    let mut sim = ptr::null_mut();
    unsafe {
        let s = ksf_simulation_new(m, 10.0, u0.as_ptr(), n, 0.01, KsfScheme::Imex as i32, KsfTail::ConstantBoth as i32, &mut sim);
        assert_eq!(s, KsfStatus::Ok);
        assert_eq!(ksf_simulation_advance(sim, 20.0), KsfStatus::Ok);
        let mut t = 0.0;
        ksf_simulation_time(sim, &mut t);
        assert_eq!(t, 20.0);
        let mut u = vec![0.0; n];
        assert_eq!(ksf_simulation_copy(sim, u.as_mut_ptr(), ptr::null_mut(), ptr::null_mut(), n), KsfStatus::Ok);
        assert!(u.iter().all(|&x| (x - 1.0).abs() < 1e-6));
        assert_eq!(ksf_simulation_copy(sim, u.as_mut_ptr(), ptr::null_mut(), ptr::null_mut(), n - 1), KsfStatus::BufferTooSmall);
        assert_eq!(ksf_simulation_advance(sim, 5.0), KsfStatus::InvalidArgument);
        ksf_simulation_free(sim);
        ksf_model_free(m);
    }
}

#[test]
fn negative_initial_data_is_refused() {
    let m = model(0.5, 1.0, 1.0, 1.0, 1.0);
    let u0 = [0.1, -0.5, 0.1, 0.1];
    let mut sim = ptr::null_mut();
    let s = unsafe { ksf_simulation_new(m, 1.0, u0.as_ptr(), 4, 0.01, 0, 0, &mut sim) };
    assert_eq!(s, KsfStatus::InvalidArgument);
    assert!(sim.is_null());
    unsafe { ksf_model_free(m) };
}

#[test]
fn wave_profile_is_exposed() {
    let m = model(0.5, 1.0, 1.0, 1.0, 1.0);
    let mut w = ptr::null_mut();
    unsafe {
        assert_eq!(ksf_wave_new(m, 0.5, 80.0, 0.1, &mut w), KsfStatus::Ok);
        let mut n = 0;
        ksf_wave_len(w, &mut n);
        let mut x = vec![0.0; n];
        let mut u = vec![0.0; n];
        assert_eq!(ksf_wave_copy(w, x.as_mut_ptr(), u.as_mut_ptr(), ptr::null_mut(), ptr::null_mut(), n), KsfStatus::Ok);
        let mut d = KsfWaveDiagnostics::default();
        assert_eq!(ksf_wave_diagnostics(w, &mut d), KsfStatus::Ok);
        assert!((d.speed - 2.5).abs() < 1e-2);
        assert!(d.outer_iterations <= 50);
        assert!((u[0] - 1.0).abs() < 1e-2);
        assert!(u.windows(2).all(|p| p[1] <= p[0] + 1e-7));
        assert_eq!(x[0], -80.0);
        ksf_wave_free(w);
        ksf_model_free(m);
    }
}

#[test]
fn scenario_report_from_text() {
    let text = CString::new(
        "kind = \"kernel-selftest\"\n[model]\nchi = 0.5\na = 1.0\nb = 1.0\nlambda = 1.0\nmu = 1.0\n[analysis]\nseed = 7\nselftest_fields = 5\n",
    )
    .unwrap();
    let mut r = ptr::null_mut();
    unsafe {
        assert_eq!(ksf_scenario_run(text.as_ptr(), ptr::null(), ptr::null(), false, &mut r), KsfStatus::Ok, "{}", last_error());
        let mut passed = false;
        ksf_report_passed(r, &mut passed);
        assert!(passed);
        let body = CStr::from_ptr(ksf_report_text(r)).to_string_lossy().into_owned();
        assert!(body.contains("kernel-selftest"));
        let missing = CString::new("no_such_value").unwrap();
        assert_eq!(ksf_report_measurement(r, missing.as_ptr(), &mut 0.0), KsfStatus::InvalidArgument);
        ksf_report_free(r);
    }

    let bad = CString::new("kind = \"speed\"\nbogus = 1\n").unwrap();
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { ksf_scenario_run(bad.as_ptr(), ptr::null(), ptr::null(), false, &mut r) }, KsfStatus::Config);
    assert!(r.is_null());
}

#[test]
fn header_is_current() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/ksfront.h")).unwrap();
    for name in ["ksf_model_new", "ksf_psi_fast", "ksf_simulation_advance", "ksf_wave_copy", "ksf_scenario_run", "KSF_STATUS_PANIC"] {
        assert!(header.contains(name), "{name} missing from header");
    }
}

/// Compile a small C program against the header and the shared library.
#[test]
fn c_program_links_and_runs() {
    let Some(cc) = ["cc", "gcc", "clang"].into_iter().find(|c| Command::new(c).arg("--version").output().is_ok()) else {
        eprintln!("no C compiler found, skipping");
        return;
    };
    let exe = std::env::current_exe().unwrap();
    let lib_dir = exe.parent().and_then(|d| d.parent()).unwrap().to_path_buf();
    let so = lib_dir.join("libksfront_ffi.so");
    if !so.exists() {
        eprintln!("{} not built, skipping", so.display());
        return;
    }
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let tmp = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    let src = tmp.join("smoke.c");
    let bin = tmp.join("smoke");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "ksfront.h"
int main(void) {
    KsfModel *m = NULL;
    if (ksf_model_new(0.1, 4.0, 1.0, 1.0, 1.0, &m) != KSF_STATUS_OK) return 1;
    KsfSpeedConstants c;
    if (ksf_model_speed_constants(m, &c) != KSF_STATUS_OK) return 2;
    ksf_model_free(m);
    if (ksf_model_new(0.0, 0.0, 1.0, 1.0, 1.0, &m) != KSF_STATUS_INVALID_ARGUMENT) return 3;
    printf("%s %.12f %s\n", ksf_version(), c.c_star_star, ksf_last_error_message() ? "err" : "none");
    return 0;
}
"#,
    )
    .unwrap();
    let status = Command::new(cc)
        .arg(&src)
        .arg("-I")
        .arg(manifest.join("include"))
        .arg("-L")
        .arg(&lib_dir)
        .arg(format!("-Wl,-rpath,{}", lib_dir.display()))
        .arg("-lksfront_ffi")
        .arg("-o")
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success());
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status);
    let stdout = String::from_utf8(run.stdout).unwrap();
    assert!(stdout.contains("5.000000000000 err"), "{stdout}");
}
