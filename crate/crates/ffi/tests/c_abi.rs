use std::ffi::{CStr, CString};
use std::ptr;

use abscissa_ffi::*;

fn last_error() -> String {
    let p = abscissa_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn parse(text: &str, n: usize) -> *mut AbscissaProblem {
    let c = CString::new(text).unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { abscissa_problem_parse(c.as_ptr(), n, &mut h) }, AbscissaStatus::Ok);
    h
}

#[test]
fn oracle_through_the_abi() {
    let h = parse("s^2 + 2*q*s + 1 - 2*q", 1);
    unsafe {
        assert_eq!(abscissa_problem_num_params(h), 1);
        let mut v = f64::NAN;
        assert_eq!(abscissa_oracle_abscissa(h, [-1.0].as_ptr(), 1, &mut v), AbscissaStatus::Ok);
        assert!((v - 1.0).abs() < 1e-12);
        assert_eq!(abscissa_oracle_min_realpart(h, [0.5].as_ptr(), 1, &mut v), AbscissaStatus::Ok);
        assert!((v + 1.0).abs() < 1e-12);
        assert_eq!(
            abscissa_oracle_abscissa(h, [0.0, 0.0].as_ptr(), 2, &mut v),
            AbscissaStatus::InvalidInput
        );
        assert!(last_error().contains("2 coordinates"));
        abscissa_problem_free(h);
    }
}

#[test]
fn upper_bound_through_the_abi() {
    let h = parse("s + q", 1);
    unsafe {
        let mut r = ptr::null_mut();
        let st = abscissa_solve(h, AbscissaMethod::Upper, 1, 0, 0.0, 0.0, &mut r);
        assert_eq!(st, AbscissaStatus::Ok);
        let mut obj = f64::NAN;
        assert_eq!(abscissa_result_objective(r, &mut obj), AbscissaStatus::Ok);
        assert!(obj.abs() < 1e-6, "{obj}");
        let mut v = f64::NAN;
        assert_eq!(abscissa_result_eval(r, [0.25].as_ptr(), 1, &mut v), AbscissaStatus::Ok);
        assert!((v + 0.25).abs() < 1e-6);
        let mut res = f64::NAN;
        assert_eq!(abscissa_result_identity_residual(r, &mut res), AbscissaStatus::Ok);
        assert!(res <= 1e-6);
        let mut json = ptr::null_mut();
        assert_eq!(abscissa_result_to_json(r, &mut json), AbscissaStatus::Ok);
        let text = CStr::from_ptr(json).to_str().unwrap().to_owned();
        abscissa_string_free(json);
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(value["method"], "Upper");
        abscissa_result_free(r);
        abscissa_problem_free(h);
    }
}

#[test]
fn errors_map_to_codes() {
    unsafe {
        let mut h = ptr::null_mut();
        let bad = CString::new("s^2 + + q").unwrap();
        assert_eq!(abscissa_problem_parse(bad.as_ptr(), 1, &mut h), AbscissaStatus::ParseError);
        assert!(h.is_null());
        assert_eq!(abscissa_problem_parse(ptr::null(), 1, &mut h), AbscissaStatus::NullPointer);
        let json = CString::new("{\"name\": 1}").unwrap();
        assert_eq!(abscissa_problem_from_json(json.as_ptr(), &mut h), AbscissaStatus::ParseError);

        let h = parse("s^2 + 2*q*s + 1 - 2*q", 1);
        let mut r = ptr::null_mut();
        // Below the minimal level.
        assert_eq!(
            abscissa_solve(h, AbscissaMethod::Upper, 0, 0, 0.0, 0.0, &mut r),
            AbscissaStatus::InvalidInput
        );
        assert!(last_error().contains("minimal level"));
        // No Hermite matrix on a parsed problem.
        assert_eq!(
            abscissa_solve(h, AbscissaMethod::Hermite, 2, 0, 0.0, 0.0, &mut r),
            AbscissaStatus::InvalidInput
        );
        assert!(r.is_null());
        abscissa_problem_free(h);

        // Freeing null is a no-op.
        abscissa_problem_free(ptr::null_mut());
        abscissa_result_free(ptr::null_mut());
        abscissa_string_free(ptr::null_mut());
    }
}

#[test]
fn hermite_problem_from_json() {
    let json = CString::new(
        r#"{"name": "h", "n": 1, "m": 2, "coefficients": ["1 - 2*q1", "2*q1"],
            "hermite_matrix": [["4*q1 - 8*q1^2", "0"], ["0", "4*q1"]]}"#,
    )
    .unwrap();
    unsafe {
        let mut h = ptr::null_mut();
        assert_eq!(abscissa_problem_from_json(json.as_ptr(), &mut h), AbscissaStatus::Ok);
        let mut r = ptr::null_mut();
        assert_eq!(abscissa_solve(h, AbscissaMethod::Hermite, 2, 0, 0.0, 0.0, &mut r), AbscissaStatus::Ok);
        let mut v = f64::NAN;
        assert_eq!(abscissa_result_eval(r, [0.25].as_ptr(), 1, &mut v), AbscissaStatus::Ok);
        assert!(v > 0.0, "{v}");
        abscissa_result_free(r);
        abscissa_problem_free(h);
    }
}

#[test]
fn last_error_is_per_thread() {
    let mut h = ptr::null_mut();
    unsafe { abscissa_problem_parse(ptr::null(), 1, &mut h) };
    std::thread::spawn(|| assert!(abscissa_last_error().is_null())).join().unwrap();
    assert!(last_error().contains("null"));
}

#[test]
fn header_is_valid_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/abscissa.h");
    let text = std::fs::read_to_string(header).unwrap();
    for name in ["abscissa_solve", "abscissa_last_error", "ABSCISSA_STATUS_SOLVER_FAILED", "AbscissaResult"] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let Ok(out) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c", header])
        .output()
    else {
        eprintln!("no C compiler; syntax check skipped");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
