//! C ABI over `abscissa-core`.
//!
//! Problems and results are opaque heap handles released with their
//! `_free` functions. Every call returns an [`AbscissaStatus`]; on failure
//! `abscissa_last_error` gives a message for the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use abscissa_core::cli::{run_method, MethodArg, ProblemFile, RunResult};
use abscissa_core::hierarchy::Certificate;
use abscissa_core::oracle::{abscissa_oracle, min_realpart_oracle};
use abscissa_core::poly::{MultiPoly, ParamPolynomial};
use abscissa_core::sdp::SolverConfig;
use abscissa_core::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AbscissaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    InvalidInput = 4,
    SolverFailed = 5,
    CertificateRejected = 6,
    Io = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AbscissaMethod {
    Upper = 0,
    LowerEsf = 1,
    LowerGl = 2,
    NaiveLower = 3,
    Hermite = 4,
}

impl From<AbscissaMethod> for MethodArg {
    fn from(m: AbscissaMethod) -> Self {
        match m {
            AbscissaMethod::Upper => MethodArg::Upper,
            AbscissaMethod::LowerEsf => MethodArg::LowerEsf,
            AbscissaMethod::LowerGl => MethodArg::LowerGl,
            AbscissaMethod::NaiveLower => MethodArg::NaiveLower,
            AbscissaMethod::Hermite => MethodArg::Hermite,
        }
    }
}

/// A parameterized polynomial, optionally with a Hermite matrix.
pub struct AbscissaProblem {
    name: String,
    poly: ParamPolynomial,
    hermite: Option<Vec<Vec<MultiPoly>>>,
}

/// A solved approximation with its certificate.
pub struct AbscissaResult {
    name: String,
    cert: Certificate,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> AbscissaStatus {
    match e {
        Error::Parse { .. } | Error::Json(_) => AbscissaStatus::ParseError,
        Error::SolverFailed { .. } | Error::Stage1Failed(_) => AbscissaStatus::SolverFailed,
        Error::CertificateResidual { .. } => AbscissaStatus::CertificateRejected,
        Error::Io(_) => AbscissaStatus::Io,
        _ => AbscissaStatus::InvalidInput,
    }
}

/// Runs `f`, turning errors and panics into a status and a stored message.
fn guard<F>(f: F) -> AbscissaStatus
where
    F: FnOnce() -> Result<(), (AbscissaStatus, String)>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AbscissaStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            AbscissaStatus::Panic
        }
    }
}

fn core_err(e: Error) -> (AbscissaStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (AbscissaStatus, String) {
    (AbscissaStatus::NullPointer, format!("{what} is null"))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (AbscissaStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (AbscissaStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn read_point<'a>(q: *const f64, len: usize, n: usize) -> Result<&'a [f64], (AbscissaStatus, String)> {
    if q.is_null() {
        return Err(null("q"));
    }
    if len != n {
        return Err((
            AbscissaStatus::InvalidInput,
            format!("point has {len} coordinates, problem has {n} parameters"),
        ));
    }
    Ok(std::slice::from_raw_parts(q, len))
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn abscissa_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// Parses `s^m + ...` with parameters `q1..qn` into a new problem.
///
/// # Safety
/// `text` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn abscissa_problem_parse(
    text: *const c_char,
    n: usize,
    out: *mut *mut AbscissaProblem,
) -> AbscissaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = read_str(text, "text")?;
        let poly = ParamPolynomial::parse(text, n).map_err(core_err)?;
        *out = Box::into_raw(Box::new(AbscissaProblem {
            name: "problem".into(),
            poly,
            hermite: None,
        }));
        Ok(())
    })
}

/// Builds a problem from the JSON problem-file format.
///
/// # Safety
/// `json` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn abscissa_problem_from_json(
    json: *const c_char,
    out: *mut *mut AbscissaProblem,
) -> AbscissaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let file: ProblemFile = serde_json::from_str(read_str(json, "json")?)
            .map_err(|e| core_err(Error::Json(e)))?;
        let poly = file.polynomial().map_err(core_err)?;
        let hermite = file.hermite().map_err(core_err)?;
        *out = Box::into_raw(Box::new(AbscissaProblem {
            name: file.name,
            poly,
            hermite,
        }));
        Ok(())
    })
}

/// # Safety
/// `problem` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn abscissa_problem_free(problem: *mut AbscissaProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Number of parameters.
///
/// # Safety
/// `problem` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn abscissa_problem_num_params(problem: *const AbscissaProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.poly.n())
}

/// Largest real part of the roots at `q`.
///
/// # Safety
/// `problem` must be live, `q` must point to `len` doubles, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn abscissa_oracle_abscissa(
    problem: *const AbscissaProblem,
    q: *const f64,
    len: usize,
    out: *mut f64,
) -> AbscissaStatus {
    guard(|| {
        let p = problem.as_ref().ok_or_else(|| null("problem"))?;
        let q = read_point(q, len, p.poly.n())?;
        *out.as_mut().ok_or_else(|| null("out"))? = abscissa_oracle(&p.poly, q);
        Ok(())
    })
}

/// Smallest real part of the roots at `q`.
///
/// # Safety
/// As for [`abscissa_oracle_abscissa`].
#[no_mangle]
pub unsafe extern "C" fn abscissa_oracle_min_realpart(
    problem: *const AbscissaProblem,
    q: *const f64,
    len: usize,
    out: *mut f64,
) -> AbscissaStatus {
    guard(|| {
        let p = problem.as_ref().ok_or_else(|| null("problem"))?;
        let q = read_point(q, len, p.poly.n())?;
        *out.as_mut().ok_or_else(|| null("out"))? = min_realpart_oracle(&p.poly, q);
        Ok(())
    })
}

/// Solves one level of a hierarchy. `dprime` is read only by the
/// Gauss-Lucas method. Non-positive tolerances select the defaults.
///
/// # Safety
/// `problem` must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn abscissa_solve(
    problem: *const AbscissaProblem,
    method: AbscissaMethod,
    d: usize,
    dprime: usize,
    gap_tol: f64,
    feas_tol: f64,
    out: *mut *mut AbscissaResult,
) -> AbscissaStatus {
    guard(|| {
        let p = problem.as_ref().ok_or_else(|| null("problem"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let mut cfg = SolverConfig::default();
        if gap_tol > 0.0 {
            cfg.gap_tol = gap_tol;
        }
        if feas_tol > 0.0 {
            cfg.feas_tol = feas_tol;
        }
        let dp = (method == AbscissaMethod::LowerGl).then_some(dprime);
        let cert = run_method(method.into(), &p.poly, p.hermite.as_deref(), d, dp, &cfg)
            .map_err(core_err)?;
        *out = Box::into_raw(Box::new(AbscissaResult {
            name: p.name.clone(),
            cert,
        }));
        Ok(())
    })
}

/// # Safety
/// `result` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn abscissa_result_free(result: *mut AbscissaResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Integral of the approximation over the parameter box.
///
/// # Safety
/// `result` must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn abscissa_result_objective(
    result: *const AbscissaResult,
    out: *mut f64,
) -> AbscissaStatus {
    guard(|| {
        let r = result.as_ref().ok_or_else(|| null("result"))?;
        *out.as_mut().ok_or_else(|| null("out"))? = r.cert.approx.objective;
        Ok(())
    })
}

/// Value of the approximating polynomial at `q`.
///
/// # Safety
/// `result` must be live, `q` must point to `len` doubles, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn abscissa_result_eval(
    result: *const AbscissaResult,
    q: *const f64,
    len: usize,
    out: *mut f64,
) -> AbscissaStatus {
    guard(|| {
        let r = result.as_ref().ok_or_else(|| null("result"))?;
        let q = read_point(q, len, r.cert.approx.n())?;
        *out.as_mut().ok_or_else(|| null("out"))? = r.cert.approx.eval(q);
        Ok(())
    })
}

/// Largest coefficient of the certificate identity's residual.
///
/// # Safety
/// `result` must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn abscissa_result_identity_residual(
    result: *const AbscissaResult,
    out: *mut f64,
) -> AbscissaStatus {
    guard(|| {
        let r = result.as_ref().ok_or_else(|| null("result"))?;
        *out.as_mut().ok_or_else(|| null("out"))? = r.cert.identity_residual;
        Ok(())
    })
}

/// The result in the CLI's JSON format. Release with [`abscissa_string_free`].
///
/// # Safety
/// `result` must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn abscissa_result_to_json(
    result: *const AbscissaResult,
    out: *mut *mut c_char,
) -> AbscissaStatus {
    guard(|| {
        let r = result.as_ref().ok_or_else(|| null("result"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let rr = RunResult::from_certificate(&r.name, &r.cert);
        let text = serde_json::to_string(&rr).map_err(|e| core_err(Error::Json(e)))?;
        *out = CString::new(text).expect("JSON has no nul bytes").into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn abscissa_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
