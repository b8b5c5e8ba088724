//! C ABI over the `subdiff` library.
//!
//! Objects cross the boundary as opaque handles created by `*_new` style
//! functions and released by the matching `*_free`. Every fallible call
//! returns a [`SubdiffStatus`]; on failure [`subdiff_last_error`] describes the
//! error on the calling thread. Panics are caught and reported as
//! [`SubdiffStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use subdiff::integrand::{integral_value, integrated_gradient, Params};
use subdiff::measure_space::{geometric_grid_unit_interval, make_finite_atoms, uniform_grid_unit_interval};
use subdiff::scenario::{execute, parse_scenario};
use subdiff::{catalog, Error, Integrand, MeasureSpace};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubdiffStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Config = 4,
    Io = 5,
    Numerical = 6,
    Panic = 7,
}

/// A discretized measure space.
pub struct SubdiffSpace(MeasureSpace);

/// A catalog integrand.
pub struct SubdiffIntegrand(Arc<dyn Integrand>);

/// The JSON report of a scenario run.
pub struct SubdiffReport {
    json: CString,
    pass: bool,
    failed_expectations: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let c = CString::new(msg.into().replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SubdiffStatus {
    match e {
        Error::Config { .. } | Error::UnknownIntegrand(_) | Error::BadParameter { .. } => SubdiffStatus::Config,
        Error::Io { .. } => SubdiffStatus::Io,
        Error::NanValue { .. } | Error::InfiniteValue { .. } | Error::EmptySubdifferential => SubdiffStatus::Numerical,
        _ => SubdiffStatus::InvalidArgument,
    }
}

struct Failure(SubdiffStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(SubdiffStatus::NullPointer, format!("`{what}` is NULL"))
}

/// Runs `body`, records any failure and converts it to a status.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> SubdiffStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => SubdiffStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            SubdiffStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(SubdiffStatus::InvalidUtf8, format!("`{what}` is not valid UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn put<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn subdiff_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL after a success.
/// The pointer stays valid until the next call into this library on the
/// same thread.
#[no_mangle]
pub extern "C" fn subdiff_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Space with atoms `t0, t1, ...` carrying `weights[0..n]`.
///
/// # Safety
/// `weights` must point to `n` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn subdiff_space_from_weights(weights: *const f64, n: usize, out: *mut *mut SubdiffSpace) -> SubdiffStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let w = slice_arg(weights, n, "weights")?;
        let pairs: Vec<(String, f64)> = w.iter().enumerate().map(|(i, v)| (format!("t{i}"), *v)).collect();
        put(out, SubdiffSpace(make_finite_atoms(&pairs)?));
        Ok(())
    })
}

/// Geometric grid of `]0, 1]` with `cells` cells shrinking by `ratio` toward 0.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn subdiff_space_geometric_grid(cells: usize, ratio: f64, out: *mut *mut SubdiffSpace) -> SubdiffStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        put(out, SubdiffSpace(geometric_grid_unit_interval(cells, ratio)?));
        Ok(())
    })
}

/// Uniform midpoint grid of `]0, 1]`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn subdiff_space_uniform_grid(cells: usize, out: *mut *mut SubdiffSpace) -> SubdiffStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        put(out, SubdiffSpace(uniform_grid_unit_interval(cells)?));
        Ok(())
    })
}

/// Number of atoms; 0 for NULL.
///
/// # Safety
/// `space` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn subdiff_space_len(space: *const SubdiffSpace) -> usize {
    space.as_ref().map_or(0, |s| s.0.len())
}

/// Sum of the atom weights; NaN for NULL.
///
/// # Safety
/// `space` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn subdiff_space_total_mass(space: *const SubdiffSpace) -> f64 {
    space.as_ref().map_or(f64::NAN, |s| s.0.total_mass())
}

/// # Safety
/// `space` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn subdiff_space_free(space: *mut SubdiffSpace) {
    if !space.is_null() {
        drop(Box::from_raw(space));
    }
}

/// Catalog integrand `name` with JSON object `params` (NULL for defaults).
///
/// # Safety
/// `name` and `params` must be NUL-terminated strings (`params` may be NULL);
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn subdiff_integrand_new(
    name: *const c_char,
    params: *const c_char,
    out: *mut *mut SubdiffIntegrand,
) -> SubdiffStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let name = str_arg(name, "name")?;
        let params = if params.is_null() {
            Params::new()
        } else {
            Params::from_json(str_arg(params, "params")?)?
        };
        put(out, SubdiffIntegrand(catalog(name, &params)?));
        Ok(())
    })
}

/// Dimension of the decision variable; 0 for NULL.
///
/// # Safety
/// `f` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn subdiff_integrand_dim(f: *const SubdiffIntegrand) -> usize {
    f.as_ref().map_or(0, |f| f.0.dim())
}

/// # Safety
/// `f` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn subdiff_integrand_free(f: *mut SubdiffIntegrand) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// `E_f(x)`, written to `out`; `+inf` when some positive-weight atom is infinite.
///
/// # Safety
/// Handles must be live, `x` must point to `dim` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn subdiff_integral_value(
    space: *const SubdiffSpace,
    f: *const SubdiffIntegrand,
    x: *const f64,
    dim: usize,
    out: *mut f64,
) -> SubdiffStatus {
    guard(|| {
        let space = space.as_ref().ok_or_else(|| null("space"))?;
        let f = f.as_ref().ok_or_else(|| null("integrand"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let x = slice_arg(x, dim, "x")?;
        *out = integral_value(&space.0, f.0.as_ref(), x)?.value.to_f64();
        Ok(())
    })
}

/// `Σ weight·∇f(t, x)` written to `grad[0..dim]`.
///
/// # Safety
/// Handles must be live; `x` and `grad` must point to `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn subdiff_integrated_gradient(
    space: *const SubdiffSpace,
    f: *const SubdiffIntegrand,
    x: *const f64,
    dim: usize,
    grad: *mut f64,
) -> SubdiffStatus {
    guard(|| {
        let space = space.as_ref().ok_or_else(|| null("space"))?;
        let f = f.as_ref().ok_or_else(|| null("integrand"))?;
        let x = slice_arg(x, dim, "x")?;
        if grad.is_null() && dim > 0 {
            return Err(null("grad"));
        }
        let g = integrated_gradient(&space.0, f.0.as_ref(), x)?;
        std::slice::from_raw_parts_mut(grad, dim).copy_from_slice(&g);
        Ok(())
    })
}

/// Parses and runs a scenario given as JSON text. Nothing is written to disk.
/// When `override_seed` is false the scenario's own seed is used.
///
/// # Safety
/// `config_json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn subdiff_run_scenario(
    config_json: *const c_char,
    seed: u64,
    override_seed: bool,
    out: *mut *mut SubdiffReport,
) -> SubdiffStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let sc = parse_scenario(str_arg(config_json, "config_json")?)?;
        let seed = if override_seed { seed } else { sc.seed };
        let (report, _) = execute(&sc, seed)?;
        let json = CString::new(report.render()).map_err(|e| Failure(SubdiffStatus::InvalidArgument, e.to_string()))?;
        put(
            out,
            SubdiffReport {
                json,
                pass: report.pass,
                failed_expectations: report.failed_expectations,
            },
        );
        Ok(())
    })
}

/// Report JSON, owned by the report; NULL for NULL.
///
/// # Safety
/// `report` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn subdiff_report_json(report: *const SubdiffReport) -> *const c_char {
    report.as_ref().map_or(std::ptr::null(), |r| r.json.as_ptr())
}

/// True when every expectation held.
///
/// # Safety
/// `report` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn subdiff_report_pass(report: *const SubdiffReport) -> bool {
    report.as_ref().is_some_and(|r| r.pass)
}

/// # Safety
/// `report` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn subdiff_report_failed_expectations(report: *const SubdiffReport) -> usize {
    report.as_ref().map_or(0, |r| r.failed_expectations)
}

/// # Safety
/// `report` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn subdiff_report_free(report: *mut SubdiffReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn errors_map_to_statuses() {
        assert_eq!(status_of(&Error::UnknownIntegrand("x".into())), SubdiffStatus::Config);
        assert_eq!(
            status_of(&Error::Io {
                path: "p".into(),
                reason: "r".into()
            }),
            SubdiffStatus::Io
        );
        assert_eq!(status_of(&Error::NanValue { tag: "t".into() }), SubdiffStatus::Numerical);
        assert_eq!(status_of(&Error::BadRatio(2.0)), SubdiffStatus::InvalidArgument);
    }

    #[test]
    fn panics_become_a_status() {
        let s = guard(|| panic!("boom"));
        assert_eq!(s, SubdiffStatus::Panic);
        let msg = unsafe { CStr::from_ptr(subdiff_last_error()) }.to_str().unwrap();
        assert!(msg.contains("boom"));
    }

    #[test]
    fn success_clears_the_last_error() {
        set_error("old");
        assert_eq!(guard(|| Ok(())), SubdiffStatus::Ok);
        assert!(subdiff_last_error().is_null());
    }
}
