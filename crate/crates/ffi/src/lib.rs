//! C ABI over `nharmonic`.
//!
//! Every entry point returns an [`NhStatus`]; results go through out
//! pointers, which are written only on success (except where documented).
//! On failure a message is available from [`nh_last_error`] on the calling
//! thread. Panics never cross the boundary: they become `NH_STATUS_PANIC`.
//!
//! Handles ([`NhMetric`], [`NhSolution`]) are opaque, owned by the caller
//! once returned, and released with the matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nharmonic::characteristic::{self, Bound};
use nharmonic::metric::{check_regular, Dimension, RadialMetric};
use nharmonic::radial::{self, RadialSolution};
use nharmonic::{energy, io, spherical, Error};

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NhStatus {
    Ok = 0,
    Domain = 1,
    NitscheViolation = 2,
    NonRegularMetric = 3,
    Unbounded = 4,
    Range = 5,
    Divergent = 6,
    Quadrature = 7,
    NoConvergence = 8,
    DegenerateJacobian = 9,
    NotSerializable = 10,
    Io = 11,
    NullPointer = 12,
    InvalidArgument = 13,
    BufferTooSmall = 14,
    Panic = 15,
}

/// Opaque radial metric.
pub struct NhMetric(RadialMetric);

/// Opaque solved radial profile.
pub struct NhSolution(RadialSolution);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

enum Failure {
    Lib(Error),
    Null(&'static str),
    Invalid(String),
    Buffer { needed: usize },
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn status_of(e: &Error) -> NhStatus {
    match e {
        Error::Domain(_) => NhStatus::Domain,
        Error::NitscheViolation { .. } => NhStatus::NitscheViolation,
        Error::NonRegularMetric { .. } => NhStatus::NonRegularMetric,
        Error::Unbounded(_) => NhStatus::Unbounded,
        Error::Range(_) => NhStatus::Range,
        Error::Divergent(_) => NhStatus::Divergent,
        Error::Quadrature { .. } => NhStatus::Quadrature,
        Error::NoConvergence { .. } => NhStatus::NoConvergence,
        Error::DegenerateJacobian(_) => NhStatus::DegenerateJacobian,
        Error::NotSerializable => NhStatus::NotSerializable,
        Error::Io(_) | Error::Json(_) | Error::Csv(_) => NhStatus::Io,
    }
}

fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> NhStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NhStatus::Ok,
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Null(name))) => {
            set_error(format!("null pointer: {name}"));
            NhStatus::NullPointer
        }
        Ok(Err(Failure::Invalid(msg))) => {
            set_error(msg);
            NhStatus::InvalidArgument
        }
        Ok(Err(Failure::Buffer { needed })) => {
            set_error(format!("buffer too small: need {needed} elements"));
            NhStatus::BufferTooSmall
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            NhStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(name))
}

unsafe fn write<T>(p: *mut T, name: &'static str, value: T) -> Result<(), Failure> {
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    p.write(value);
    Ok(())
}

fn check_out<T>(p: *mut T, name: &'static str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure::Null(name))
    } else {
        Ok(())
    }
}

fn dim(n: u32) -> Result<Dimension, Failure> {
    Ok(Dimension::new(n)?)
}

fn bound_value(b: Bound) -> f64 {
    b.finite().unwrap_or(f64::NEG_INFINITY)
}

/// Message of the last failed call on this thread, or NULL if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn nh_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn nh_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// `rho(s) = value` (`value > 0`).
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn nh_metric_constant(value: f64, out: *mut *mut NhMetric) -> NhStatus {
    guard(|| {
        check_out(out, "out")?;
        let m = RadialMetric::constant(value)?;
        write(out, "out", Box::into_raw(Box::new(NhMetric(m))))
    })
}

/// `rho(s) = s^nu`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn nh_metric_power(nu: f64, out: *mut *mut NhMetric) -> NhStatus {
    guard(|| {
        check_out(out, "out")?;
        let m = RadialMetric::power(nu)?;
        write(out, "out", Box::into_raw(Box::new(NhMetric(m))))
    })
}

/// Parse `constant`, `constant:<v>` or `power:<nu>`.
///
/// # Safety
/// `spec` must be a NUL-terminated string; `out` as in [`nh_metric_constant`].
#[no_mangle]
pub unsafe extern "C" fn nh_metric_parse(spec: *const c_char, out: *mut *mut NhMetric) -> NhStatus {
    guard(|| {
        check_out(out, "out")?;
        if spec.is_null() {
            return Err(Failure::Null("spec"));
        }
        let s = CStr::from_ptr(spec)
            .to_str()
            .map_err(|_| Failure::Invalid("metric spec is not UTF-8".into()))?;
        let m: RadialMetric = s.parse()?;
        write(out, "out", Box::into_raw(Box::new(NhMetric(m))))
    })
}

/// Release a metric. NULL is ignored.
///
/// # Safety
/// `metric` must come from an `nh_metric_*` constructor and not be used again.
#[no_mangle]
pub unsafe extern "C" fn nh_metric_free(metric: *mut NhMetric) {
    if !metric.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(metric))));
    }
}

/// `rho(s)`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn nh_metric_eval(metric: *const NhMetric, s: f64, out: *mut f64) -> NhStatus {
    guard(|| {
        let m = deref(metric, "metric")?;
        write(out, "out", m.0.eval(s))
    })
}

/// Whether `rho(s) s^n >= rho(1)` on `[1, r_star]`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn nh_check_regular(
    metric: *const NhMetric,
    n: u32,
    r_star: f64,
    regular: *mut bool,
) -> NhStatus {
    guard(|| {
        let m = deref(metric, "metric")?;
        let report = check_regular(&m.0, dim(n)?, r_star);
        write(regular, "regular", report.is_regular())
    })
}

/// `Phi(zeta)`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn nh_phi(zeta: f64, n: u32, out: *mut f64) -> NhStatus {
    guard(|| write(out, "out", characteristic::phi(zeta, dim(n)?)?))
}

/// `Psi(w)`, the inverse of `Phi` on `zeta >= 0`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn nh_psi(w: f64, n: u32, out: *mut f64) -> NhStatus {
    guard(|| write(out, "out", characteristic::psi(w, dim(n)?)?))
}

/// `kappa_n`; `NH_STATUS_UNBOUNDED` for `n = 3`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn nh_kappa(n: u32, out: *mut f64) -> NhStatus {
    guard(|| write(out, "out", characteristic::kappa(dim(n)?)?))
}

/// Admissible range of the characteristic constant; `c_min` is `-INFINITY`
/// when unbounded.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn nh_c_bounds(
    metric: *const NhMetric,
    n: u32,
    c_min: *mut f64,
    c_max: *mut f64,
) -> NhStatus {
    guard(|| {
        let m = deref(metric, "metric")?;
        check_out(c_min, "c_min")?;
        check_out(c_max, "c_max")?;
        let (lo, hi) = characteristic::c_bounds(&m.0, dim(n)?)?;
        write(c_min, "c_min", bound_value(lo))?;
        write(c_max, "c_max", hi)
    })
}

/// `R = H_c^{-1}(R_*)`, the domain radius mapped onto `r_star`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn nh_outer_radius(
    metric: *const NhMetric,
    n: u32,
    c: f64,
    r_star: f64,
    out: *mut f64,
) -> NhStatus {
    guard(|| {
        let m = deref(metric, "metric")?;
        write(out, "out", radial::outer_radius(c, r_star, &m.0, dim(n)?)?)
    })
}

/// Characteristic constant of the radial map `A(1, R) -> A(1, R_*)`.
/// On `NH_STATUS_NITSCHE_VIOLATION`, `min_r_star` (if not NULL) receives the
/// smallest admissible `R_*`, or NaN if unknown.
///
/// # Safety
/// `metric` and `c` must be valid; `min_r_star` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn nh_solve_c(
    metric: *const NhMetric,
    n: u32,
    big_r: f64,
    r_star: f64,
    c: *mut f64,
    min_r_star: *mut f64,
) -> NhStatus {
    guard(|| {
        let m = deref(metric, "metric")?;
        check_out(c, "c")?;
        match radial::solve_c(big_r, r_star, &m.0, dim(n)?) {
            Ok(cc) => write(c, "c", cc.c),
            Err(e) => {
                if let Error::NitscheViolation {
                    min_outer_image_radius,
                    ..
                } = &e
                {
                    if !min_r_star.is_null() {
                        min_r_star.write(min_outer_image_radius.unwrap_or(f64::NAN));
                    }
                }
                Err(e.into())
            }
        }
    })
}

/// Smallest admissible outer image radius for `A(1, R)`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn nh_nitsche_bound(
    metric: *const NhMetric,
    n: u32,
    big_r: f64,
    out: *mut f64,
) -> NhStatus {
    guard(|| {
        let m = deref(metric, "metric")?;
        write(out, "out", radial::nitsche_bound(big_r, &m.0, dim(n)?)?)
    })
}

/// Solve the radial profile with constant `c` onto `A(1, r_star)` on a grid
/// of `grid` cells (0 selects the default).
///
/// # Safety
/// `metric` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn nh_solve_profile(
    metric: *const NhMetric,
    n: u32,
    c: f64,
    r_star: f64,
    grid: usize,
    out: *mut *mut NhSolution,
) -> NhStatus {
    guard(|| {
        let m = deref(metric, "metric")?;
        check_out(out, "out")?;
        let grid = if grid == 0 { radial::DEFAULT_GRID } else { grid };
        let sol = radial::solve_profile(c, r_star, &m.0, dim(n)?, grid)?;
        write(out, "out", Box::into_raw(Box::new(NhSolution(sol))))
    })
}

/// Release a solution. NULL is ignored.
///
/// # Safety
/// `sol` must come from [`nh_solve_profile`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn nh_solution_free(sol: *mut NhSolution) {
    if !sol.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(sol))));
    }
}

/// `c`, `R` and `R_*` of a solution. Any out pointer may be NULL.
///
/// # Safety
/// `sol` must be valid.
#[no_mangle]
pub unsafe extern "C" fn nh_solution_info(
    sol: *const NhSolution,
    c: *mut f64,
    big_r: *mut f64,
    r_star: *mut f64,
) -> NhStatus {
    guard(|| {
        let s = &deref(sol, "sol")?.0;
        for (p, v) in [(c, s.c()), (big_r, s.outer_radius()), (r_star, s.image_outer_radius())] {
            if !p.is_null() {
                p.write(v);
            }
        }
        Ok(())
    })
}

/// `H(t)` and `H'(t)`; either out pointer may be NULL.
///
/// # Safety
/// `sol` must be valid.
#[no_mangle]
pub unsafe extern "C" fn nh_solution_eval(
    sol: *const NhSolution,
    t: f64,
    h: *mut f64,
    dh: *mut f64,
) -> NhStatus {
    guard(|| {
        let s = &deref(sol, "sol")?.0;
        if !(t >= 1.0 && t <= s.outer_radius()) {
            return Err(Failure::Invalid(format!("t = {t} outside [1, {}]", s.outer_radius())));
        }
        if !h.is_null() {
            h.write(s.eval(t));
        }
        if !dh.is_null() {
            dh.write(s.deriv(t));
        }
        Ok(())
    })
}

/// Number of grid nodes.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn nh_solution_grid_len(sol: *const NhSolution, len: *mut usize) -> NhStatus {
    guard(|| write(len, "len", deref(sol, "sol")?.0.grid_t().len()))
}

/// Copy the grid into `t` and `h` (each of capacity `cap`). Fails with
/// `NH_STATUS_BUFFER_TOO_SMALL` if `cap` is below the grid length.
///
/// # Safety
/// `t` and `h` must point to at least `cap` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn nh_solution_grid(
    sol: *const NhSolution,
    t: *mut f64,
    h: *mut f64,
    cap: usize,
) -> NhStatus {
    guard(|| {
        let s = &deref(sol, "sol")?.0;
        check_out(t, "t")?;
        check_out(h, "h")?;
        let len = s.grid_t().len();
        if cap < len {
            return Err(Failure::Buffer { needed: len });
        }
        ptr::copy_nonoverlapping(s.grid_t().as_ptr(), t, len);
        ptr::copy_nonoverlapping(s.grid_h().as_ptr(), h, len);
        Ok(())
    })
}

/// Energy of the solution and its sharp lower bound.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn nh_solution_energy(
    sol: *const NhSolution,
    energy: *mut f64,
    lower_bound: *mut f64,
) -> NhStatus {
    guard(|| {
        let s = &deref(sol, "sol")?.0;
        check_out(energy, "energy")?;
        check_out(lower_bound, "lower_bound")?;
        let r = energy::energy_report(s)?;
        write(energy, "energy", r.total)?;
        write(lower_bound, "lower_bound", r.lower_bound)
    })
}

/// Sweep the homothety family over `[1, lambda_max]` in `steps` steps.
/// `witness` receives the witness `lambda`, or NaN when none was found.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn nh_nonminimality(
    sol: *const NhSolution,
    lambda_max: f64,
    steps: usize,
    non_minimal: *mut bool,
    witness: *mut f64,
) -> NhStatus {
    guard(|| {
        let s = &deref(sol, "sol")?.0;
        check_out(non_minimal, "non_minimal")?;
        check_out(witness, "witness")?;
        let sweep = spherical::nonminimality_certificate(s, lambda_max, steps)?;
        write(non_minimal, "non_minimal", sweep.verdict == spherical::Verdict::NonMinimal)?;
        write(witness, "witness", sweep.witness_lambda.unwrap_or(f64::NAN))
    })
}

/// The solution as JSON. Release the string with [`nh_string_free`].
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn nh_solution_to_json(sol: *const NhSolution, out: *mut *mut c_char) -> NhStatus {
    guard(|| {
        let s = &deref(sol, "sol")?.0;
        check_out(out, "out")?;
        let json = io::to_json(s)?;
        let c = CString::new(json).map_err(|_| Failure::Invalid("NUL in JSON".into()))?;
        write(out, "out", c.into_raw())
    })
}

/// Release a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not be used again.
#[no_mangle]
pub unsafe extern "C" fn nh_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
