//! C interface to the `imexlab` analysis routines.
//!
//! Tableaux are opaque handles created by [`imex_tableau_builtin`] or
//! [`imex_tableau_parse`] and released with [`imex_tableau_free`]. Every
//! fallible call returns an [`ImexStatus`]; on failure the message is
//! available from [`imex_last_error`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use imexlab::linear::{amplification, locate_dissipativity_landmarks, stability_value, z_left, Stencil, ZLeft};
use imexlab::monotonicity::{am_at_point, radius_implicit_gamma};
use imexlab::tableau::{builtin_by_name, parse_tableau, AdditiveTableau};
use imexlab::Error;
use num_complex::Complex64;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImexStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    UnknownScheme = 3,
    InvalidArgument = 4,
    Parse = 5,
    Numerical = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImexStencil {
    ThreePoint = 0,
    FourthOrder = 1,
}

impl From<ImexStencil> for Stencil {
    fn from(s: ImexStencil) -> Self {
        match s {
            ImexStencil::ThreePoint => Stencil::ThreePoint,
            ImexStencil::FourthOrder => Stencil::FourthOrder,
        }
    }
}

/// Opaque additive tableau. Plain methods are stored paired with themselves.
pub struct ImexTableau {
    inner: AdditiveTableau,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = CString::new(msg.into().replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(s));
}

fn status_of(e: &Error) -> ImexStatus {
    match e {
        Error::UnknownScheme(_) => ImexStatus::UnknownScheme,
        Error::Parse { .. } | Error::InvalidTableau(_) => ImexStatus::Parse,
        e if e.is_numerical() => ImexStatus::Numerical,
        _ => ImexStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), ImexStatus>) -> ImexStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ImexStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            ImexStatus::Panic
        }
    }
}

fn fail(e: Error) -> ImexStatus {
    set_error(e.to_string());
    status_of(&e)
}

fn null(what: &str) -> ImexStatus {
    set_error(format!("{what} is NULL"));
    ImexStatus::NullPointer
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, ImexStatus> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        ImexStatus::InvalidUtf8
    })
}

unsafe fn handle<'a>(t: *const ImexTableau) -> Result<&'a AdditiveTableau, ImexStatus> {
    t.as_ref().map(|h| &h.inner).ok_or_else(|| null("tableau"))
}

unsafe fn write<T>(out: *mut T, v: T, what: &str) -> Result<(), ImexStatus> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(v);
    Ok(())
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next call into the library from this thread.
#[no_mangle]
pub extern "C" fn imex_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Create a built-in tableau. Pass NaN for `gamma` to use the default;
/// only `imex_ssp2_222` accepts another value.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn imex_tableau_builtin(name: *const c_char, gamma: f64, out: *mut *mut ImexTableau) -> ImexStatus {
    guard(|| {
        let name = read_str(name, "name")?;
        let g = (!gamma.is_nan()).then_some(gamma);
        let m = builtin_by_name(name, g).map_err(fail)?;
        let h = Box::into_raw(Box::new(ImexTableau { inner: m.to_additive() }));
        write(out, h, "out").inspect_err(|_| drop(Box::from_raw(h)))
    })
}

/// Parse a tableau in the text format written by [`imex_tableau_to_string`].
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn imex_tableau_parse(text: *const c_char, out: *mut *mut ImexTableau) -> ImexStatus {
    guard(|| {
        let text = read_str(text, "text")?;
        let t = parse_tableau(text).map_err(fail)?;
        let h = Box::into_raw(Box::new(ImexTableau { inner: t }));
        write(out, h, "out").inspect_err(|_| drop(Box::from_raw(h)))
    })
}

/// Release a tableau. NULL is ignored.
///
/// # Safety
/// `t` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn imex_tableau_free(t: *mut ImexTableau) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Number of stages, 0 for NULL.
///
/// # Safety
/// `t` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn imex_tableau_stages(t: *const ImexTableau) -> usize {
    t.as_ref().map_or(0, |h| h.inner.stages())
}

/// Text form of the tableau; release with [`imex_string_free`].
///
/// # Safety
/// `t` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn imex_tableau_to_string(t: *const ImexTableau, out: *mut *mut c_char) -> ImexStatus {
    guard(|| {
        let s = CString::new(handle(t)?.to_file_string()).map_err(|_| fail(Error::InvalidArgument("NUL in output".into())))?;
        let p = s.into_raw();
        write(out, p, "out").inspect_err(|_| drop(CString::from_raw(p)))
    })
}

/// # Safety
/// `s` must be NULL or come from [`imex_tableau_to_string`].
#[no_mangle]
pub unsafe extern "C" fn imex_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// `R(z)` on the split test equation: `Re z` feeds the implicit part,
/// `Im z` the explicit one. A pole gives an infinite modulus.
///
/// # Safety
/// `t` must be a live handle; `out_re`, `out_im` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn imex_stability_value(
    t: *const ImexTableau,
    re: f64,
    im: f64,
    out_re: *mut f64,
    out_im: *mut f64,
) -> ImexStatus {
    guard(|| {
        let r = stability_value(handle(t)?, Complex64::new(re, im));
        write(out_re, r.re, "out_re")?;
        write(out_im, r.im, "out_im")
    })
}

/// Left end of the real stability interval; `*unbounded` is set when |R| < 1
/// out to -1e6, in which case `*out` is -infinity.
///
/// # Safety
/// `t` must be a live handle; `out`, `unbounded` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn imex_z_left(t: *const ImexTableau, out: *mut f64, unbounded: *mut bool) -> ImexStatus {
    guard(|| {
        let z = z_left(handle(t)?);
        write(unbounded, z == ZLeft::Unbounded, "unbounded")?;
        write(out, z.value().unwrap_or(f64::NEG_INFINITY), "out")
    })
}

/// `g(θ, μ)` of the implicit part with the given stencil.
///
/// # Safety
/// `t` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn imex_amplification(
    t: *const ImexTableau,
    stencil: ImexStencil,
    theta: f64,
    mu: f64,
    out: *mut f64,
) -> ImexStatus {
    guard(|| {
        let g = amplification(handle(t)?.implicit_part(), stencil.into(), theta, mu);
        write(out, g, "out")
    })
}

/// First zero and first unit-modulus crossing of `g(π, ·)` of the implicit
/// part; NaN where none exists up to μ = 1e3.
///
/// # Safety
/// `t` must be a live handle; both outputs valid pointers.
#[no_mangle]
pub unsafe extern "C" fn imex_dissipativity_landmarks(
    t: *const ImexTableau,
    stencil: ImexStencil,
    first_zero: *mut f64,
    unit_modulus: *mut f64,
) -> ImexStatus {
    guard(|| {
        let lm = locate_dissipativity_landmarks(handle(t)?.implicit_part(), stencil.into());
        write(first_zero, lm.first_zero.unwrap_or(f64::NAN), "first_zero")?;
        write(unit_modulus, lm.unit_modulus.unwrap_or(f64::NAN), "unit_modulus")
    })
}

/// Absolute monotonicity of the pair at `(r, r̃)`.
///
/// # Safety
/// `t` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn imex_am_at_point(t: *const ImexTableau, r: f64, rtilde: f64, out: *mut bool) -> ImexStatus {
    guard(|| {
        if !(r >= 0.0 && rtilde >= 0.0) {
            return Err(fail(Error::InvalidArgument(format!("r and rtilde must be nonnegative, got {r}, {rtilde}"))));
        }
        write(out, am_at_point(handle(t)?, r, rtilde), "out")
    })
}

/// `R(Ã)` of the `imex_ssp2_222` family.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn imex_radius_implicit_gamma(gamma: f64, out: *mut f64) -> ImexStatus {
    guard(|| write(out, radius_implicit_gamma(gamma).map_err(fail)?, "out"))
}
