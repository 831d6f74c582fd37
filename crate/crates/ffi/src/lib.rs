//! C ABI over `nlqw`.
//!
//! Objects are opaque handles created by `nlqw_*_new`-style functions and
//! released by the matching `_free`. Every fallible call returns an
//! [`NlqwStatus`]; on failure `nlqw_last_error_message` describes the error
//! for the calling thread. Fields are exchanged as flat `f64` arrays with four
//! entries per site, `Re u_up, Im u_up, Re u_down, Im u_down`, from `x = -L` upward.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use nlqw::bound_state::{BoundStateFamily, FamilyConfig};
use nlqw::io::{load_snapshot, save_snapshot};
use nlqw::lattice::{LatticeGrid, SpinorField};
use nlqw::walk::{Monomial, Nonlinearity, Preset, Walk};
use nlqw::{Error, C64};

/// Result codes. `Ok` is zero.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NlqwStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    GridMismatch = 3,
    NoConvergence = 4,
    Precondition = 5,
    WrapContamination = 6,
    Io = 7,
    Format = 8,
    Numerical = 9,
    Panic = 10,
}

/// A walk `u -> U N(u)` on a fixed lattice.
pub struct NlqwWalk(Walk);

/// A two-component field on a lattice.
pub struct NlqwField(SpinorField);

/// The nonlinear bound-state family `z -> Phi[z]` on a window.
pub struct NlqwFamily(BoundStateFamily);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> NlqwStatus {
    match e {
        Error::GridMismatch { .. } => NlqwStatus::GridMismatch,
        Error::InvalidArgument(_) | Error::NonUnitaryCoin { .. } | Error::NonHermitian(_) | Error::Config { .. } => {
            NlqwStatus::InvalidArgument
        }
        Error::NoConvergence { .. } | Error::NotContracting { .. } | Error::InterpolationInaccurate(_) => {
            NlqwStatus::NoConvergence
        }
        Error::Precondition(_)
        | Error::OutOfRange { .. }
        | Error::InEssentialBand { .. }
        | Error::TailNotSmall { .. } => NlqwStatus::Precondition,
        Error::NoDiscreteEigenvalue(_) => NlqwStatus::Precondition,
        Error::WrapContamination { .. } => NlqwStatus::WrapContamination,
        Error::Io(_) | Error::Csv(_) => NlqwStatus::Io,
        Error::Format(_) => NlqwStatus::Format,
        Error::NearSingular(_) | Error::LinearAlgebra(_) => NlqwStatus::Numerical,
    }
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

/// Runs `f`, recording any error or panic for `nlqw_last_error_message`.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> NlqwStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NlqwStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            NlqwStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            NlqwStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn borrow_mut<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

unsafe fn out_ptr<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn str_arg<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|e| Failure::Lib(Error::InvalidArgument(format!("{what} is not UTF-8: {e}"))))
}

fn nonlinearity(c: f64, p: u32) -> Result<Nonlinearity, Error> {
    if c == 0.0 {
        return Ok(Nonlinearity::linear());
    }
    Ok(Nonlinearity::sigma3(Monomial::new(c, p)?))
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn nlqw_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn nlqw_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Walk for a named preset (`kls-origin`, `kls-smooth`, `free`) on `[-L, L)`
/// with nonlinearity `g(s) = c s^p` and `gamma = sigma_3`; `c = 0` is linear.
///
/// # Safety
/// `preset` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nlqw_walk_preset(
    preset: *const c_char,
    half_width: usize,
    c: f64,
    p: u32,
    out: *mut *mut NlqwWalk,
) -> NlqwStatus {
    guard(|| {
        let name = str_arg(preset, "preset")?;
        let coin = Preset::from_name(name)?.coin(LatticeGrid::new(half_width)?)?;
        out_ptr(out, NlqwWalk(Walk::new(coin, nonlinearity(c, p)?)))
    })
}

/// # Safety
/// `walk` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn nlqw_walk_free(walk: *mut NlqwWalk) {
    if !walk.is_null() {
        drop(Box::from_raw(walk));
    }
}

/// # Safety
/// `walk` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn nlqw_walk_half_width(walk: *const NlqwWalk, out: *mut usize) -> NlqwStatus {
    guard(|| {
        let w = borrow(walk, "walk")?;
        *borrow_mut(out, "out")? = w.0.grid().half_width();
        Ok(())
    })
}

/// One step `u <- U N(u)`, in place.
///
/// # Safety
/// `walk` and `field` must be valid handles.
#[no_mangle]
pub unsafe extern "C" fn nlqw_walk_step(walk: *const NlqwWalk, field: *mut NlqwField) -> NlqwStatus {
    guard(|| {
        let w = borrow(walk, "walk")?;
        let f = borrow_mut(field, "field")?;
        f.0 = w.0.step(&f.0)?;
        Ok(())
    })
}

/// `steps` double steps in place.
///
/// # Safety
/// `walk` and `field` must be valid handles.
#[no_mangle]
pub unsafe extern "C" fn nlqw_walk_double_steps(
    walk: *const NlqwWalk,
    field: *mut NlqwField,
    steps: usize,
) -> NlqwStatus {
    guard(|| {
        let w = borrow(walk, "walk")?;
        let f = borrow_mut(field, "field")?;
        for _ in 0..steps {
            f.0 = w.0.double_step(&f.0)?;
        }
        Ok(())
    })
}

/// Zero field on `[-L, L)`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nlqw_field_zeros(half_width: usize, out: *mut *mut NlqwField) -> NlqwStatus {
    guard(|| out_ptr(out, NlqwField(SpinorField::zeros(LatticeGrid::new(half_width)?))))
}

/// Field from `len = 8 L` doubles in the flat layout.
///
/// # Safety
/// `values` must point to `len` readable doubles and `out` be valid.
#[no_mangle]
pub unsafe extern "C" fn nlqw_field_from_values(
    half_width: usize,
    values: *const f64,
    len: usize,
    out: *mut *mut NlqwField,
) -> NlqwStatus {
    guard(|| {
        if values.is_null() {
            return Err(Failure::Null("values"));
        }
        let grid = LatticeGrid::new(half_width)?;
        if len != 4 * grid.len() {
            return Err(Error::InvalidArgument(format!("expected {} values, got {len}", 4 * grid.len())).into());
        }
        let v = std::slice::from_raw_parts(values, len);
        let spinors = v.chunks_exact(4).map(|c| [C64::new(c[0], c[1]), C64::new(c[2], c[3])]).collect();
        out_ptr(out, NlqwField(SpinorField::from_values(grid, spinors)?))
    })
}

/// Number of doubles in the flat layout of `field`.
///
/// # Safety
/// `field` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn nlqw_field_len(field: *const NlqwField, out: *mut usize) -> NlqwStatus {
    guard(|| {
        let f = borrow(field, "field")?;
        *borrow_mut(out, "out")? = 4 * f.0.grid().len();
        Ok(())
    })
}

/// Copies the flat layout into `values`, which must hold exactly `len` doubles.
///
/// # Safety
/// `values` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn nlqw_field_values(field: *const NlqwField, values: *mut f64, len: usize) -> NlqwStatus {
    guard(|| {
        let f = borrow(field, "field")?;
        if values.is_null() {
            return Err(Failure::Null("values"));
        }
        if len != 4 * f.0.grid().len() {
            return Err(Error::InvalidArgument(format!("expected {} values, got {len}", 4 * f.0.grid().len())).into());
        }
        let out = std::slice::from_raw_parts_mut(values, len);
        for (chunk, s) in out.chunks_exact_mut(4).zip(f.0.values()) {
            chunk.copy_from_slice(&[s[0].re, s[0].im, s[1].re, s[1].im]);
        }
        Ok(())
    })
}

/// # Safety
/// `field` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn nlqw_field_copy(field: *const NlqwField, out: *mut *mut NlqwField) -> NlqwStatus {
    guard(|| {
        let f = borrow(field, "field")?;
        out_ptr(out, NlqwField(f.0.clone()))
    })
}

/// # Safety
/// `field` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn nlqw_field_free(field: *mut NlqwField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// l2 norm.
///
/// # Safety
/// `field` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn nlqw_field_norm(field: *const NlqwField, out: *mut f64) -> NlqwStatus {
    guard(|| {
        *borrow_mut(out, "out")? = borrow(field, "field")?.0.norm();
        Ok(())
    })
}

/// Largest site norm.
///
/// # Safety
/// `field` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn nlqw_field_sup_norm(field: *const NlqwField, out: *mut f64) -> NlqwStatus {
    guard(|| {
        *borrow_mut(out, "out")? = borrow(field, "field")?.0.sup_norm();
        Ok(())
    })
}

/// # Safety
/// `field` must be valid and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn nlqw_snapshot_save(field: *const NlqwField, path: *const c_char) -> NlqwStatus {
    guard(|| {
        let f = borrow(field, "field")?;
        save_snapshot(&f.0, Path::new(str_arg(path, "path")?))?;
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nlqw_snapshot_load(path: *const c_char, out: *mut *mut NlqwField) -> NlqwStatus {
    guard(|| out_ptr(out, NlqwField(load_snapshot(Path::new(str_arg(path, "path")?))?)))
}

/// Bound-state family for a preset on the window `[-W, W)` with `g(s) = c s^p`.
///
/// # Safety
/// `preset` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nlqw_family_new(
    preset: *const c_char,
    window: usize,
    c: f64,
    p: u32,
    out: *mut *mut NlqwFamily,
) -> NlqwStatus {
    guard(|| {
        let coin = Preset::from_name(str_arg(preset, "preset")?)?.coin(LatticeGrid::new(window)?)?;
        out_ptr(out, NlqwFamily(BoundStateFamily::new(&coin, nonlinearity(c, p)?, FamilyConfig::default())?))
    })
}

/// # Safety
/// `family` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn nlqw_family_free(family: *mut NlqwFamily) {
    if !family.is_null() {
        drop(Box::from_raw(family));
    }
}

/// Largest admissible `|z|`.
///
/// # Safety
/// `family` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn nlqw_family_z_max(family: *const NlqwFamily, out: *mut f64) -> NlqwStatus {
    guard(|| {
        *borrow_mut(out, "out")? = borrow(family, "family")?.0.z_max();
        Ok(())
    })
}

/// `Phi[z]` on the window as a new field, with its eigenangle `Lambda` and
/// the residual `||U N(Phi) - e^{i Lambda} Phi||`. `lambda` and `residual`
/// may be null.
///
/// # Safety
/// `family` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn nlqw_family_eval(
    family: *const NlqwFamily,
    z_re: f64,
    z_im: f64,
    out: *mut *mut NlqwField,
    lambda: *mut f64,
    residual: *mut f64,
) -> NlqwStatus {
    guard(|| {
        let fam = &borrow(family, "family")?.0;
        let z = C64::new(z_re, z_im);
        let point = fam.point(z)?;
        if let Some(l) = lambda.as_mut() {
            *l = point.lambda;
        }
        if let Some(r) = residual.as_mut() {
            *r = fam.residual(z)?;
        }
        out_ptr(out, NlqwField(point.phi()))
    })
}
