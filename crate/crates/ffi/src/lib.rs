//! C ABI over `coag-core`.
//!
//! Objects are opaque handles created by `coag_*_new`-style functions and
//! released with the matching `coag_*_free`. Every fallible call returns a
//! [`CoagStatus`]; on failure `coag_last_error_message` describes the error
//! for the calling thread. Panics never cross the boundary: they are caught
//! and reported as `COAG_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use coag_core::harness::{run_contraction, ContractionRun, Settings};
use coag_core::{
    bernstein, catalog, compute_moments, flow, grid, io, laplace, metrics, mult_bernstein, normalize_to_class, CoagError, GriddedDensity,
    KernelKind, TransformCurve,
};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoagStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    BufferTooSmall = 3,
    MomentDivergence = 4,
    DegenerateDensity = 5,
    InvalidGrid = 6,
    Domain = 7,
    UnknownName = 8,
    NonAdmissible = 9,
    CharacteristicCrossing = 10,
    DtTooLarge = 11,
    PositivityLoss = 12,
    SupNotBracketed = 13,
    MomentMismatch = 14,
    Config = 15,
    Parse = 16,
    Io = 17,
    Panic = 18,
}

pub const COAG_KERNEL_CONSTANT: u32 = 0;
pub const COAG_KERNEL_ADDITIVE: u32 = 1;
pub const COAG_KERNEL_MULTIPLICATIVE: u32 = 2;

pub const COAG_TRANSFORM_LAPLACE: u32 = 0;
pub const COAG_TRANSFORM_BERNSTEIN: u32 = 1;
/// Bernstein transform of `x f(x)`.
pub const COAG_TRANSFORM_MULT_BERNSTEIN: u32 = 2;

/// A size density sampled on a grid.
pub struct CoagDensity(GriddedDensity);

/// A Laplace or Bernstein transform sampled on an eta grid.
pub struct CoagCurve(TransformCurve);

/// The outcome of a contraction run.
pub struct CoagReport(ContractionRun);

enum Failure {
    Core(CoagError),
    Null(&'static str),
    Invalid(String),
    BufferTooSmall { need: usize, have: usize },
}

impl From<CoagError> for Failure {
    fn from(e: CoagError) -> Self {
        Failure::Core(e)
    }
}

type FfiResult<T = ()> = Result<T, Failure>;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn core_status(e: &CoagError) -> CoagStatus {
    match e {
        CoagError::MomentDivergence { .. } => CoagStatus::MomentDivergence,
        CoagError::DegenerateDensity(_) => CoagStatus::DegenerateDensity,
        CoagError::InvalidGrid(_) => CoagStatus::InvalidGrid,
        CoagError::Domain(_) => CoagStatus::Domain,
        CoagError::UnknownName(_) => CoagStatus::UnknownName,
        CoagError::NonAdmissible(_) => CoagStatus::NonAdmissible,
        CoagError::CharacteristicCrossing { .. } => CoagStatus::CharacteristicCrossing,
        CoagError::DtTooLarge { .. } => CoagStatus::DtTooLarge,
        CoagError::PositivityLoss { .. } => CoagStatus::PositivityLoss,
        CoagError::SupNotBracketed { .. } => CoagStatus::SupNotBracketed,
        CoagError::MomentMismatch { .. } => CoagStatus::MomentMismatch,
        CoagError::Config(_) => CoagStatus::Config,
        CoagError::Parse(_) | CoagError::Json(_) => CoagStatus::Parse,
        CoagError::Io(_) => CoagStatus::Io,
        CoagError::AtCheckpoint { source, .. } => core_status(source),
    }
}

/// Runs `f`, converting errors and panics into a status and a message.
fn guard(f: impl FnOnce() -> FfiResult) -> CoagStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            CoagStatus::Ok
        }
        Ok(Err(fail)) => {
            let (status, msg) = match fail {
                Failure::Core(e) => (core_status(&e), e.to_string()),
                Failure::Null(what) => (CoagStatus::NullPointer, format!("{what} is null")),
                Failure::Invalid(m) => (CoagStatus::InvalidArgument, m),
                Failure::BufferTooSmall { need, have } => {
                    (CoagStatus::BufferTooSmall, format!("buffer holds {have} entries, {need} needed"))
                }
            };
            set_last_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("panic: {msg}"));
            CoagStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> FfiResult<&'a T> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &'static str) -> FfiResult<&'a [f64]> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn string(p: *const c_char, what: &'static str) -> FfiResult<String> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p).to_str().map(str::to_owned).map_err(|_| Failure::Invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> FfiResult {
    if out.is_null() {
        return Err(Failure::Null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn write<T>(out: *mut T, value: T) -> FfiResult {
    if out.is_null() {
        return Err(Failure::Null("out"));
    }
    *out = value;
    Ok(())
}

fn kernel(k: u32) -> FfiResult<KernelKind> {
    match k {
        COAG_KERNEL_CONSTANT => Ok(KernelKind::Constant),
        COAG_KERNEL_ADDITIVE => Ok(KernelKind::Additive),
        COAG_KERNEL_MULTIPLICATIVE => Ok(KernelKind::Multiplicative),
        other => Err(Failure::Invalid(format!("unknown kernel {other}"))),
    }
}

/// Copies `xs` and `ys` into caller buffers of capacity `cap`; either may be null.
unsafe fn copy_pair(xs: &[f64], ys: &[f64], x_out: *mut f64, y_out: *mut f64, cap: usize) -> FfiResult {
    if cap < xs.len() {
        return Err(Failure::BufferTooSmall { need: xs.len(), have: cap });
    }
    if !x_out.is_null() {
        ptr::copy_nonoverlapping(xs.as_ptr(), x_out, xs.len());
    }
    if !y_out.is_null() {
        ptr::copy_nonoverlapping(ys.as_ptr(), y_out, ys.len());
    }
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn coag_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread (empty after a success).
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn coag_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Builds a density from `len` grid points and values (copied).
///
/// # Safety
/// `grid` and `values` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn coag_density_new(grid: *const f64, values: *const f64, len: usize, out: *mut *mut CoagDensity) -> CoagStatus {
    guard(|| {
        let g = slice(grid, len, "grid")?.to_vec();
        let v = slice(values, len, "values")?.to_vec();
        store(out, CoagDensity(GriddedDensity::new(g, v)?))
    })
}

/// The exact self-similar profile of `kernel` on the default size grid.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn coag_density_exact_profile(kernel_id: u32, out: *mut *mut CoagDensity) -> CoagStatus {
    guard(|| store(out, CoagDensity(catalog::exact_profile(kernel(kernel_id)?))))
}

/// A catalog density (`exp`, `gamma(shape,rate)`, `G_add`, ...) sampled on
/// `grid`, or on the default size grid when `grid` is null.
///
/// # Safety
/// `name` must be a NUL-terminated string; `grid`, when not null, must point
/// to `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn coag_density_from_catalog(
    name: *const c_char,
    grid: *const f64,
    len: usize,
    out: *mut *mut CoagDensity,
) -> CoagStatus {
    guard(|| {
        let f = catalog::lookup(&string(name, "name")?)?;
        let pts = if grid.is_null() { grid::default_size_grid() } else { slice(grid, len, "grid")?.to_vec() };
        grid::validate(&pts, "size grid")?;
        store(out, CoagDensity(GriddedDensity::from_power_exp(f, pts)))
    })
}

/// Reads a density CSV file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn coag_density_read(path: *const c_char, out: *mut *mut CoagDensity) -> CoagStatus {
    guard(|| store(out, CoagDensity(io::read_density(string(path, "path")?)?)))
}

/// Writes a density CSV file.
///
/// # Safety
/// `density` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn coag_density_write(density: *const CoagDensity, path: *const c_char) -> CoagStatus {
    guard(|| Ok(io::write_density(Path::new(&string(path, "path")?), &deref(density, "density")?.0)?))
}

/// Number of grid points.
///
/// # Safety
/// `density` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn coag_density_len(density: *const CoagDensity, out: *mut usize) -> CoagStatus {
    guard(|| write(out, deref(density, "density")?.0.len()))
}

/// Copies grid and values into buffers of capacity `cap`; either may be null.
///
/// # Safety
/// `density` must be a live handle; non-null buffers must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn coag_density_samples(
    density: *const CoagDensity,
    grid_out: *mut f64,
    values_out: *mut f64,
    cap: usize,
) -> CoagStatus {
    guard(|| {
        let d = &deref(density, "density")?.0;
        copy_pair(&d.grid, &d.values, grid_out, values_out, cap)
    })
}

/// Moments `M_0 .. M_max_order` (`max_order <= 4`) into `out[0..=max_order]`.
/// A moment that diverges at the small-size end is `+inf`.
///
/// # Safety
/// `density` must be a live handle; `out` must hold `max_order + 1` doubles.
#[no_mangle]
pub unsafe extern "C" fn coag_density_moments(density: *const CoagDensity, max_order: usize, out: *mut f64) -> CoagStatus {
    guard(|| {
        let m = compute_moments(&deref(density, "density")?.0, max_order)?;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        for l in 0..=max_order {
            *out.add(l) = m.get(l);
        }
        Ok(())
    })
}

/// Rescales a density so the two moments fixed by `kernel` equal one.
///
/// # Safety
/// `density` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn coag_density_normalize(density: *const CoagDensity, kernel_id: u32, out: *mut *mut CoagDensity) -> CoagStatus {
    guard(|| {
        let k = kernel(kernel_id)?;
        store(out, CoagDensity(normalize_to_class(&deref(density, "density")?.0, k.class())?))
    })
}

/// Releases a density; null is ignored.
///
/// # Safety
/// `density` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn coag_density_free(density: *mut CoagDensity) {
    if !density.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(density))));
    }
}

/// Transforms a density on `len` eta points.
///
/// # Safety
/// `density` must be a live handle; `etas` must hold `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn coag_transform(
    density: *const CoagDensity,
    kind: u32,
    etas: *const f64,
    len: usize,
    out: *mut *mut CoagCurve,
) -> CoagStatus {
    guard(|| {
        let d = &deref(density, "density")?.0;
        let e = slice(etas, len, "etas")?;
        let c = match kind {
            COAG_TRANSFORM_LAPLACE => laplace(d, e)?,
            COAG_TRANSFORM_BERNSTEIN => bernstein(d, e)?,
            COAG_TRANSFORM_MULT_BERNSTEIN => mult_bernstein(d, e)?,
            other => return Err(Failure::Invalid(format!("unknown transform kind {other}"))),
        };
        store(out, CoagCurve(c))
    })
}

/// Evolves a normalized transform to self-similar time `tau` with the
/// closed-form flow of `kernel`.
///
/// # Safety
/// `curve` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn coag_curve_evolve(curve: *const CoagCurve, kernel_id: u32, tau: f64, out: *mut *mut CoagCurve) -> CoagStatus {
    guard(|| {
        let k = kernel(kernel_id)?;
        let c = flow::evolve(k, &deref(curve, "curve")?.0, tau, flow::FlowSolver::ClosedForm)?;
        store(out, CoagCurve(c))
    })
}

/// Number of eta points.
///
/// # Safety
/// `curve` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn coag_curve_len(curve: *const CoagCurve, out: *mut usize) -> CoagStatus {
    guard(|| write(out, deref(curve, "curve")?.0.len()))
}

/// Copies etas and values into buffers of capacity `cap`; either may be null.
///
/// # Safety
/// `curve` must be a live handle; non-null buffers must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn coag_curve_samples(curve: *const CoagCurve, etas_out: *mut f64, values_out: *mut f64, cap: usize) -> CoagStatus {
    guard(|| {
        let c = &deref(curve, "curve")?.0;
        copy_pair(&c.etas, &c.values, etas_out, values_out, cap)
    })
}

/// Weighted sup distance `sup |a - b| / eta^kappa` between two curves on the same grid.
///
/// # Safety
/// `a` and `b` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn coag_curve_distance(a: *const CoagCurve, b: *const CoagCurve, kappa: f64, out: *mut f64) -> CoagStatus {
    guard(|| {
        let d = deref(a, "a")?.0.difference(&deref(b, "b")?.0)?;
        write(out, metrics::weighted_sup(&d, kappa)?)
    })
}

/// Releases a curve; null is ignored.
///
/// # Safety
/// `curve` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn coag_curve_free(curve: *mut CoagCurve) {
    if !curve.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(curve))));
    }
}

fn run_settings(s: Settings) -> FfiResult<CoagReport> {
    Ok(CoagReport(run_contraction(&s.build()?)?))
}

/// Runs a named preset (`thm1`, `thm2`, `thm3`).
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn coag_run_preset(name: *const c_char, out: *mut *mut CoagReport) -> CoagStatus {
    guard(|| {
        let mut s = Settings::new();
        s.set("preset", &string(name, "name")?)?;
        store(out, run_settings(s)?)
    })
}

/// Runs a contraction experiment from `key = value` configuration text.
///
/// # Safety
/// `config` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn coag_run_config(config: *const c_char, out: *mut *mut CoagReport) -> CoagStatus {
    guard(|| store(out, run_settings(Settings::parse(&string(config, "config")?)?)?))
}

/// Whether every enabled check of the run passed.
///
/// # Safety
/// `report` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn coag_report_passed(report: *const CoagReport, out: *mut bool) -> CoagStatus {
    guard(|| write(out, deref(report, "report")?.0.passed))
}

/// Number of kappa entries.
///
/// # Safety
/// `report` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn coag_report_kappa_count(report: *const CoagReport, out: *mut usize) -> CoagStatus {
    guard(|| write(out, deref(report, "report")?.0.report.entries.len()))
}

/// One kappa entry. `fitted_rate` is NaN when no fit was possible. Any
/// output pointer may be null.
///
/// # Safety
/// `report` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn coag_report_entry(
    report: *const CoagReport,
    index: usize,
    kappa: *mut f64,
    fitted_rate: *mut f64,
    theorem_rate: *mut f64,
    contraction_holds: *mut bool,
) -> CoagStatus {
    guard(|| {
        let entries = &deref(report, "report")?.0.report.entries;
        let e = entries.get(index).ok_or_else(|| Failure::Invalid(format!("entry {index} of {}", entries.len())))?;
        if !kappa.is_null() {
            *kappa = e.kappa;
        }
        if !fitted_rate.is_null() {
            *fitted_rate = e.fitted_rate.unwrap_or(f64::NAN);
        }
        if !theorem_rate.is_null() {
            *theorem_rate = e.theorem_rate;
        }
        if !contraction_holds.is_null() {
            *contraction_holds = e.contraction_holds;
        }
        Ok(())
    })
}

/// Writes the report as JSON to `path`.
///
/// # Safety
/// `report` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn coag_report_write_json(report: *const CoagReport, path: *const c_char) -> CoagStatus {
    guard(|| {
        let json = deref(report, "report")?.0.report.to_json()?;
        std::fs::write(string(path, "path")?, json).map_err(|e| Failure::Core(e.into()))
    })
}

/// Releases a report; null is ignored.
///
/// # Safety
/// `report` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn coag_report_free(report: *mut CoagReport) {
    if !report.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(report))));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn panics_become_a_status() {
        let s = guard(|| panic!("boom"));
        assert_eq!(s, CoagStatus::Panic);
        let msg = unsafe { CStr::from_ptr(coag_last_error_message()) }.to_str().unwrap().to_owned();
        assert_eq!(msg, "panic: boom");
        assert_eq!(guard(|| Ok(())), CoagStatus::Ok);
    }

    #[test]
    fn nested_checkpoint_errors_keep_their_status() {
        let e = CoagError::Domain("x".into()).at(1.0, 2.0);
        assert_eq!(core_status(&e), CoagStatus::Domain);
    }
}
