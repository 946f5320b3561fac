//! C ABI over `fracfield`.
//!
//! Objects cross the boundary as opaque handles created by `ff_*_new` /
//! `ff_*_parse` and released with the matching `ff_*_free`. Every fallible
//! call returns an [`FfStatus`]; on failure the message is kept per thread and
//! can be copied out with [`ff_last_error_message`]. Panics never unwind into C.
//!
//! Field values are passed as separate real and imaginary arrays. Multi-field
//! data is field-major: field `r` occupies `[r * nodes, (r + 1) * nodes)`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};

use fracfield::densities::{parse_density, CatalogDensity};
use fracfield::dirac::{conserved_residual, make_gamma, mass_term, solve_psi_discrete, solve_psibar_discrete, DiracParams};
use fracfield::fracops::apply_partial;
use fracfield::noether::{noether_residual, SymmetryVariation};
use fracfield::special::{mittag_leffler, MittagLefflerParams};
use fracfield::variational::{action, el_residual, variational_consistency};
use fracfield::{
    AdjointMode, ComplexField, FieldConfiguration, FracError, FractionalOperator, FractionalOrder, Grid1D,
    OperatorKind, PerturbationField, RealField, Side,
};
use num_complex::Complex64;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FfStatus {
    Ok = 0,
    /// A required pointer was null.
    NullPointer = 1,
    /// Invalid argument or configuration.
    Config = 2,
    /// Shapes or lengths that do not fit together.
    Structural = 3,
    Domain = 4,
    Range = 5,
    Numerical = 6,
    Evaluation = 7,
    Io = 8,
    /// A Rust panic was caught.
    Panic = 9,
}

/// Which fractional operator to apply.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FfOperator {
    CaputoLeft = 0,
    CaputoRight = 1,
    RlLeft = 2,
    RlRight = 3,
}

/// Adjoint pairing for residual computations.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FfMode {
    ContinuumFaithful = 0,
    DiscreteExact = 1,
}

/// Uniform 1D grid.
pub struct FfGrid(Grid1D);

/// Catalog Lagrangian density.
pub struct FfDensity(CatalogDensity);

/// Complex field configuration on a 1D grid.
pub struct FfConfig(FieldConfiguration);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &FracError) -> FfStatus {
    match e {
        FracError::Structural(_) => FfStatus::Structural,
        FracError::Config(_) => FfStatus::Config,
        FracError::Domain(_) => FfStatus::Domain,
        FracError::Range(_) => FfStatus::Range,
        FracError::Evaluation { .. } => FfStatus::Evaluation,
        FracError::Numerical(_) => FfStatus::Numerical,
        FracError::Io(_) => FfStatus::Io,
    }
}

enum Fail {
    Lib(FracError),
    Null(&'static str),
    Len(String),
}

impl From<FracError> for Fail {
    fn from(e: FracError) -> Self {
        Fail::Lib(e)
    }
}

/// Runs `f`, records any failure and converts it to a status.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> FfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            FfStatus::Ok
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("{what} must not be null"));
            FfStatus::NullPointer
        }
        Ok(Err(Fail::Len(msg))) => {
            set_error(msg);
            FfStatus::Structural
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            FfStatus::Panic
        }
    }
}

unsafe fn obj<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    // SAFETY: the caller passes a handle from this library or null.
    unsafe { p.as_ref() }.ok_or(Fail::Null(what))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    // SAFETY: the caller guarantees `len` readable values.
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize, what: &'static str) -> Result<&'a mut [f64], Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    // SAFETY: the caller guarantees `len` writable values.
    Ok(unsafe { std::slice::from_raw_parts_mut(p, len) })
}

// The borrow comes from the raw pointer, not from `what`.
#[allow(clippy::mut_from_ref)]
unsafe fn out_ptr<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    // SAFETY: the caller passes a valid out-pointer or null.
    unsafe { p.as_mut() }.ok_or(Fail::Null(what))
}

fn need_len(got: usize, want: usize, what: &str) -> Result<(), Fail> {
    if got != want {
        return Err(Fail::Len(format!("{what} has length {got}, expected {want}")));
    }
    Ok(())
}

fn write_complex(values: &[Complex64], re: &mut [f64], im: &mut [f64]) {
    for (k, z) in values.iter().enumerate() {
        re[k] = z.re;
        im[k] = z.im;
    }
}

fn write_fields(cfg: &FieldConfiguration, re: &mut [f64], im: &mut [f64]) {
    let n = cfg.field(0).len();
    for (r, f) in cfg.fields().iter().enumerate() {
        write_complex(f.values(), &mut re[r * n..(r + 1) * n], &mut im[r * n..(r + 1) * n]);
    }
}

fn mode_of(m: FfMode) -> AdjointMode {
    match m {
        FfMode::ContinuumFaithful => AdjointMode::ContinuumFaithful,
        FfMode::DiscreteExact => AdjointMode::DiscreteExact,
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ff_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Length in bytes of the last error message on this thread (without NUL).
#[no_mangle]
pub extern "C" fn ff_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().len())
}

/// Copies the last error message on this thread into `buf` (NUL-terminated,
/// truncated to `len - 1` bytes). Returns the number of bytes written
/// excluding the NUL, or 0 when `buf` is null or `len` is 0.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ff_last_error_message(buf: *mut c_char, len: usize) -> usize {
    if buf.is_null() || len == 0 {
        return 0;
    }
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let n = msg.len().min(len - 1);
        // SAFETY: `buf` has room for `len >= n + 1` bytes.
        unsafe {
            std::ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        n
    })
}

/// Creates the grid `[a, b]` with `n` intervals.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ff_grid_new(a: f64, b: f64, n: usize, out: *mut *mut FfGrid) -> FfStatus {
    guard(|| {
        let out = unsafe { out_ptr(out, "out") }?;
        *out = Box::into_raw(Box::new(FfGrid(Grid1D::new(a, b, n)?)));
        Ok(())
    })
}

/// Number of nodes, `n + 1`; 0 for a null handle.
///
/// # Safety
/// `grid` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ff_grid_len(grid: *const FfGrid) -> usize {
    unsafe { grid.as_ref() }.map_or(0, |g| g.0.len())
}

/// Releases a grid. Null is ignored.
///
/// # Safety
/// `grid` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ff_grid_free(grid: *mut FfGrid) {
    if !grid.is_null() {
        // SAFETY: created by Box::into_raw in ff_grid_new.
        drop(unsafe { Box::from_raw(grid) });
    }
}

/// Applies a fractional operator of order `alpha` to the real samples `f`
/// (length `ff_grid_len`), writing into `out` of the same length.
///
/// # Safety
/// Pointers must be valid for `len` values; `grid` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ff_fracop_apply(
    op: FfOperator,
    alpha: f64,
    grid: *const FfGrid,
    f: *const f64,
    out: *mut f64,
    len: usize,
) -> FfStatus {
    guard(|| {
        let g = unsafe { obj(grid, "grid") }?.0;
        need_len(len, g.len(), "samples")?;
        let f = unsafe { slice(f, len, "f") }?;
        let out = unsafe { slice_mut(out, len, "out") }?;
        let (kind, side) = match op {
            FfOperator::CaputoLeft => (OperatorKind::Caputo, Side::Left),
            FfOperator::CaputoRight => (OperatorKind::Caputo, Side::Right),
            FfOperator::RlLeft => (OperatorKind::RiemannLiouville, Side::Left),
            FfOperator::RlRight => (OperatorKind::RiemannLiouville, Side::Right),
        };
        let field = RealField::new(g, f.to_vec())?;
        let d = apply_partial(&field, 0, FractionalOperator::new(kind, side, FractionalOrder::new(alpha)?))?;
        out.copy_from_slice(d.values());
        Ok(())
    })
}

/// Parses a catalog density name such as `complex-scalar:0.5:1`.
///
/// # Safety
/// `spec` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ff_density_parse(spec: *const c_char, out: *mut *mut FfDensity) -> FfStatus {
    guard(|| {
        if spec.is_null() {
            return Err(Fail::Null("spec"));
        }
        let out = unsafe { out_ptr(out, "out") }?;
        // SAFETY: checked non-null; NUL termination is the caller's contract.
        let s = unsafe { CStr::from_ptr(spec) }
            .to_str()
            .map_err(|_| FracError::Config("density name is not UTF-8".into()))?;
        *out = Box::into_raw(Box::new(FfDensity(parse_density(s)?)));
        Ok(())
    })
}

/// Number of fields the density expects; 0 for a null handle.
///
/// # Safety
/// `d` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ff_density_n_fields(d: *const FfDensity) -> usize {
    unsafe { d.as_ref() }.map_or(0, |d| d.0.density.n_fields())
}

/// Releases a density. Null is ignored.
///
/// # Safety
/// `d` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ff_density_free(d: *mut FfDensity) {
    if !d.is_null() {
        // SAFETY: created by Box::into_raw in ff_density_parse.
        drop(unsafe { Box::from_raw(d) });
    }
}

fn build_config(g: Grid1D, n_fields: usize, re: &[f64], im: Option<&[f64]>) -> Result<FieldConfiguration, Fail> {
    let n = g.len();
    let fields = (0..n_fields)
        .map(|r| {
            let vals = (0..n).map(|j| Complex64::new(re[r * n + j], im.map_or(0.0, |im| im[r * n + j]))).collect();
            ComplexField::new(g, vals)
        })
        .collect::<fracfield::Result<Vec<_>>>()?;
    Ok(FieldConfiguration::new(fields)?)
}

/// Creates a configuration of `n_fields` fields. `re` and `im` hold
/// `n_fields * ff_grid_len(grid)` values, field-major; `im` may be null for
/// real data.
///
/// # Safety
/// `re` (and `im` when not null) must hold `len` values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ff_config_new(
    grid: *const FfGrid,
    n_fields: usize,
    re: *const f64,
    im: *const f64,
    len: usize,
    out: *mut *mut FfConfig,
) -> FfStatus {
    guard(|| {
        let g = unsafe { obj(grid, "grid") }?.0;
        let out = unsafe { out_ptr(out, "out") }?;
        if n_fields == 0 {
            return Err(FracError::Config("a configuration needs at least one field".into()).into());
        }
        need_len(len, n_fields * g.len(), "configuration data")?;
        let re = unsafe { slice(re, len, "re") }?;
        let im = if im.is_null() { None } else { Some(unsafe { slice(im, len, "im") }?) };
        *out = Box::into_raw(Box::new(FfConfig(build_config(g, n_fields, re, im)?)));
        Ok(())
    })
}

/// Releases a configuration. Null is ignored.
///
/// # Safety
/// `c` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ff_config_free(c: *mut FfConfig) {
    if !c.is_null() {
        // SAFETY: created by Box::into_raw in ff_config_new.
        drop(unsafe { Box::from_raw(c) });
    }
}

/// Discrete action (trapezoid rule), complex in general.
///
/// # Safety
/// Handles must be live; `re` and `im` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ff_action(d: *const FfDensity, c: *const FfConfig, re: *mut f64, im: *mut f64) -> FfStatus {
    guard(|| {
        let (d, c) = (unsafe { obj(d, "density") }?, unsafe { obj(c, "config") }?);
        let (re, im) = (unsafe { out_ptr(re, "re") }?, unsafe { out_ptr(im, "im") }?);
        let s = action(d.0.density.as_ref(), &c.0)?;
        *re = s.re;
        *im = s.im;
        Ok(())
    })
}

/// Euler-Lagrange residual, written field-major into `re` / `im` of length
/// `n_fields * nodes`.
///
/// # Safety
/// Handles must be live; outputs must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn ff_el_residual(
    d: *const FfDensity,
    c: *const FfConfig,
    mode: FfMode,
    re: *mut f64,
    im: *mut f64,
    len: usize,
) -> FfStatus {
    guard(|| {
        let (d, c) = (unsafe { obj(d, "density") }?, unsafe { obj(c, "config") }?);
        need_len(len, c.0.n_fields() * c.0.field(0).len(), "output")?;
        let (re, im) = (unsafe { slice_mut(re, len, "re") }?, unsafe { slice_mut(im, len, "im") }?);
        let r = el_residual(d.0.density.as_ref(), &c.0, mode_of(mode))?;
        write_fields(&r, re, im);
        Ok(())
    })
}

/// `|Gateaux derivative - <EL residual, eta>|` with the exact discrete adjoint.
/// `eta` is a configuration vanishing on the boundary.
///
/// # Safety
/// Handles must be live; `defect` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ff_variational_consistency(
    d: *const FfDensity,
    c: *const FfConfig,
    eta: *const FfConfig,
    defect: *mut f64,
) -> FfStatus {
    guard(|| {
        let (d, c, eta) = (unsafe { obj(d, "density") }?, unsafe { obj(c, "config") }?, unsafe { obj(eta, "eta") }?);
        let defect = unsafe { out_ptr(defect, "defect") }?;
        let pert = PerturbationField::new(eta.0.clone())?;
        *defect = variational_consistency(d.0.density.as_ref(), &c.0, &pert)?;
        Ok(())
    })
}

/// Pointwise Noether residual for the phase symmetry with parameter `epsilon`,
/// one value per node.
///
/// # Safety
/// Handles must be live; outputs must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn ff_noether_residual_phase(
    d: *const FfDensity,
    c: *const FfConfig,
    epsilon: f64,
    mode: FfMode,
    re: *mut f64,
    im: *mut f64,
    len: usize,
) -> FfStatus {
    guard(|| {
        let (d, c) = (unsafe { obj(d, "density") }?, unsafe { obj(c, "config") }?);
        need_len(len, c.0.field(0).len(), "output")?;
        let (re, im) = (unsafe { slice_mut(re, len, "re") }?, unsafe { slice_mut(im, len, "im") }?);
        let r = noether_residual(d.0.density.as_ref(), &c.0, &SymmetryVariation::Phase { epsilon }, mode_of(mode))?;
        write_complex(r.values(), re, im);
        Ok(())
    })
}

/// Solves the discrete Dirac pair on `[0, t_end]` with `n` intervals and writes
/// the conserved-quantity residual (`n + 1` values). `psi0` and `psibar_t`
/// are spinors as `[re1, im1, re2, im2]`. `relative` receives the interior
/// max residual over `max |m^alpha Psibar Psi|`.
///
/// # Safety
/// Spinor pointers must hold 4 values, outputs `len` values.
#[no_mangle]
pub unsafe extern "C" fn ff_dirac_conserved_residual(
    alpha: f64,
    m: f64,
    t_end: f64,
    n: usize,
    psi0: *const f64,
    psibar_t: *const f64,
    mode: FfMode,
    re: *mut f64,
    im: *mut f64,
    len: usize,
    relative: *mut f64,
) -> FfStatus {
    guard(|| {
        let spinor = |s: &[f64]| [Complex64::new(s[0], s[1]), Complex64::new(s[2], s[3])];
        let (p0, pt) = (unsafe { slice(psi0, 4, "psi0") }?, unsafe { slice(psibar_t, 4, "psibar_t") }?);
        let relative = unsafe { out_ptr(relative, "relative") }?;
        let p = DiracParams::new(m, FractionalOrder::new(alpha)?, t_end, n, spinor(p0), spinor(pt))?;
        need_len(len, n + 1, "output")?;
        let (re, im) = (unsafe { slice_mut(re, len, "re") }?, unsafe { slice_mut(im, len, "im") }?);
        let g = make_gamma(1)?;
        let mode = mode_of(mode);
        let psi = solve_psi_discrete(&p, &g)?;
        let bar = solve_psibar_discrete(&p, &g, mode)?;
        let r = conserved_residual(&psi, &bar, &p, &g, mode)?;
        let scale = mass_term(&psi, &bar, &p)?.max_abs();
        *relative = if scale > 0.0 { r.interior_max_abs() / scale } else { 0.0 };
        write_complex(r.values(), re, im);
        Ok(())
    })
}

/// `E_{alpha, beta}(z)`.
///
/// # Safety
/// `re` and `im` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ff_mittag_leffler(alpha: f64, beta: f64, z_re: f64, z_im: f64, re: *mut f64, im: *mut f64) -> FfStatus {
    guard(|| {
        let (re, im) = (unsafe { out_ptr(re, "re") }?, unsafe { out_ptr(im, "im") }?);
        let v = mittag_leffler(MittagLefflerParams::new(alpha, beta)?, Complex64::new(z_re, z_im))?;
        *re = v.re;
        *im = v.im;
        Ok(())
    })
}
