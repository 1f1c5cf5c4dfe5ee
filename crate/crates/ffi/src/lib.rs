//! C ABI over the core library.
//!
//! Every fallible function returns an [`SmteStatus`]; on failure the
//! message is available from [`smte_last_error`] on the same thread.
//! Handles are opaque and must be released with their `_free` function.

#![allow(non_camel_case_types, clippy::too_many_arguments)]

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use subsidy_mte::model::{Cell, MteCurve, PropensityFn};
use subsidy_mte::numerics::{norm_cdf, norm_quantile};
use subsidy_mte::policy::{lambda_eval, solve_cell, Method, SolutionKind, DEFAULT_GRID_N};
use subsidy_mte::welfare::{welfare_of_rule, CostSpec, SubsidyRule};
use subsidy_mte::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmteStatus {
    SMTE_OK = 0,
    SMTE_NULL_POINTER = 1,
    SMTE_INVALID_ARGUMENT = 2,
    SMTE_DOMAIN = 3,
    SMTE_ASSUMPTION = 4,
    SMTE_NUMERICAL = 5,
    SMTE_MISSING_CELL = 6,
    SMTE_PANIC = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmteCostKind {
    SMTE_COST_ZERO = 0,
    SMTE_COST_VOUCHER = 1,
    SMTE_COST_CONSTANT_PER_ELIGIBLE = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmteMethod {
    SMTE_METHOD_AUTO = 0,
    SMTE_METHOD_POSITIVE = 1,
    SMTE_METHOD_NEGATIVE = 2,
    SMTE_METHOD_GENERAL = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmteSolutionKind {
    SMTE_INTERIOR = 0,
    SMTE_CORNER_LOW = 1,
    SMTE_CORNER_HIGH = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SmteSolveResult {
    pub z_star: f64,
    pub u_star: f64,
    pub lambda: f64,
    pub welfare: f64,
    pub kind: SmteSolutionKind,
}

/// Opaque MTE curve.
pub struct SmteMte(MteCurve);

/// Opaque propensity score.
pub struct SmtePropensity(PropensityFn);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SmteStatus {
    match e {
        Error::InvalidParams(_) | Error::Data(_) | Error::Json(_) => SmteStatus::SMTE_INVALID_ARGUMENT,
        Error::Domain(_) | Error::OffSupport { .. } => SmteStatus::SMTE_DOMAIN,
        Error::Assumption(_) | Error::Crossing(_) => SmteStatus::SMTE_ASSUMPTION,
        Error::MissingCell(_) => SmteStatus::SMTE_MISSING_CELL,
        _ => SmteStatus::SMTE_NUMERICAL,
    }
}

struct Fail(SmteStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SmteStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SmteStatus::SMTE_OK,
        Ok(Err(Fail(s, m))) => {
            set_error(m);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            SmteStatus::SMTE_PANIC
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(SmteStatus::SMTE_NULL_POINTER, format!("{what} is null"))
}

unsafe fn slice<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out<'a, T>(p: *mut T) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null("output pointer"))
}

fn cost_spec(kind: SmteCostKind, amount: f64) -> CostSpec {
    match kind {
        SmteCostKind::SMTE_COST_ZERO => CostSpec::Zero,
        SmteCostKind::SMTE_COST_VOUCHER => CostSpec::Voucher,
        SmteCostKind::SMTE_COST_CONSTANT_PER_ELIGIBLE => CostSpec::ConstantPerEligible { amount },
    }
}

unsafe fn json_arg<T: serde::de::DeserializeOwned>(s: *const c_char) -> Result<T, Fail> {
    if s.is_null() {
        return Err(null("json"));
    }
    let text = CStr::from_ptr(s)
        .to_str()
        .map_err(|e| Fail(SmteStatus::SMTE_INVALID_ARGUMENT, e.to_string()))?;
    serde_json::from_str(text).map_err(|e| Fail(SmteStatus::SMTE_INVALID_ARGUMENT, e.to_string()))
}

fn boxed<T>(r: Result<T, Fail>) -> *mut T {
    match catch_unwind(AssertUnwindSafe(|| r)) {
        Ok(Ok(v)) => Box::into_raw(Box::new(v)),
        Ok(Err(Fail(_, m))) => {
            set_error(m);
            ptr::null_mut()
        }
        Err(_) => {
            set_error("internal panic".into());
            ptr::null_mut()
        }
    }
}

/// Message of the last failure on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn smte_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn smte_norm_cdf(x: f64) -> f64 {
    norm_cdf(x)
}

/// # Safety
/// `out_value` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn smte_norm_quantile(p: f64, out_value: *mut f64) -> SmteStatus {
    guard(|| {
        *out(out_value)? = norm_quantile(p)?;
        Ok(())
    })
}

/// Normal-model MTE `xᵀlevel − slope·Φ⁻¹(u)`; `level` has a leading
/// intercept. Returns null on failure.
///
/// # Safety
/// `level` must point to `n_level` doubles.
#[no_mangle]
pub unsafe extern "C" fn smte_mte_normal(level: *const f64, n_level: usize, slope: f64) -> *mut SmteMte {
    boxed((|| {
        let l = slice(level, n_level, "level")?;
        if l.is_empty() || l.iter().any(|v| !v.is_finite()) || !slope.is_finite() {
            return Err(Fail(SmteStatus::SMTE_INVALID_ARGUMENT, "need a finite intercept and slope".into()));
        }
        Ok(SmteMte(MteCurve::normal(l.to_vec(), slope)))
    })())
}

/// MTE curve from its JSON form (as written in `fit.json`).
///
/// # Safety
/// `json` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn smte_mte_from_json(json: *const c_char) -> *mut SmteMte {
    boxed(json_arg::<MteCurve>(json).map(SmteMte))
}

/// # Safety
/// `mte` must come from an `smte_mte_*` constructor and not be used after.
#[no_mangle]
pub unsafe extern "C" fn smte_mte_free(mte: *mut SmteMte) {
    if !mte.is_null() {
        drop(Box::from_raw(mte));
    }
}

/// # Safety
/// Pointers must be valid for the given lengths.
#[no_mangle]
pub unsafe extern "C" fn smte_mte_eval(
    mte: *const SmteMte,
    x: *const f64,
    n_x: usize,
    u: f64,
    out_value: *mut f64,
) -> SmteStatus {
    guard(|| {
        let m = handle(mte, "mte")?;
        let cell = m.0.at(slice(x, n_x, "x")?)?;
        if !(0.0..=1.0).contains(&u) {
            return Err(Fail(SmteStatus::SMTE_DOMAIN, format!("u = {u} outside [0, 1]")));
        }
        *out(out_value)? = cell.value(u);
        Ok(())
    })
}

/// Probit propensity `Φ(xᵀβ_D + γz)`; `beta_d` has a leading intercept.
///
/// # Safety
/// `beta_d` must point to `n_beta` doubles.
#[no_mangle]
pub unsafe extern "C" fn smte_propensity_probit(beta_d: *const f64, n_beta: usize, gamma: f64) -> *mut SmtePropensity {
    boxed((|| {
        let b = slice(beta_d, n_beta, "beta_d")?;
        if b.is_empty() {
            return Err(Fail(SmteStatus::SMTE_INVALID_ARGUMENT, "beta_d needs an intercept".into()));
        }
        Ok(SmtePropensity(PropensityFn::probit(b.to_vec(), gamma)))
    })())
}

/// Linear propensity `a + xᵀβ_x + wᵀβ_w + γz`.
///
/// # Safety
/// Pointers must be valid for the given lengths.
#[no_mangle]
pub unsafe extern "C" fn smte_propensity_linear(
    intercept: f64,
    beta_x: *const f64,
    n_beta_x: usize,
    beta_w: *const f64,
    n_beta_w: usize,
    gamma: f64,
) -> *mut SmtePropensity {
    boxed((|| {
        Ok(SmtePropensity(PropensityFn::Linear {
            intercept,
            beta_x: slice(beta_x, n_beta_x, "beta_x")?.to_vec(),
            beta_w: slice(beta_w, n_beta_w, "beta_w")?.to_vec(),
            gamma,
        }))
    })())
}

/// # Safety
/// `json` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn smte_propensity_from_json(json: *const c_char) -> *mut SmtePropensity {
    boxed(json_arg::<PropensityFn>(json).map(SmtePropensity))
}

/// # Safety
/// `g` must come from an `smte_propensity_*` constructor and not be used after.
#[no_mangle]
pub unsafe extern "C" fn smte_propensity_free(g: *mut SmtePropensity) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// # Safety
/// Pointers must be valid for the given lengths.
#[no_mangle]
pub unsafe extern "C" fn smte_propensity_eval(
    g: *const SmtePropensity,
    x: *const f64,
    n_x: usize,
    w: *const f64,
    n_w: usize,
    z: f64,
    out_value: *mut f64,
) -> SmteStatus {
    guard(|| {
        let p = handle(g, "propensity")?;
        let c = p.0.at(slice(x, n_x, "x")?, slice(w, n_w, "w")?)?;
        c.check_in_domain(z)?;
        *out(out_value)? = c.value(z);
        Ok(())
    })
}

unsafe fn cell_of(x: *const f64, n_x: usize, w: *const f64, n_w: usize) -> Result<Cell, Fail> {
    Ok(Cell::new(slice(x, n_x, "x")?.to_vec(), slice(w, n_w, "w")?.to_vec(), 1.0))
}

/// Marginal benefit of subsidy `Λ(x, w, z)`.
///
/// # Safety
/// Pointers must be valid for the given lengths.
#[no_mangle]
pub unsafe extern "C" fn smte_lambda(
    mte: *const SmteMte,
    g: *const SmtePropensity,
    cost: SmteCostKind,
    cost_amount: f64,
    x: *const f64,
    n_x: usize,
    w: *const f64,
    n_w: usize,
    z: f64,
    out_value: *mut f64,
) -> SmteStatus {
    guard(|| {
        let (m, p) = (handle(mte, "mte")?, handle(g, "propensity")?);
        let cell = cell_of(x, n_x, w, n_w)?;
        *out(out_value)? = lambda_eval(&m.0, &p.0, &cost_spec(cost, cost_amount), &cell, z)?;
        Ok(())
    })
}

/// Optimal subsidy for one cell over `[z_lo, z_hi]`.
///
/// # Safety
/// Pointers must be valid for the given lengths.
#[no_mangle]
pub unsafe extern "C" fn smte_solve_cell(
    mte: *const SmteMte,
    g: *const SmtePropensity,
    cost: SmteCostKind,
    cost_amount: f64,
    x: *const f64,
    n_x: usize,
    w: *const f64,
    n_w: usize,
    z_lo: f64,
    z_hi: f64,
    method: SmteMethod,
    out_result: *mut SmteSolveResult,
) -> SmteStatus {
    guard(|| {
        let (m, p) = (handle(mte, "mte")?, handle(g, "propensity")?);
        let cell = cell_of(x, n_x, w, n_w)?;
        let method = match method {
            SmteMethod::SMTE_METHOD_AUTO => Method::Auto,
            SmteMethod::SMTE_METHOD_POSITIVE => Method::Positive,
            SmteMethod::SMTE_METHOD_NEGATIVE => Method::Negative,
            SmteMethod::SMTE_METHOD_GENERAL => Method::General,
        };
        let r = solve_cell(&m.0, &p.0, &cost_spec(cost, cost_amount), &cell, [z_lo, z_hi], method, DEFAULT_GRID_N)?;
        *out(out_result)? = SmteSolveResult {
            z_star: r.z_star,
            u_star: r.u_star,
            lambda: r.lambda,
            welfare: r.welfare,
            kind: match r.kind {
                SolutionKind::Interior => SmteSolutionKind::SMTE_INTERIOR,
                SolutionKind::CornerLow => SmteSolutionKind::SMTE_CORNER_LOW,
                SolutionKind::CornerHigh => SmteSolutionKind::SMTE_CORNER_HIGH,
            },
        };
        Ok(())
    })
}

/// Net welfare of a rule over `n_cells` cells; `xs` and `ws` are row-major
/// `n_cells × x_dim` and `n_cells × w_dim`.
///
/// # Safety
/// Pointers must be valid for the given lengths.
#[no_mangle]
pub unsafe extern "C" fn smte_welfare(
    mte: *const SmteMte,
    g: *const SmtePropensity,
    cost: SmteCostKind,
    cost_amount: f64,
    n_cells: usize,
    xs: *const f64,
    x_dim: usize,
    ws: *const f64,
    w_dim: usize,
    weights: *const f64,
    assignment: *const f64,
    z_lo: f64,
    z_hi: f64,
    out_value: *mut f64,
) -> SmteStatus {
    guard(|| {
        let (m, p) = (handle(mte, "mte")?, handle(g, "propensity")?);
        let xs = slice(xs, n_cells * x_dim, "xs")?;
        let ws = slice(ws, n_cells * w_dim, "ws")?;
        let weights = slice(weights, n_cells, "weights")?;
        let assignment = slice(assignment, n_cells, "assignment")?;
        let cells = (0..n_cells)
            .map(|i| {
                Cell::new(xs[i * x_dim..(i + 1) * x_dim].to_vec(), ws[i * w_dim..(i + 1) * w_dim].to_vec(), weights[i])
            })
            .collect();
        let rule = SubsidyRule::new(cells, assignment.to_vec(), [z_lo, z_hi])?;
        *out(out_value)? = welfare_of_rule(&m.0, &p.0, &cost_spec(cost, cost_amount), &rule, None)?.net;
        Ok(())
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn smte_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Nonzero when `status` is `SMTE_OK`.
#[no_mangle]
pub extern "C" fn smte_ok(status: SmteStatus) -> c_int {
    c_int::from(status == SmteStatus::SMTE_OK)
}
