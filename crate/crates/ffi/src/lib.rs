//! C ABI for the corrcox engine.
//!
//! Models are opaque handles created from a JSON spec (the same format the command line
//! reads) and released with [`corrcox_model_free`]. Every fallible call returns a
//! [`CorrcoxStatus`]; on failure a description is available from
//! [`corrcox_last_error_message`] on the same thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use corrcox::cli::{analytic_survival, parse_spec, ModelSpec};
use corrcox::compensator::{build_table, MoRates};
use corrcox::simulation::{self, RngConfig, SimModel, SimOptions};
use corrcox::{Error, SurvivalQuery};

/// Status codes; the nonzero values match the command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrcoxStatus {
    Ok = 0,
    /// Spec, schema, argument or domain error.
    InvalidInput = 2,
    /// Component count beyond the supported subset-table size.
    Capacity = 3,
    /// Quadrature failure or another numerical error.
    Numerical = 4,
    /// Operation not defined for this model family.
    Unsupported = 5,
    /// A required pointer argument was null.
    NullPointer = 6,
    /// The engine panicked; this is a bug.
    Internal = 7,
}

/// A Monte Carlo mean and its standard error.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CorrcoxMcEstimate {
    pub value: f64,
    pub stderr: f64,
    pub paths: u64,
    pub seed: u64,
}

/// Opaque model handle.
pub struct CorrcoxModel {
    spec: ModelSpec,
    hash: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> CorrcoxStatus {
    match e.exit_code() {
        3 => CorrcoxStatus::Capacity,
        4 => CorrcoxStatus::Numerical,
        5 => CorrcoxStatus::Unsupported,
        _ => CorrcoxStatus::InvalidInput,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CorrcoxStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            CorrcoxStatus::Ok
        }
        Ok(Err(Failure::Engine(e))) => {
            set_error(&e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(&format!("null pointer: {what}"));
            CorrcoxStatus::NullPointer
        }
        Err(_) => {
            set_error("internal error: engine panicked");
            CorrcoxStatus::Internal
        }
    }
}

enum Failure {
    Engine(Error),
    Null(&'static str),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Engine(e)
    }
}

unsafe fn model_ref<'a>(model: *const CorrcoxModel) -> Result<&'a CorrcoxModel, Failure> {
    model.as_ref().ok_or(Failure::Null("model"))
}

unsafe fn horizons_query(horizons: *const f64, len: usize) -> Result<SurvivalQuery, Failure> {
    if horizons.is_null() {
        return Err(Failure::Null("horizons"));
    }
    let t = std::slice::from_raw_parts(horizons, len).to_vec();
    Ok(SurvivalQuery::new(t)?)
}

fn check_len(model: &CorrcoxModel, len: usize) -> Result<(), Failure> {
    if len != model.spec.n() {
        return Err(
            Error::Argument(format!("{len} horizons for {} components", model.spec.n())).into(),
        );
    }
    Ok(())
}

/// Parses a NUL-terminated UTF-8 JSON spec into a new model handle written to `*out`.
/// `strict` rejects unknown keys.
///
/// # Safety
/// `json` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn corrcox_model_from_json(
    json: *const c_char,
    strict: bool,
    out: *mut *mut CorrcoxModel,
) -> CorrcoxStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        *out = ptr::null_mut();
        if json.is_null() {
            return Err(Failure::Null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| Error::Model(format!("spec is not UTF-8: {e}")))?;
        let loaded = parse_spec(text, strict)?;
        let model = CorrcoxModel {
            spec: loaded.model,
            hash: CString::new(loaded.hash).unwrap_or_default(),
        };
        *out = Box::into_raw(Box::new(model));
        Ok(())
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `model` must come from [`corrcox_model_from_json`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn corrcox_model_free(model: *mut CorrcoxModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of components `n`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn corrcox_model_components(
    model: *const CorrcoxModel,
    out: *mut usize,
) -> CorrcoxStatus {
    guard(|| {
        let m = model_ref(model)?;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        *out = m.spec.n();
        Ok(())
    })
}

/// Hex SHA-256 of the canonicalized spec; the string lives as long as the handle.
///
/// # Safety
/// `model` must be a valid handle or null (which returns null).
#[no_mangle]
pub unsafe extern "C" fn corrcox_model_hash(model: *const CorrcoxModel) -> *const c_char {
    model.as_ref().map_or(ptr::null(), |m| m.hash.as_ptr())
}

unsafe fn survival_impl(
    model: *const CorrcoxModel,
    horizons: *const f64,
    len: usize,
    out: *mut f64,
    mobius: bool,
) -> CorrcoxStatus {
    guard(|| {
        let m = model_ref(model)?;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        check_len(m, len)?;
        let q = horizons_query(horizons, len)?;
        let (nested, mob) = analytic_survival(&m.spec, &q)?;
        *out = if mobius { mob } else { nested };
        Ok(())
    })
}

/// Joint survival `P(tau^1 > t_1, ..., tau^n > t_n)` by the nested-set formula.
///
/// # Safety
/// `horizons` must point to `len` doubles; other pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn corrcox_joint_survival(
    model: *const CorrcoxModel,
    horizons: *const f64,
    len: usize,
    out: *mut f64,
) -> CorrcoxStatus {
    survival_impl(model, horizons, len, out, false)
}

/// Joint survival from the Möbius (Marshall–Olkin style) subset decomposition.
///
/// # Safety
/// As [`corrcox_joint_survival`].
#[no_mangle]
pub unsafe extern "C" fn corrcox_joint_survival_mobius(
    model: *const CorrcoxModel,
    horizons: *const f64,
    len: usize,
    out: *mut f64,
) -> CorrcoxStatus {
    survival_impl(model, horizons, len, out, true)
}

/// Marshall–Olkin rates indexed by subset bitmask (bit `i` = component `i + 1`);
/// `out` must hold `2^n` doubles and `out[0]` is set to 0. Negative rates of an explicit
/// compensator table are reported as they are.
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn corrcox_mo_rates(
    model: *const CorrcoxModel,
    out: *mut f64,
    len: usize,
) -> CorrcoxStatus {
    guard(|| {
        let m = model_ref(model)?;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let rates = match &m.spec {
            ModelSpec::Factor(f) => {
                if !f.has_identity_deformation() {
                    return Err(Error::Unsupported(
                        "Marshall-Olkin rates need identity time deformation".into(),
                    )
                    .into());
                }
                MoRates::from_table(&build_table(f)?)?
            }
            ModelSpec::CompensatorTable(t) => MoRates::from_table(t)?,
            other => {
                return Err(Error::Unsupported(format!(
                    "Marshall-Olkin rates are not defined for {} models",
                    other.model_type()
                ))
                .into())
            }
        };
        let need = 1usize << rates.n();
        if len != need {
            return Err(Error::Argument(format!("output holds {len} doubles, need {need}")).into());
        }
        let dst = std::slice::from_raw_parts_mut(out, len);
        dst[0] = 0.0;
        for (j, r) in rates.iter() {
            dst[j.bits() as usize] = r;
        }
        Ok(())
    })
}

/// Monte Carlo joint survival; writes the Rao-Blackwell and indicator estimates.
/// `threads == 0` uses the `CORRCOX_THREADS` default. Results do not depend on `threads`.
///
/// # Safety
/// `horizons` must point to `len` doubles; output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn corrcox_mc_joint_survival(
    model: *const CorrcoxModel,
    horizons: *const f64,
    len: usize,
    paths: u64,
    seed: u64,
    threads: usize,
    rao_blackwell: *mut CorrcoxMcEstimate,
    indicator: *mut CorrcoxMcEstimate,
) -> CorrcoxStatus {
    guard(|| {
        let m = model_ref(model)?;
        if rao_blackwell.is_null() || indicator.is_null() {
            return Err(Failure::Null("estimate output"));
        }
        check_len(m, len)?;
        let q = horizons_query(horizons, len)?;
        let sim: SimModel<'_> = match &m.spec {
            ModelSpec::Factor(f) => f.into(),
            ModelSpec::ShotNoise(s) => s.into(),
            ModelSpec::MinDecomposition(d) => d.into(),
            ModelSpec::CompensatorTable(_) => {
                return Err(Error::Unsupported(
                    "a compensator table has no path law to simulate".into(),
                )
                .into())
            }
        };
        let opts = SimOptions {
            threads: (threads > 0).then_some(threads),
            ..SimOptions::default()
        };
        let est = simulation::mc_joint_survival(sim, &q, paths, &RngConfig::new(seed), &opts)?;
        let conv = |e: corrcox::McEstimate| CorrcoxMcEstimate {
            value: e.value,
            stderr: e.stderr,
            paths: e.paths,
            seed: e.seed.seed,
        };
        *rao_blackwell = conv(est.rao_blackwell);
        *indicator = conv(est.indicator);
        Ok(())
    })
}

/// Message for the last failed call on this thread (empty after a success). Valid until
/// the next corrcox call on the same thread.
#[no_mangle]
pub extern "C" fn corrcox_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}
