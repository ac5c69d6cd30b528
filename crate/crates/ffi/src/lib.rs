//! C interface to `qmeasure`.
//!
//! Objects are opaque handles created by `qm_*_new`/`qm_analyze` and released
//! with the matching `qm_*_free`. Every fallible call returns a `QmStatus`;
//! on failure the message is available from `qm_last_error`. Complex numbers
//! are passed as interleaved `(re, im)` pairs of doubles, matrices row-major.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use qmeasure::entanglement::er_pure;
use qmeasure::linalg::{ComplexMatrix, C64};
use qmeasure::measurement::{build_controlled_shift, MeasurementModel, ScenarioConfig};
use qmeasure::states::{DensityMatrix, PureState};
use qmeasure::verify::{analyze, Relation, ScenarioAnalysis, SuiteConfig, Verdict};
use qmeasure::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidState = 3,
    InvalidModel = 4,
    Config = 5,
    Numerical = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// Verdict of one relation record.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QmVerdict {
    Holds = 0,
    Violated = 1,
    Inconclusive = 2,
}

/// A measurement scenario.
pub struct QmModel {
    model: MeasurementModel,
    seed: u64,
}

/// Quantities and relation records for one scenario.
pub struct QmReport {
    analysis: ScenarioAnalysis,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(e: &Error) -> QmStatus {
    match e {
        Error::InvalidState(_) => QmStatus::InvalidState,
        Error::InvalidModel(_) | Error::DimensionError { .. } => QmStatus::InvalidModel,
        Error::Config(_) | Error::Json(_) | Error::Io(_) => QmStatus::Config,
        Error::DimensionMismatch(_) => QmStatus::InvalidArgument,
        _ => QmStatus::Numerical,
    }
}

/// Runs `f`, recording errors and turning panics into `QmStatus::Panic`.
fn guard(f: impl FnOnce() -> Result<(), QmStatus>) -> QmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QmStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            QmStatus::Panic
        }
    }
}

fn lift<T>(r: qmeasure::Result<T>) -> Result<T, QmStatus> {
    r.map_err(|e| {
        set_error(e.to_string());
        status_of(&e)
    })
}

fn null() -> QmStatus {
    set_error("null pointer argument");
    QmStatus::NullPointer
}

unsafe fn complex_slice(data: *const f64, len: usize) -> Result<Vec<C64>, QmStatus> {
    if data.is_null() {
        return Err(null());
    }
    let raw = std::slice::from_raw_parts(data, 2 * len);
    Ok(raw.chunks_exact(2).map(|p| C64::new(p[0], p[1])).collect())
}

/// Copies `text` plus a terminating NUL into `buf` when it fits; `needed`
/// receives the full size including the NUL either way.
unsafe fn write_text(text: &str, buf: *mut c_char, len: usize, needed: *mut usize) -> Result<(), QmStatus> {
    let size = text.len() + 1;
    if !needed.is_null() {
        *needed = size;
    }
    if buf.is_null() || len < size {
        set_error(format!("buffer of {len} bytes, {size} needed"));
        return Err(QmStatus::BufferTooSmall);
    }
    ptr::copy_nonoverlapping(text.as_ptr(), buf as *mut u8, text.len());
    *buf.add(text.len()) = 0;
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of the last failed call on this thread.
///
/// # Safety
/// `buf` must hold `len` bytes; `needed` may be null.
#[no_mangle]
pub unsafe extern "C" fn qm_last_error(buf: *mut c_char, len: usize, needed: *mut usize) -> QmStatus {
    let msg = LAST_ERROR.with(|e| e.borrow().clone());
    match write_text(&msg, buf, len, needed) {
        Ok(()) => QmStatus::Ok,
        Err(s) => s,
    }
}

/// Controlled-shift scenario with `m` system amplitudes and an `n × n`
/// apparatus density matrix.
///
/// # Safety
/// `amplitudes` must hold `2m` doubles, `apparatus` `2n²` doubles, and `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn qm_model_new(
    m: usize,
    n: usize,
    amplitudes: *const f64,
    apparatus: *const f64,
    seed: u64,
    out: *mut *mut QmModel,
) -> QmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        *out = ptr::null_mut();
        if m == 0 || n == 0 {
            set_error("dimensions must be positive");
            return Err(QmStatus::InvalidArgument);
        }
        let amps = complex_slice(amplitudes, m)?;
        let entries = complex_slice(apparatus, n * n)?;
        let rho = lift(ComplexMatrix::new(n, n, entries).and_then(DensityMatrix::new))?;
        let model = lift(build_controlled_shift(m, n, &amps, rho))?;
        *out = Box::into_raw(Box::new(QmModel { model, seed }));
        Ok(())
    })
}

/// Scenario from a JSON scenario document.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qm_model_from_json(json: *const c_char, out: *mut *mut QmModel) -> QmStatus {
    guard(|| {
        if out.is_null() || json.is_null() {
            return Err(null());
        }
        *out = ptr::null_mut();
        let text = CStr::from_ptr(json).to_str().map_err(|_| {
            set_error("scenario is not UTF-8");
            QmStatus::InvalidArgument
        })?;
        let cfg = lift(ScenarioConfig::from_json(text))?;
        let model = lift(cfg.build())?;
        *out = Box::into_raw(Box::new(QmModel { model, seed: cfg.seed }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from `qm_model_new` or `qm_model_from_json`, or be null.
#[no_mangle]
pub unsafe extern "C" fn qm_model_free(model: *mut QmModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Computes every quantity and relation record for `model`.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qm_analyze(model: *const QmModel, out: *mut *mut QmReport) -> QmStatus {
    guard(|| {
        if model.is_null() || out.is_null() {
            return Err(null());
        }
        *out = ptr::null_mut();
        let m = &*model;
        let analysis = lift(analyze(&m.model, m.seed, &SuiteConfig::default()))?;
        *out = Box::into_raw(Box::new(QmReport { analysis }));
        Ok(())
    })
}

/// # Safety
/// `report` must come from `qm_analyze`, or be null.
#[no_mangle]
pub unsafe extern "C" fn qm_report_free(report: *mut QmReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Named scalar quantity, e.g. `"information_gain"` or `"disturbance"`.
///
/// # Safety
/// `report` must be live, `name` NUL-terminated, `value` writable.
#[no_mangle]
pub unsafe extern "C" fn qm_report_quantity(report: *const QmReport, name: *const c_char, value: *mut f64) -> QmStatus {
    guard(|| {
        if report.is_null() || name.is_null() || value.is_null() {
            return Err(null());
        }
        let key = CStr::from_ptr(name).to_string_lossy();
        match (*report).analysis.quantities.fields().into_iter().find(|(n, _)| *n == key) {
            Some((_, v)) => {
                *value = v;
                Ok(())
            }
            None => {
                set_error(format!("unknown quantity '{key}'"));
                Err(QmStatus::InvalidArgument)
            }
        }
    })
}

/// Slack and verdict of relation `letter` (`'a'` to `'m'`).
///
/// # Safety
/// `report` must be live; `slack` and `verdict` writable.
#[no_mangle]
pub unsafe extern "C" fn qm_report_relation(
    report: *const QmReport,
    letter: c_char,
    slack: *mut f64,
    verdict: *mut QmVerdict,
) -> QmStatus {
    guard(|| {
        if report.is_null() || slack.is_null() || verdict.is_null() {
            return Err(null());
        }
        let wanted = (letter as u8 as char).to_ascii_lowercase();
        let rel = Relation::ALL.into_iter().find(|r| r.letter().starts_with(wanted));
        let rec = rel.and_then(|rel| (*report).analysis.records.iter().find(|r| r.relation == rel));
        let Some(rec) = rec else {
            set_error(format!("unknown relation '{wanted}'"));
            return Err(QmStatus::InvalidArgument);
        };
        *slack = rec.slack;
        *verdict = match rec.verdict {
            Verdict::Holds => QmVerdict::Holds,
            Verdict::Violated => QmVerdict::Violated,
            Verdict::Inconclusive => QmVerdict::Inconclusive,
        };
        Ok(())
    })
}

/// Number of violated relations.
///
/// # Safety
/// `report` must be live and `count` writable.
#[no_mangle]
pub unsafe extern "C" fn qm_report_violations(report: *const QmReport, count: *mut usize) -> QmStatus {
    guard(|| {
        if report.is_null() || count.is_null() {
            return Err(null());
        }
        *count = (*report).analysis.violations();
        Ok(())
    })
}

/// The whole report as JSON. Call with a null `buf` to learn the size.
///
/// # Safety
/// `report` must be live; `buf` must hold `len` bytes or be null.
#[no_mangle]
pub unsafe extern "C" fn qm_report_json(report: *const QmReport, buf: *mut c_char, len: usize, needed: *mut usize) -> QmStatus {
    guard(|| {
        if report.is_null() {
            return Err(null());
        }
        let text = lift(serde_json::to_string(&(*report).analysis).map_err(Error::from))?;
        write_text(&text, buf, len, needed)
    })
}

/// Relative entropy of entanglement of a pure state on `d_a × d_b`.
///
/// # Safety
/// `amplitudes` must hold `2 d_a d_b` doubles and `value` be writable.
#[no_mangle]
pub unsafe extern "C" fn qm_er_pure(amplitudes: *const f64, d_a: usize, d_b: usize, value: *mut f64) -> QmStatus {
    guard(|| {
        if value.is_null() {
            return Err(null());
        }
        let amps = complex_slice(amplitudes, d_a * d_b)?;
        let psi = lift(PureState::new(amps))?;
        *value = lift(er_pure(&psi, [d_a, d_b]))?;
        Ok(())
    })
}
