//! C ABI over `certiverify`.
//!
//! Datasets and certifiers are opaque handles created by `cv_*_new` style
//! functions and released with the matching `cv_*_free`. Every fallible call
//! returns a [`CvStatus`]; on failure the message is available from
//! [`cv_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use certiverify::correction::{strong_correct_max, strong_correct_sum, weak_correct_general, weak_correct_monotone};
use certiverify::harness::{parse_params, run_trials, AdversaryModel, CorrectionMode, ExperimentConfig, SchemeId, Task};
use certiverify::{load_dataset, Certifier, Dataset, Error, GroundTruth, Verdict, VerificationOracle};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvStatus {
    CvOk = 0,
    CvNullPointer = 1,
    CvInvalidInput = 2,
    CvParseError = 3,
    CvInfeasible = 4,
    CvUnbounded = 5,
    CvCorrectionFailure = 6,
    CvConfigError = 7,
    CvIoError = 8,
    CvPanic = 9,
}

/// A dataset together with its ground-truth validity mask.
pub struct CvDataset {
    dataset: Dataset,
    truth: GroundTruth,
}

/// A certification scheme bound to `eps` and `delta`.
pub struct CvCertifier {
    scheme: SchemeId,
    inner: Box<dyn Certifier>,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CvCertifyResult {
    /// 1 when certified, 0 when invalid records were found.
    pub certified: i32,
    /// 1 when `f` is zero and the guarantee is vacuous.
    pub vacuous: i32,
    /// The certified value; NaN when invalid records were found.
    pub value: f64,
    pub invalid_count: u64,
    /// Smallest invalid id found, or -1.
    pub first_invalid_id: i64,
    pub verifications: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CvCorrectResult {
    pub value: f64,
    pub verifications: u64,
    pub rounds: u64,
    pub catches: u64,
    pub removed_count: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CvTrialStats {
    pub trials: u64,
    pub failures: u64,
    pub correction_failures: u64,
    pub failure_rate: f64,
    pub mean_verifications: f64,
    pub max_verifications: u64,
    pub mean_invalid_found: f64,
    pub mean_rounds: f64,
    pub budget_violations: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &Error) -> CvStatus {
    match err {
        Error::Input(_) => CvStatus::CvInvalidInput,
        Error::Parse { .. } => CvStatus::CvParseError,
        Error::Infeasible => CvStatus::CvInfeasible,
        Error::Unbounded => CvStatus::CvUnbounded,
        Error::CorrectionFailure(_) => CvStatus::CvCorrectionFailure,
        Error::Config(_) => CvStatus::CvConfigError,
        Error::Io { .. } => CvStatus::CvIoError,
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

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> CvStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => CvStatus::CvOk,
        Ok(Err(Failure::Null(what))) => {
            set_last_error(&format!("{what} is null"));
            CvStatus::CvNullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_last_error(&e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_last_error("internal panic");
            CvStatus::CvPanic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Lib(Error::Input(format!("{what} is not UTF-8"))))
}

unsafe fn opt_str_arg<'a>(p: *const c_char, what: &'static str) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        Ok(None)
    } else {
        str_arg(p, what).map(Some)
    }
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

/// Message of the last failed call on this thread; empty if none. The
/// pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn cv_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Builds a scalar dataset with ids `0..n`; ids in `invalid_ids` are invalid.
///
/// # Safety
/// `values` must point to `n` doubles and `invalid_ids` to `n_invalid`
/// sizes (either may be null when its length is 0). `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cv_dataset_from_scalars(
    values: *const f64,
    n: usize,
    invalid_ids: *const usize,
    n_invalid: usize,
    out: *mut *mut CvDataset,
) -> CvStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let values = slice_arg(values, n, "values")?;
        let invalid = slice_arg(invalid_ids, n_invalid, "invalid_ids")?;
        if let Some(&id) = invalid.iter().find(|&&id| id >= n) {
            return Err(Error::Input(format!("invalid id {id} is out of range")).into());
        }
        let dataset = Dataset::from_scalars(values)?;
        let truth = GroundTruth::with_invalid(n, invalid);
        *out = Box::into_raw(Box::new(CvDataset { dataset, truth }));
        Ok(())
    })
}

/// Loads a JSON dataset document.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cv_dataset_load(path: *const c_char, out: *mut *mut CvDataset) -> CvStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let (dataset, truth) = load_dataset(str_arg(path, "path")?)?;
        *out = Box::into_raw(Box::new(CvDataset { dataset, truth }));
        Ok(())
    })
}

/// Number of records, or 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cv_dataset_len(ds: *const CvDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.dataset.len())
}

/// Number of invalid records in the ground truth.
///
/// # Safety
/// `ds` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cv_dataset_invalid_count(ds: *const CvDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.truth.invalid_ids().len())
}

/// # Safety
/// `ds` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cv_dataset_free(ds: *mut CvDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Creates a certifier by scheme name (`sum`, `max`, `max-of-sums`,
/// `average`, `packing`, `covering`, `general-lp`, `lipschitz-tsp`,
/// `lipschitz-steiner`).
///
/// # Safety
/// `scheme` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cv_certifier_new(scheme: *const c_char, eps: f64, delta: f64, out: *mut *mut CvCertifier) -> CvStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let scheme = SchemeId::parse(str_arg(scheme, "scheme")?)?;
        certiverify::numeric::certification_sample_count(eps, delta)?;
        *out = Box::into_raw(Box::new(CvCertifier {
            scheme,
            inner: scheme.certifier(eps, delta),
        }));
        Ok(())
    })
}

/// # Safety
/// `cert` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cv_certifier_free(cert: *mut CvCertifier) {
    if !cert.is_null() {
        drop(Box::from_raw(cert));
    }
}

/// `f` on all records of the dataset.
///
/// # Safety
/// `cert` and `ds` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cv_evaluate(cert: *const CvCertifier, ds: *const CvDataset, out: *mut f64) -> CvStatus {
    guard(|| {
        let (cert, ds, out) = (ref_arg(cert, "cert")?, ref_arg(ds, "ds")?, out_arg(out, "out")?);
        cert.scheme.check_dataset(&ds.dataset)?;
        *out = cert.inner.evaluate(&ds.dataset)?;
        Ok(())
    })
}

/// One certification run against the dataset's ground truth, charged under
/// the weak budget.
///
/// # Safety
/// `cert` and `ds` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cv_certify(
    cert: *const CvCertifier,
    ds: *const CvDataset,
    seed: u64,
    out: *mut CvCertifyResult,
) -> CvStatus {
    guard(|| {
        let (cert, ds, out) = (ref_arg(cert, "cert")?, ref_arg(ds, "ds")?, out_arg(out, "out")?);
        cert.scheme.check_dataset(&ds.dataset)?;
        let mut oracle = VerificationOracle::new(ds.truth.clone(), certiverify::BudgetMode::Weak);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let outcome = cert.inner.certify(&ds.dataset, &mut oracle, &mut rng)?;
        let ids = outcome.invalid_ids();
        *out = CvCertifyResult {
            certified: outcome.is_certified() as i32,
            vacuous: outcome.vacuous as i32,
            value: match outcome.verdict {
                Verdict::Certified(v) => v,
                _ => f64::NAN,
            },
            invalid_count: ids.len() as u64,
            first_invalid_id: ids.iter().min().map_or(-1, |&id| id as i64),
            verifications: outcome.verifications_used,
        };
        Ok(())
    })
}

/// Runs a correction scheme (`weak`, `weak-general`, `strong-sum`,
/// `strong-max`). `scheme` names the certifier for weak modes and may be
/// null for the default (sum, or max for strong-max).
///
/// # Safety
/// `mode` must be a NUL-terminated string, `scheme` null or one, `ds` a live
/// handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cv_correct(
    mode: *const c_char,
    scheme: *const c_char,
    ds: *const CvDataset,
    eps: f64,
    delta: f64,
    seed: u64,
    out: *mut CvCorrectResult,
) -> CvStatus {
    guard(|| {
        let mode = CorrectionMode::parse(str_arg(mode, "mode")?)?;
        let scheme = match opt_str_arg(scheme, "scheme")? {
            Some(s) => SchemeId::parse(s)?,
            None if mode == CorrectionMode::StrongMax => SchemeId::Max,
            None => SchemeId::Sum,
        };
        let (ds, out) = (ref_arg(ds, "ds")?, out_arg(out, "out")?);
        Task::Correct(mode, scheme).validate()?;
        scheme.check_dataset(&ds.dataset)?;
        let mut oracle = VerificationOracle::new(ds.truth.clone(), mode.budget());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let result = match mode {
            CorrectionMode::Weak | CorrectionMode::WeakGeneral => {
                let certifier = scheme.certifier(eps, 1.0 / 3.0);
                let r = if mode == CorrectionMode::Weak {
                    weak_correct_monotone(certifier.as_ref(), &ds.dataset, &mut oracle, delta, &mut rng)?
                } else {
                    weak_correct_general(certifier.as_ref(), &ds.dataset, &mut oracle, delta, &mut rng)?
                };
                CvCorrectResult {
                    value: r.value,
                    verifications: r.verifications,
                    rounds: r.rounds,
                    catches: r.catches,
                    removed_count: r.removed.len() as u64,
                }
            }
            CorrectionMode::StrongSum => {
                let r = strong_correct_sum(&ds.dataset, &mut oracle, eps, delta, &mut rng)?;
                CvCorrectResult {
                    value: r.estimate,
                    verifications: oracle.ledger().verifications_charged,
                    rounds: r.samples,
                    ..CvCorrectResult::default()
                }
            }
            CorrectionMode::StrongMax => {
                let r = strong_correct_max(&ds.dataset, &mut oracle, &mut rng)?;
                CvCorrectResult {
                    value: r.value,
                    verifications: oracle.ledger().verifications_charged,
                    rounds: r.iterations,
                    ..CvCorrectResult::default()
                }
            }
        };
        *out = result;
        Ok(())
    })
}

/// Runs a seeded experiment. `mode` null means certification with
/// `scheme`; otherwise a correction. `params` is a comma-separated
/// `KEY=VALUE` list or null. `ds` may be null for generative adversaries.
///
/// # Safety
/// String arguments must be NUL-terminated (or null where allowed), `ds`
/// null or a live handle, and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cv_run_trials(
    scheme: *const c_char,
    mode: *const c_char,
    adversary: *const c_char,
    params: *const c_char,
    ds: *const CvDataset,
    eps: f64,
    delta: f64,
    trials: u64,
    seed: u64,
    out: *mut CvTrialStats,
) -> CvStatus {
    guard(|| {
        let scheme = SchemeId::parse(str_arg(scheme, "scheme")?)?;
        let task = match opt_str_arg(mode, "mode")? {
            Some(m) => Task::Correct(CorrectionMode::parse(m)?, scheme),
            None => Task::Certify(scheme),
        };
        let params = parse_params(opt_str_arg(params, "params")?)?;
        let adversary = AdversaryModel::parse(str_arg(adversary, "adversary")?, &params)?;
        let out = out_arg(out, "out")?;
        let base = ds.as_ref().map(|d| (d.dataset.clone(), d.truth.clone()));
        let s = run_trials(&ExperimentConfig {
            task,
            adversary,
            eps,
            delta,
            trials,
            seed,
            base,
        })?;
        *out = CvTrialStats {
            trials: s.trials,
            failures: s.failures,
            correction_failures: s.correction_failures,
            failure_rate: s.failure_rate,
            mean_verifications: s.mean_verifications,
            max_verifications: s.max_verifications,
            mean_invalid_found: s.mean_invalid_found,
            mean_rounds: s.mean_rounds,
            budget_violations: s.budget_violations,
        };
        Ok(())
    })
}
