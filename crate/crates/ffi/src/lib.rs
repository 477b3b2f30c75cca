//! C ABI for windpost.
//!
//! Every function returns a [`WpStatus`]. On failure a message is kept per
//! thread and can be read with [`wp_last_error_message`]. Objects are
//! handed out as opaque pointers and must be released with the matching
//! `*_free` function. Strings returned through caller buffers are UTF-8
//! and NUL-terminated.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use windpost::data::{read_cases, DataError, Dataset};
use windpost::dists::{DistError, Gev, TruncatedNormal};
use windpost::estimation::{
    fit_gev_ml, fit_tn_min_crps, CaseSummary, EstimationError, FitOptions, FittedModel, TrainingSet,
};
use windpost::models::{build_report, run_rolling_experiment, ExperimentConfig, ModelError, Report, RunOutput};
use windpost::scoring::{self, EmpiricalEnsemble, PredictiveDist, ScoreError, WeightFn};

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Data = 4,
    Numerical = 5,
    Io = 6,
    BufferTooSmall = 7,
    Panic = 99,
}

/// A predictive distribution: truncated normal, GEV or raw ensemble.
pub struct WpDist(PredictiveDist);

/// Pooled (ensemble mean, variance, median, observation) training pairs.
pub struct WpTrainingSet {
    cases: Vec<CaseSummary>,
    k: usize,
}

/// Forecast cases loaded from a case CSV file.
pub struct WpDataset(Dataset);

/// Result of a rolling verification run.
pub struct WpRun {
    output: RunOutput,
    report: Report,
}

/// Outcome of a coefficient fit.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct WpFitInfo {
    /// Objective at the returned coefficients: mean CRPS for the truncated
    /// normal fit, mean negative log likelihood for the GEV fit.
    pub objective: f64,
    pub evaluations: u64,
    /// 0 if the optimizer ran out of evaluations.
    pub converged: i32,
}

struct Failure {
    status: WpStatus,
    message: String,
}

impl Failure {
    fn new(status: WpStatus, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    fn null(what: &str) -> Self {
        Self::new(WpStatus::NullPointer, format!("{what} is null"))
    }
}

impl From<DistError> for Failure {
    fn from(e: DistError) -> Self {
        Self::new(WpStatus::InvalidArgument, e.to_string())
    }
}

impl From<ScoreError> for Failure {
    fn from(e: ScoreError) -> Self {
        let status = match e {
            ScoreError::Dist(_)
            | ScoreError::InvalidWeight { .. }
            | ScoreError::InvalidEnsemble(_)
            | ScoreError::NoDensity
            | ScoreError::NotContinuous
            | ScoreError::LengthMismatch { .. }
            | ScoreError::EmptyCaseSet => WpStatus::InvalidArgument,
            _ => WpStatus::Numerical,
        };
        Self::new(status, e.to_string())
    }
}

impl From<EstimationError> for Failure {
    fn from(e: EstimationError) -> Self {
        let status = match e {
            EstimationError::TooFewMembers(_)
            | EstimationError::NonFiniteMember { .. }
            | EstimationError::InvalidCase { .. } => WpStatus::InvalidArgument,
            EstimationError::InsufficientData { .. } => WpStatus::Data,
            _ => WpStatus::Numerical,
        };
        Self::new(status, e.to_string())
    }
}

impl From<DataError> for Failure {
    fn from(e: DataError) -> Self {
        let status = match e {
            DataError::Io { .. } => WpStatus::Io,
            _ => WpStatus::Data,
        };
        Self::new(status, e.to_string())
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Data(d) => d.into(),
            ModelError::Estimation(d) => d.into(),
            ModelError::Score(d) => d.into(),
            ModelError::Config(_) | ModelError::EmptyThetaGrid | ModelError::ThreadPool(_) => {
                Self::new(WpStatus::Config, e.to_string())
            }
            ModelError::Io { .. } => Self::new(WpStatus::Io, e.to_string()),
            _ => Self::new(WpStatus::Data, e.to_string()),
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).expect("NUL bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> WpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            WpStatus::Ok
        }
        Ok(Err(failure)) => {
            set_last_error(&failure.message);
            failure.status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            set_last_error(&format!("internal panic: {msg}"));
            WpStatus::Panic
        }
    }
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure::null(what))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::new(WpStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

/// Copy `text` and a terminating NUL into `buf`. `needed` receives the
/// full length including the NUL, so callers can size a buffer by first
/// passing `capacity = 0`.
unsafe fn write_string(text: &str, buf: *mut c_char, capacity: usize, needed: *mut usize) -> Result<(), Failure> {
    let n = text.len() + 1;
    if !needed.is_null() {
        needed.write(n);
    }
    if capacity < n {
        return Err(Failure::new(
            WpStatus::BufferTooSmall,
            format!("buffer holds {capacity} bytes, {n} needed"),
        ));
    }
    if buf.is_null() {
        return Err(Failure::null("buf"));
    }
    ptr::copy_nonoverlapping(text.as_ptr(), buf.cast::<u8>(), text.len());
    buf.add(text.len()).write(0);
    Ok(())
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Message of the last failed call on this thread, or null after a
/// successful call. The pointer stays valid until the next call on the
/// same thread.
#[no_mangle]
pub extern "C" fn wp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn wp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Zero-truncated normal with location `mu` and scale `sigma`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn wp_dist_tn_new(mu: f64, sigma: f64, out: *mut *mut WpDist) -> WpStatus {
    guard(|| {
        let d = TruncatedNormal::new(mu, sigma)?;
        write_out(out, boxed(WpDist(d.into())), "out")
    })
}

/// GEV law with location `mu`, scale `sigma` and shape `xi`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn wp_dist_gev_new(mu: f64, sigma: f64, xi: f64, out: *mut *mut WpDist) -> WpStatus {
    guard(|| {
        let d = Gev::new(mu, sigma, xi)?;
        write_out(out, boxed(WpDist(d.into())), "out")
    })
}

/// Empirical law of `k` ensemble members.
///
/// # Safety
/// `members` must point to `k` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wp_dist_ensemble_new(members: *const f64, k: usize, out: *mut *mut WpDist) -> WpStatus {
    guard(|| {
        let m = slice(members, k, "members")?;
        let e = EmpiricalEnsemble::new(m.to_vec())?;
        write_out(out, boxed(WpDist(e.into())), "out")
    })
}

/// # Safety
/// `dist` must be null or a pointer returned by a `wp_dist_*_new` call
/// that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn wp_dist_free(dist: *mut WpDist) {
    free(dist);
}

/// # Safety
/// `dist` must be a live distribution handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn wp_dist_cdf(dist: *const WpDist, z: f64, out: *mut f64) -> WpStatus {
    guard(|| {
        let d = deref(dist, "dist")?;
        if z.is_nan() {
            return Err(Failure::new(WpStatus::InvalidArgument, "z is NaN"));
        }
        write_out(out, d.0.cdf(z), "out")
    })
}

/// # Safety
/// `dist` must be a live distribution handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn wp_dist_quantile(dist: *const WpDist, p: f64, out: *mut f64) -> WpStatus {
    guard(|| {
        let d = deref(dist, "dist")?;
        write_out(out, d.0.quantile(p)?, "out")
    })
}

/// # Safety
/// `dist` must be a live distribution handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn wp_crps(dist: *const WpDist, y: f64, out: *mut f64) -> WpStatus {
    guard(|| {
        let d = deref(dist, "dist")?;
        write_out(out, scoring::crps(&d.0, y)?, "out")
    })
}

/// Threshold-weighted CRPS with weight 1{z ≥ r}.
///
/// # Safety
/// `dist` must be a live distribution handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn wp_twcrps_indicator(dist: *const WpDist, y: f64, r: f64, out: *mut f64) -> WpStatus {
    guard(|| {
        let d = deref(dist, "dist")?;
        let w = WeightFn::indicator(r)?;
        write_out(out, scoring::twcrps(&d.0, y, &w)?, "out")
    })
}

/// Threshold-weighted CRPS with weight Φ((z − mu)/sigma).
///
/// # Safety
/// `dist` must be a live distribution handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn wp_twcrps_gaussian(
    dist: *const WpDist,
    y: f64,
    mu: f64,
    sigma: f64,
    out: *mut f64,
) -> WpStatus {
    guard(|| {
        let d = deref(dist, "dist")?;
        let w = WeightFn::gaussian_cdf(mu, sigma)?;
        write_out(out, scoring::twcrps(&d.0, y, &w)?, "out")
    })
}

/// Logarithmic score; `+inf` when the density vanishes at `y`. Not
/// defined for ensembles.
///
/// # Safety
/// `dist` must be a live distribution handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn wp_log_score(dist: *const WpDist, y: f64, out: *mut f64) -> WpStatus {
    guard(|| {
        let d = deref(dist, "dist")?;
        write_out(out, scoring::log_score(&d.0, y)?, "out")
    })
}

/// Probability integral transform. Not defined for ensembles.
///
/// # Safety
/// `dist` must be a live distribution handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn wp_pit(dist: *const WpDist, y: f64, out: *mut f64) -> WpStatus {
    guard(|| {
        let d = deref(dist, "dist")?;
        write_out(out, scoring::pit(&d.0, y)?, "out")
    })
}

/// Empty training set for ensembles of `k` members.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wp_training_new(k: usize, out: *mut *mut WpTrainingSet) -> WpStatus {
    guard(|| write_out(out, boxed(WpTrainingSet { cases: Vec::new(), k }), "out"))
}

/// # Safety
/// `set` must be null or a live training set handle.
#[no_mangle]
pub unsafe extern "C" fn wp_training_free(set: *mut WpTrainingSet) {
    free(set);
}

/// Append one pair given by its ensemble summaries.
///
/// # Safety
/// `set` must be a live training set handle.
#[no_mangle]
pub unsafe extern "C" fn wp_training_push_summary(
    set: *mut WpTrainingSet,
    x_bar: f64,
    s2: f64,
    x_med: f64,
    y: f64,
) -> WpStatus {
    guard(|| {
        let s = set.as_mut().ok_or_else(|| Failure::null("set"))?;
        s.cases.push(CaseSummary { x_bar, s2, x_med, y });
        Ok(())
    })
}

/// Append one pair given by its raw members.
///
/// # Safety
/// `set` must be a live training set handle and `members` must point to
/// `k` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn wp_training_push_members(
    set: *mut WpTrainingSet,
    members: *const f64,
    k: usize,
    y: f64,
) -> WpStatus {
    guard(|| {
        let s = set.as_mut().ok_or_else(|| Failure::null("set"))?;
        let m = slice(members, k, "members")?;
        s.cases.push(CaseSummary::from_members(m, y)?);
        Ok(())
    })
}

/// # Safety
/// `set` must be a live training set handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn wp_training_len(set: *const WpTrainingSet, out: *mut usize) -> WpStatus {
    guard(|| write_out(out, deref(set, "set")?.cases.len(), "out"))
}

fn fit_options(n_min: usize, seed: u64) -> FitOptions {
    FitOptions {
        n_min,
        seed,
        ..FitOptions::default()
    }
}

fn fit_info(m: &FittedModel) -> WpFitInfo {
    WpFitInfo {
        objective: m.objective,
        evaluations: m.evaluations as u64,
        converged: i32::from(m.converged),
    }
}

fn keep_best(r: Result<FittedModel, EstimationError>) -> Result<FittedModel, EstimationError> {
    match r {
        Err(EstimationError::NotConverged { best }) => Ok(*best),
        other => other,
    }
}

/// Minimum-CRPS fit of the truncated normal regression
/// μ = a + b·x̄, σ² = c + d·S². Writes (a, b, c, d) to `coef`.
/// A fit that exhausts its evaluation budget still returns its best point
/// with `info.converged = 0`.
///
/// # Safety
/// `set` must be a live training set handle, `coef` must point to 4
/// writable doubles and `info` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn wp_fit_tn(
    set: *const WpTrainingSet,
    n_min: usize,
    seed: u64,
    coef: *mut f64,
    info: *mut WpFitInfo,
) -> WpStatus {
    guard(|| {
        let s = deref(set, "set")?;
        if coef.is_null() {
            return Err(Failure::null("coef"));
        }
        let train = TrainingSet::new(s.cases.clone(), s.k)?;
        let m = keep_best(fit_tn_min_crps(&train, None, &fit_options(n_min, seed)))?;
        let c = m.tn().expect("tn fit");
        std::slice::from_raw_parts_mut(coef, 4).copy_from_slice(&[c.a, c.b, c.c, c.d]);
        if !info.is_null() {
            info.write(fit_info(&m));
        }
        Ok(())
    })
}

/// Maximum-likelihood fit of the GEV regression μ = μ₀ + μ₁·x̄,
/// σ = σ₀ + σ₁·x̄ with constant ξ. Writes (μ₀, μ₁, σ₀, σ₁, ξ) to `coef`.
///
/// # Safety
/// `set` must be a live training set handle, `coef` must point to 5
/// writable doubles and `info` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn wp_fit_gev(
    set: *const WpTrainingSet,
    n_min: usize,
    seed: u64,
    coef: *mut f64,
    info: *mut WpFitInfo,
) -> WpStatus {
    guard(|| {
        let s = deref(set, "set")?;
        if coef.is_null() {
            return Err(Failure::null("coef"));
        }
        let train = TrainingSet::new(s.cases.clone(), s.k)?;
        let m = keep_best(fit_gev_ml(&train, None, &fit_options(n_min, seed)))?;
        let c = m.gev().expect("gev fit");
        std::slice::from_raw_parts_mut(coef, 5).copy_from_slice(&[c.mu0, c.mu1, c.sigma0, c.sigma1, c.xi]);
        if !info.is_null() {
            info.write(fit_info(&m));
        }
        Ok(())
    })
}

/// Load a case CSV file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn wp_dataset_read(path: *const c_char, out: *mut *mut WpDataset) -> WpStatus {
    guard(|| {
        let p = str_arg(path, "path")?;
        let d = read_cases(Path::new(p))?;
        write_out(out, boxed(WpDataset(d)), "out")
    })
}

/// # Safety
/// `dataset` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn wp_dataset_free(dataset: *mut WpDataset) {
    free(dataset);
}

/// # Safety
/// `dataset` must be a live dataset handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn wp_dataset_len(dataset: *const WpDataset, out: *mut usize) -> WpStatus {
    guard(|| write_out(out, deref(dataset, "dataset")?.0.len(), "out"))
}

/// Rolling-window fit and verification of all forecasters. `config_toml`
/// is the text of a configuration file, or null for the defaults.
///
/// # Safety
/// `dataset` must be a live dataset handle, `config_toml` null or a
/// NUL-terminated string, and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn wp_run(
    dataset: *const WpDataset,
    config_toml: *const c_char,
    out: *mut *mut WpRun,
) -> WpStatus {
    guard(|| {
        let d = deref(dataset, "dataset")?;
        let config = if config_toml.is_null() {
            ExperimentConfig::default()
        } else {
            ExperimentConfig::from_toml(str_arg(config_toml, "config_toml")?).map_err(ModelError::from)?
        };
        let output = run_rolling_experiment(&d.0, &config)?;
        let report = build_report(&output.records, &config.table_weights(), &config.sweep_thresholds)?;
        write_out(out, boxed(WpRun { output, report }), "out")
    })
}

/// # Safety
/// `run` must be null or a live run handle.
#[no_mangle]
pub unsafe extern "C" fn wp_run_free(run: *mut WpRun) {
    free(run);
}

/// Score table as CSV.
///
/// # Safety
/// `run` must be a live run handle, `buf` must hold `capacity` writable
/// bytes (may be null when `capacity` is 0) and `needed` null or writable.
#[no_mangle]
pub unsafe extern "C" fn wp_run_scores_csv(
    run: *const WpRun,
    buf: *mut c_char,
    capacity: usize,
    needed: *mut usize,
) -> WpStatus {
    guard(|| {
        let r = deref(run, "run")?;
        write_string(&r.report.table.to_csv(), buf, capacity, needed)
    })
}

/// Per-case forecast records as CSV.
///
/// # Safety
/// As for [`wp_run_scores_csv`].
#[no_mangle]
pub unsafe extern "C" fn wp_run_records_csv(
    run: *const WpRun,
    buf: *mut c_char,
    capacity: usize,
    needed: *mut usize,
) -> WpStatus {
    guard(|| {
        let r = deref(run, "run")?;
        write_string(&r.output.records.to_csv(), buf, capacity, needed)
    })
}

/// Write every report file into the existing directory `dir`.
///
/// # Safety
/// `run` must be a live run handle and `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn wp_run_write_report(run: *const WpRun, dir: *const c_char) -> WpStatus {
    guard(|| {
        let r = deref(run, "run")?;
        let d = str_arg(dir, "dir")?;
        r.report.write_to_dir(Path::new(d))?;
        Ok(())
    })
}
