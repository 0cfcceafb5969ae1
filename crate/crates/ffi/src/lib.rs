//! C ABI over the `ddrj` sampler.
//!
//! Every function returns a [`DdrjStatus`]. On failure a message is kept per
//! thread and can be read with [`ddrj_last_error_message`]. Objects are
//! opaque handles created by `*_new`/`*_fit` calls and released with the
//! matching `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use ddrj::datagen::{builtin_scenario, simulate};
use ddrj::inference::{self, bma_predict, cross_validate, summarize, ModelAverage, PosteriorSummary};
use ddrj::model::{Dataset, Hyperparams, ModelPrior};
use ddrj::proposals::ProposalMode;
use ddrj::sampler::{fit, RunConfig};
use ddrj::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DdrjStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Data = 4,
    Numerical = 5,
    Io = 6,
    Panic = 7,
}

impl DdrjStatus {
    fn of(e: &Error) -> Self {
        match e {
            Error::Config(_) | Error::UnknownScenario(_) => Self::Config,
            Error::NotPositiveDefinite { .. } | Error::ZeroVariance | Error::SingleGroup => Self::Numerical,
            Error::Io { .. } => Self::Io,
            Error::InvalidInput(_) | Error::LengthMismatch { .. } | Error::DimensionMismatch(_) => {
                Self::InvalidArgument
            }
            _ => Self::Data,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

struct Failure(DdrjStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(DdrjStatus::of(&e), e.to_string())
    }
}

type FfiResult = Result<(), Failure>;

fn null() -> Failure {
    Failure(DdrjStatus::NullPointer, "null pointer argument".into())
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(DdrjStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> FfiResult) -> DdrjStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            DdrjStatus::Ok
        }
        Ok(Err(Failure(code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic");
            DdrjStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null());
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null());
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn string<'a>(p: *const c_char) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null());
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid("string is not valid UTF-8"))
}

unsafe fn write_out<T>(out: *mut T, value: T) -> FfiResult {
    if out.is_null() {
        return Err(null());
    }
    out.write(value);
    Ok(())
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn ddrj_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ddrj_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Opaque dataset handle.
pub struct DdrjDataset(Dataset);

/// Opaque fitted-model handle.
pub struct DdrjFit {
    summary: PosteriorSummary,
    average: ModelAverage,
}

/// Builds a dataset from column-major arrays. `x` is n×g, `z` is n×m with
/// entries in {-1, 0, 1}; columns are labelled `roi_1..` and `snp_1..`.
///
/// # Safety
/// Pointers must reference arrays of the stated sizes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ddrj_dataset_new(
    n: usize,
    y: *const u8,
    g: usize,
    x: *const f64,
    m: usize,
    z: *const i8,
    out: *mut *mut DdrjDataset,
) -> DdrjStatus {
    guard(|| {
        let y = slice(y, n)?.to_vec();
        let x = slice(x, n.checked_mul(g).ok_or_else(|| invalid("n*g overflows"))?)?;
        let z = slice(z, n.checked_mul(m).ok_or_else(|| invalid("n*m overflows"))?)?;
        let rois = (0..g).map(|j| x[j * n..(j + 1) * n].to_vec()).collect();
        let snps = (0..m).map(|k| z[k * n..(k + 1) * n].to_vec()).collect();
        let data = Dataset::from_columns(
            y,
            rois,
            snps,
            (1..=g).map(|j| format!("roi_{j}")).collect(),
            (1..=m).map(|k| format!("snp_{k}")).collect(),
        )?;
        write_out(out, Box::into_raw(Box::new(DdrjDataset(data))))
    })
}

/// Reads a dataset CSV (`y`, `roi_*`, `snp_*` columns).
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ddrj_dataset_read_csv(path: *const c_char, out: *mut *mut DdrjDataset) -> DdrjStatus {
    guard(|| {
        let data = ddrj::io::read_dataset(Path::new(string(path)?))?;
        write_out(out, Box::into_raw(Box::new(DdrjDataset(data))))
    })
}

/// Simulates a built-in scenario; `seed` replaces the scenario seed unless 0.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ddrj_dataset_simulate(name: *const c_char, seed: u64, out: *mut *mut DdrjDataset) -> DdrjStatus {
    guard(|| {
        let mut s = builtin_scenario(string(name)?)?;
        if seed != 0 {
            s.seed = seed;
        }
        let data = simulate(&s)?.data;
        write_out(out, Box::into_raw(Box::new(DdrjDataset(data))))
    })
}

/// # Safety
/// `data` must be null or a handle from a `ddrj_dataset_*` constructor.
#[no_mangle]
pub unsafe extern "C" fn ddrj_dataset_free(data: *mut DdrjDataset) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

/// # Safety
/// `data` must be a live handle; output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn ddrj_dataset_dims(
    data: *const DdrjDataset,
    n: *mut usize,
    g: *mut usize,
    m: *mut usize,
) -> DdrjStatus {
    guard(|| {
        let d = &data.as_ref().ok_or_else(null)?.0;
        write_out(n, d.n())?;
        write_out(g, d.g())?;
        write_out(m, d.m())
    })
}

/// Proposal modes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DdrjMode {
    DataDriven = 0,
    Uniform = 1,
}

/// Model-space priors.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DdrjModelPrior {
    UniformSize = 0,
    UniformSubset = 1,
}

/// Run settings. Optional real-valued settings are disabled with NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DdrjRunConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub chains: usize,
    pub mode: DdrjMode,
    pub var_beta: f64,
    pub var_alpha: f64,
    pub var_delta: f64,
    pub model_prior: DdrjModelPrior,
    pub preselect_threshold: f64,
    pub subsample_fraction: f64,
    pub space_prob_override: f64,
}

fn opt(v: f64) -> Option<f64> {
    (!v.is_nan()).then_some(v)
}

impl DdrjRunConfig {
    fn to_native(self) -> Result<(RunConfig, Hyperparams), Failure> {
        let run = RunConfig {
            iterations: self.iterations,
            burn_in: self.burn_in,
            thin: self.thin,
            seed: self.seed,
            mode: match self.mode {
                DdrjMode::DataDriven => ProposalMode::DataDriven,
                DdrjMode::Uniform => ProposalMode::Uniform,
            },
            preselect_threshold: opt(self.preselect_threshold),
            subsample_fraction: opt(self.subsample_fraction),
            chains: self.chains,
            space_prob_override: opt(self.space_prob_override),
        };
        run.validate()?;
        let hyper = Hyperparams {
            var_beta: self.var_beta,
            var_alpha: self.var_alpha,
            var_delta: self.var_delta,
            model_prior: match self.model_prior {
                DdrjModelPrior::UniformSize => ModelPrior::UniformSize,
                DdrjModelPrior::UniformSubset => ModelPrior::UniformSubset,
            },
        };
        hyper.validate()?;
        Ok((run, hyper))
    }
}

/// Default settings: 35000 iterations, burn-in 5000, thinning 10, one
/// data-driven chain, prior variances 25.
#[no_mangle]
pub extern "C" fn ddrj_run_config_default() -> DdrjRunConfig {
    let d = RunConfig::default();
    let h = Hyperparams::default();
    DdrjRunConfig {
        iterations: d.iterations,
        burn_in: d.burn_in,
        thin: d.thin,
        seed: d.seed,
        chains: d.chains,
        mode: DdrjMode::DataDriven,
        var_beta: h.var_beta,
        var_alpha: h.var_alpha,
        var_delta: h.var_delta,
        model_prior: DdrjModelPrior::UniformSize,
        preselect_threshold: f64::NAN,
        subsample_fraction: f64::NAN,
        space_prob_override: f64::NAN,
    }
}

/// Standardizes the ROI columns, runs the chains and keeps the posterior
/// summary and model average.
///
/// # Safety
/// `data` must be a live handle, `config` readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ddrj_fit(
    data: *const DdrjDataset,
    config: *const DdrjRunConfig,
    out: *mut *mut DdrjFit,
) -> DdrjStatus {
    guard(|| {
        let d = data.as_ref().ok_or_else(null)?.0.standardized();
        let (run, hyper) = config.as_ref().ok_or_else(null)?.to_native()?;
        let fitted = fit(&d, &hyper, &run)?;
        let handle = DdrjFit {
            summary: summarize(&fitted.traces, &d)?,
            average: ModelAverage::from_traces(&fitted.traces, &d)?,
        };
        write_out(out, Box::into_raw(Box::new(handle)))
    })
}

/// # Safety
/// `fit` must be null or a handle from [`ddrj_fit`].
#[no_mangle]
pub unsafe extern "C" fn ddrj_fit_free(fit: *mut DdrjFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// Copies inclusion probabilities into `roi_mppi[g]` and `snp_mppi[m]`.
///
/// # Safety
/// `fit` must be live; the arrays must hold `g` and `m` doubles.
#[no_mangle]
pub unsafe extern "C" fn ddrj_fit_mppi(
    fit: *const DdrjFit,
    roi_mppi: *mut f64,
    g: usize,
    snp_mppi: *mut f64,
    m: usize,
) -> DdrjStatus {
    guard(|| {
        let s = &fit.as_ref().ok_or_else(null)?.summary;
        if g != s.mppi_roi.len() || m != s.mppi_snp.len() {
            return Err(invalid(format!(
                "buffers sized {g}/{m}, fit has {}/{}",
                s.mppi_roi.len(),
                s.mppi_snp.len()
            )));
        }
        slice_mut(roi_mppi, g)?.copy_from_slice(&s.mppi_roi);
        slice_mut(snp_mppi, m)?.copy_from_slice(&s.mppi_snp);
        Ok(())
    })
}

/// Number of distinct visited models.
///
/// # Safety
/// `fit` must be live and `count` writable.
#[no_mangle]
pub unsafe extern "C" fn ddrj_fit_model_count(fit: *const DdrjFit, count: *mut usize) -> DdrjStatus {
    guard(|| write_out(count, fit.as_ref().ok_or_else(null)?.summary.models.len()))
}

/// Probability and sizes of the model at `rank` (0 = most visited). Active
/// indices (0-based) are written to `rois`/`snps` when non-null; those
/// buffers must hold at least `*n_rois` / `*n_snps` entries, which can be
/// obtained by a first call with null buffers.
///
/// # Safety
/// `fit` must be live; output pointers writable; buffers large enough.
#[no_mangle]
pub unsafe extern "C" fn ddrj_fit_model(
    fit: *const DdrjFit,
    rank: usize,
    probability: *mut f64,
    n_rois: *mut usize,
    rois: *mut usize,
    n_snps: *mut usize,
    snps: *mut usize,
) -> DdrjStatus {
    guard(|| {
        let s = &fit.as_ref().ok_or_else(null)?.summary;
        let model = s
            .models
            .get(rank)
            .ok_or_else(|| invalid(format!("rank {rank} beyond {} models", s.models.len())))?;
        write_out(probability, model.probability)?;
        write_out(n_rois, model.signature.rois.len())?;
        write_out(n_snps, model.signature.snps.len())?;
        if !rois.is_null() {
            slice_mut(rois, model.signature.rois.len())?.copy_from_slice(&model.signature.rois);
        }
        if !snps.is_null() {
            slice_mut(snps, model.signature.snps.len())?.copy_from_slice(&model.signature.snps);
        }
        Ok(())
    })
}

/// Model-averaged success probabilities for the rows of `data`, whose
/// columns are matched to the training columns by label.
///
/// # Safety
/// Handles must be live; `probabilities` must hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn ddrj_fit_predict(
    fit: *const DdrjFit,
    data: *const DdrjDataset,
    probabilities: *mut f64,
    n: usize,
) -> DdrjStatus {
    guard(|| {
        let f = fit.as_ref().ok_or_else(null)?;
        let d = &data.as_ref().ok_or_else(null)?.0;
        if n != d.n() {
            return Err(invalid(format!("buffer holds {n} rows, dataset has {}", d.n())));
        }
        let preds = bma_predict(&f.average, d)?;
        for (o, p) in slice_mut(probabilities, n)?.iter_mut().zip(preds) {
            *o = p.probability;
        }
        Ok(())
    })
}

/// Area under the ROC curve of `scores` against 0/1 `classes`.
///
/// # Safety
/// Both arrays must hold `n` entries; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ddrj_auc(scores: *const f64, classes: *const u8, n: usize, out: *mut f64) -> DdrjStatus {
    guard(|| write_out(out, inference::auc(slice(scores, n)?, slice(classes, n)?)?))
}

/// Fraction of positions where `predicted` and `actual` differ.
///
/// # Safety
/// Both arrays must hold `n` entries; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ddrj_mce(predicted: *const u8, actual: *const u8, n: usize, out: *mut f64) -> DdrjStatus {
    guard(|| write_out(out, inference::mce(slice(predicted, n)?, slice(actual, n)?)?))
}

/// Cross-validated metrics; the spreads are standard deviations across folds.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DdrjCvMetrics {
    pub mce_mean: f64,
    pub mce_sd: f64,
    pub auc_mean: f64,
    pub auc_sd: f64,
}

/// Stratified `k`-fold cross-validation.
///
/// # Safety
/// `data` must be live, `config` readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ddrj_cross_validate(
    data: *const DdrjDataset,
    config: *const DdrjRunConfig,
    k: usize,
    out: *mut DdrjCvMetrics,
) -> DdrjStatus {
    guard(|| {
        let d = &data.as_ref().ok_or_else(null)?.0;
        let (run, hyper) = config.as_ref().ok_or_else(null)?.to_native()?;
        let r = cross_validate(d, &hyper, &run, k)?;
        write_out(
            out,
            DdrjCvMetrics {
                mce_mean: r.mce_mean,
                mce_sd: r.mce_sd,
                auc_mean: r.auc_mean,
                auc_sd: r.auc_sd,
            },
        )
    })
}
