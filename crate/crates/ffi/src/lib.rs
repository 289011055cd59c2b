//! C ABI over `mmsa`.
//!
//! Every fallible function returns an [`MmsaStatus`]; on failure the message
//! is available from [`mmsa_last_error`] on the same thread. Models and
//! datasets are opaque handles released with their `_free` function. Output
//! parameters are written only on success.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use mmsa::data::AlignedSegment;
use mmsa::eval::{mean_abs_error, pearson_cc, wilcoxon_rank_sum, wilcoxon_signed_rank, PMethod};
use mmsa::labels::{intensity_of, polarity_of, Polarity};
use mmsa::models::{build_model, Hyperparameters, ModelSpec, Network};
use mmsa::training::{train, TrainConfig};
use mmsa::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MmsaStatus {
    Ok = 0,
    NullPointer = 1,
    /// Bad argument value, shape mismatch or empty input.
    InvalidArgument = 2,
    /// Malformed input file or record.
    Parse = 3,
    /// Unknown model kind, task set or invalid settings.
    Config = 4,
    Io = 5,
    Checkpoint = 6,
    /// Correlation of a constant series.
    Undefined = 7,
    OutOfRange = 8,
    /// A Rust panic was caught at the boundary.
    Internal = 9,
}

/// Significance test variant.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MmsaTest {
    RankSum = 0,
    SignedRank = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct MmsaTestOutcome {
    pub statistic: f64,
    /// Two-sided.
    pub p_value: f64,
    /// 1 when the p-value is exact, 0 for the normal approximation.
    pub exact: i32,
}

/// One prediction. Absent heads leave their `has_` flag at 0.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct MmsaPrediction {
    pub score: f64,
    pub has_polarity: i32,
    /// Probability of positive polarity.
    pub polarity: f64,
    pub has_intensity: i32,
    /// Neutral, weak, medium, strong.
    pub intensity: [f64; 4],
}

/// Opaque model handle.
pub struct MmsaModel {
    inner: Network,
}

/// Opaque handle to word-aligned segments.
pub struct MmsaDataset {
    inner: Vec<AlignedSegment>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> MmsaStatus {
    match e {
        Error::Dimension { .. } | Error::Contract(_) | Error::Domain(_) | Error::Empty { .. } => {
            MmsaStatus::InvalidArgument
        }
        Error::Parse { .. } | Error::Schema { .. } | Error::Manifest(_) | Error::Json(_) => MmsaStatus::Parse,
        Error::Spec(_) | Error::Config(_) => MmsaStatus::Config,
        Error::Io { .. } => MmsaStatus::Io,
        Error::Checkpoint(_) => MmsaStatus::Checkpoint,
        Error::UndefinedCorrelation(_) => MmsaStatus::Undefined,
    }
}

struct Fail(MmsaStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> MmsaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MmsaStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal error: {msg}"));
            MmsaStatus::Internal
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(MmsaStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(MmsaStatus::InvalidArgument, format!("`{what}` is not UTF-8")))
}

unsafe fn series<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

/// Message of the last failure on this thread, or null if none. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mmsa_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mmsa_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Polarity class of a score: 0 negative, 1 positive.
///
/// # Safety
/// `out` must be null or point to writable memory.
#[no_mangle]
pub unsafe extern "C" fn mmsa_polarity_of(score: f64, out: *mut i32) -> MmsaStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = match polarity_of(score)? {
            Polarity::Negative => 0,
            Polarity::Positive => 1,
        };
        Ok(())
    })
}

/// Intensity class of a score: 0 neutral, 1 weak, 2 medium, 3 strong.
///
/// # Safety
/// `out` must be null or point to writable memory.
#[no_mangle]
pub unsafe extern "C" fn mmsa_intensity_of(score: f64, out: *mut i32) -> MmsaStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = intensity_of(score)?.index() as i32;
        Ok(())
    })
}

/// Pearson correlation of two length-`n` series.
///
/// # Safety
/// `preds` and `golds` must each point to `n` readable values.
#[no_mangle]
pub unsafe extern "C" fn mmsa_pearson_cc(preds: *const f64, golds: *const f64, n: usize, out: *mut f64) -> MmsaStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = pearson_cc(series(preds, n, "preds")?, series(golds, n, "golds")?)?;
        Ok(())
    })
}

/// Mean absolute error of two length-`n` series.
///
/// # Safety
/// `preds` and `golds` must each point to `n` readable values.
#[no_mangle]
pub unsafe extern "C" fn mmsa_mean_abs_error(
    preds: *const f64,
    golds: *const f64,
    n: usize,
    out: *mut f64,
) -> MmsaStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = mean_abs_error(series(preds, n, "preds")?, series(golds, n, "golds")?)?;
        Ok(())
    })
}

/// Two-sided Wilcoxon test between samples `a` (length `na`) and `b`
/// (length `nb`). The signed-rank variant requires `na == nb`.
///
/// # Safety
/// `a` and `b` must point to `na` and `nb` readable values.
#[no_mangle]
pub unsafe extern "C" fn mmsa_wilcoxon(
    a: *const f64,
    na: usize,
    b: *const f64,
    nb: usize,
    test: MmsaTest,
    out: *mut MmsaTestOutcome,
) -> MmsaStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let (a, b) = (series(a, na, "a")?, series(b, nb, "b")?);
        let o = match test {
            MmsaTest::RankSum => wilcoxon_rank_sum(a, b)?,
            MmsaTest::SignedRank => wilcoxon_signed_rank(a, b)?,
        };
        *out = MmsaTestOutcome {
            statistic: o.statistic,
            p_value: o.p_value,
            exact: (o.method == PMethod::Exact) as i32,
        };
        Ok(())
    })
}

/// Load a segments or aligned-segments file. Raw segments are aligned on load.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mmsa_dataset_load(path: *const c_char, out: *mut *mut MmsaDataset) -> MmsaStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let path = PathBuf::from(text(path, "path")?);
        let (inner, _) = mmsa::experiment::load_segments(&path)?;
        *out = Box::into_raw(Box::new(MmsaDataset { inner }));
        Ok(())
    })
}

/// Number of segments, or 0 for a null handle.
///
/// # Safety
/// `dataset` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mmsa_dataset_len(dataset: *const MmsaDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.inner.len())
}

/// Gold score of segment `index`.
///
/// # Safety
/// `dataset` must be null or a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mmsa_dataset_score(dataset: *const MmsaDataset, index: usize, out: *mut f64) -> MmsaStatus {
    guard(|| {
        let d = dataset.as_ref().ok_or_else(|| null("dataset"))?;
        let out = out_ref(out, "out")?;
        let seg = segment(d, index)?;
        *out = seg.labels.score;
        Ok(())
    })
}

/// Release a dataset. Null is ignored.
///
/// # Safety
/// `dataset` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mmsa_dataset_free(dataset: *mut MmsaDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

fn segment(d: &MmsaDataset, index: usize) -> Result<&AlignedSegment, Fail> {
    d.inner.get(index).ok_or_else(|| {
        Fail(
            MmsaStatus::OutOfRange,
            format!("segment index {index} out of range for {} segments", d.inner.len()),
        )
    })
}

/// Fresh model with default hyperparameters. `kind` is one of `vocal`,
/// `visual`, `verbal`, `EF`, `TFN`, `LF`, `HF`; `tasks` one of `S`, `S+P`,
/// `S+I`, `S+P+I`.
///
/// # Safety
/// `kind` and `tasks` must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mmsa_model_build(
    kind: *const c_char,
    tasks: *const c_char,
    seed: u64,
    out: *mut *mut MmsaModel,
) -> MmsaStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let spec = ModelSpec {
            kind: text(kind, "kind")?.parse()?,
            tasks: text(tasks, "tasks")?.parse()?,
            hyper: Hyperparameters::default(),
        };
        let inner = build_model(&spec, seed)?;
        *out = Box::into_raw(Box::new(MmsaModel { inner }));
        Ok(())
    })
}

/// Load a checkpoint written by the CLI or [`mmsa_model_save`].
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mmsa_model_load(path: *const c_char, out: *mut *mut MmsaModel) -> MmsaStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let inner = Network::load(&PathBuf::from(text(path, "path")?))?;
        *out = Box::into_raw(Box::new(MmsaModel { inner }));
        Ok(())
    })
}

/// # Safety
/// `model` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mmsa_model_save(model: *const MmsaModel, path: *const c_char) -> MmsaStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        m.inner.save(&PathBuf::from(text(path, "path")?))?;
        Ok(())
    })
}

/// Number of scalar parameters, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mmsa_model_param_count(model: *const MmsaModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.param_count())
}

/// Train in place with default settings except `max_epochs` and `seed`,
/// keeping the parameters of the best validation epoch. Writes that epoch's
/// validation MAE to `best_mae` when non-null.
///
/// # Safety
/// Handles must be live; `best_mae` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn mmsa_model_train(
    model: *mut MmsaModel,
    train_set: *const MmsaDataset,
    validation: *const MmsaDataset,
    max_epochs: usize,
    seed: u64,
    best_mae: *mut f64,
) -> MmsaStatus {
    guard(|| {
        let m = model.as_mut().ok_or_else(|| null("model"))?;
        let tr = train_set.as_ref().ok_or_else(|| null("train_set"))?;
        let va = validation.as_ref().ok_or_else(|| null("validation"))?;
        let config = TrainConfig {
            max_epochs,
            seed,
            ..TrainConfig::default()
        };
        config.validate()?;
        let history = train(&mut m.inner, &tr.inner, &va.inner, &config)?;
        if let Some(out) = best_mae.as_mut() {
            *out = history.best_validation_mae;
        }
        Ok(())
    })
}

/// Evaluation-mode prediction for segment `index` of `dataset`.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mmsa_model_predict(
    model: *const MmsaModel,
    dataset: *const MmsaDataset,
    index: usize,
    out: *mut MmsaPrediction,
) -> MmsaStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let d = dataset.as_ref().ok_or_else(|| null("dataset"))?;
        let out = out_ref(out, "out")?;
        let p = m.inner.predict(segment(d, index)?)?;
        *out = MmsaPrediction {
            score: p.score,
            has_polarity: p.polarity.is_some() as i32,
            polarity: p.polarity.unwrap_or(0.0),
            has_intensity: p.intensity.is_some() as i32,
            intensity: p.intensity.unwrap_or([0.0; 4]),
        };
        Ok(())
    })
}

/// Release a model. Null is ignored.
///
/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mmsa_model_free(model: *mut MmsaModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}
