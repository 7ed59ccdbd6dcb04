//! C ABI over the prospect core.
//!
//! Every fallible call returns a [`ProspectStatus`]. On failure the message
//! is kept per thread and can be read with [`prospect_last_error`] until the
//! next failing call on that thread. Handles are opaque; each `*_free`
//! accepts NULL.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use libc::{c_char, size_t};

use prospect::cardiac::rmssd;
use prospect::fusion::{compute_metrics, loso_run, ConfusionMatrix, EvalReport, ScoreModality, Target};
use prospect::model::Dataset;
use prospect::pipeline::{self, PipelineConfig};
use prospect::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProspectStatus {
    Ok = 0,
    NullArgument = 1,
    /// Bad arguments, configuration or manifest content.
    Invalid = 2,
    /// Input that cannot support the computation.
    Data = 3,
    /// A held-out participant was read while training.
    Leakage = 4,
    Io = 5,
    Parse = 6,
    /// A Rust panic was caught at the boundary.
    Panic = 7,
}

impl ProspectStatus {
    fn of(err: &Error) -> Self {
        match err.root() {
            Error::Io { .. } => ProspectStatus::Io,
            Error::Parse { .. } => ProspectStatus::Parse,
            Error::Invalid(_) => ProspectStatus::Invalid,
            Error::Data(_) => ProspectStatus::Data,
            Error::Leakage { .. } => ProspectStatus::Leakage,
            Error::Context { .. } => unreachable!("root strips context"),
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProspectModality {
    Ocular = 0,
    Cardiac = 1,
    Fused = 2,
}

impl ProspectModality {
    fn target(self) -> Target {
        match self {
            ProspectModality::Ocular => Target::Ocular,
            ProspectModality::Cardiac => Target::Cardiac,
            ProspectModality::Fused => Target::Fused,
        }
    }

    fn score(self) -> ScoreModality {
        match self {
            ProspectModality::Ocular => ScoreModality::Ocular,
            ProspectModality::Cardiac => ScoreModality::Cardiac,
            ProspectModality::Fused => ScoreModality::Fused,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ProspectConfusion {
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tp: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ProspectMetrics {
    pub bacc: f64,
    pub macro_pr: f64,
    pub macro_re: f64,
    pub macro_f1: f64,
    pub mcc: f64,
}

/// Per-participant window tables.
pub struct ProspectDataset(Dataset);

/// Result of a leave-one-subject-out evaluation.
pub struct ProspectReport(EvalReport);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

enum Failure {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type FfiResult<T> = Result<T, Failure>;

fn guard(f: impl FnOnce() -> FfiResult<()>) -> ProspectStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ProspectStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("{what} must not be NULL"));
            ProspectStatus::NullArgument
        }
        Ok(Err(Failure::Core(e))) => {
            set_error(e.to_string());
            ProspectStatus::of(&e)
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal error: {msg}"));
            ProspectStatus::Panic
        }
    }
}

unsafe fn non_null<'a, T>(p: *const T, what: &'static str) -> FfiResult<&'a T> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn path_arg(p: *const c_char, what: &'static str) -> FfiResult<PathBuf> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Error::invalid(format!("{what} is not valid UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn config_arg(p: *const c_char) -> FfiResult<PipelineConfig> {
    if p.is_null() {
        return Ok(PipelineConfig::default());
    }
    Ok(PipelineConfig::load(&path_arg(p, "config_path")?)?)
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &'static str) -> FfiResult<()> {
    if out.is_null() {
        return Err(Failure::Null(what));
    }
    out.write(value);
    Ok(())
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn prospect_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn prospect_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `cm` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn prospect_compute_metrics(cm: *const ProspectConfusion, out: *mut ProspectMetrics) -> ProspectStatus {
    guard(|| {
        let cm = non_null(cm, "cm")?;
        let m = compute_metrics(&ConfusionMatrix {
            tn: cm.tn as usize,
            fp: cm.fp as usize,
            fn_: cm.fn_ as usize,
            tp: cm.tp as usize,
        });
        write_out(
            out,
            ProspectMetrics { bacc: m.bacc, macro_pr: m.macro_pr, macro_re: m.macro_re, macro_f1: m.macro_f1, mcc: m.mcc },
            "out",
        )
    })
}

/// RMSSD of `n` NN intervals, in the unit of the input.
///
/// # Safety
/// `nn` must point to `n` readable doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn prospect_rmssd(nn: *const f64, n: size_t, out: *mut f64) -> ProspectStatus {
    guard(|| {
        if nn.is_null() {
            return Err(Failure::Null("nn"));
        }
        let v = rmssd(std::slice::from_raw_parts(nn, n))?;
        write_out(out, v, "out")
    })
}

/// Generates a synthetic cohort from a JSON generator spec.
///
/// # Safety
/// Both arguments must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn prospect_synthgen(spec_path: *const c_char, out_dir: *const c_char) -> ProspectStatus {
    guard(|| {
        let spec = path_arg(spec_path, "spec_path")?;
        let out = path_arg(out_dir, "out_dir")?;
        pipeline::cmd_synthgen(&spec, &out, None)?;
        Ok(())
    })
}

/// Extracts every manifest in `manifests_dir`. `config_path` may be NULL
/// for defaults.
///
/// # Safety
/// String arguments must be NUL-terminated; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn prospect_extract(
    manifests_dir: *const c_char,
    config_path: *const c_char,
    out: *mut *mut ProspectDataset,
) -> ProspectStatus {
    guard(|| {
        let dir = path_arg(manifests_dir, "manifests_dir")?;
        let cfg = config_arg(config_path)?;
        let ds = pipeline::extract_dir(&dir, &cfg.extract)?;
        write_out(out, Box::into_raw(Box::new(ProspectDataset(ds))), "out")
    })
}

/// Loads window tables written by `prospect_dataset_save` or the CLI.
///
/// # Safety
/// `dir` must be NUL-terminated; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn prospect_dataset_load(dir: *const c_char, out: *mut *mut ProspectDataset) -> ProspectStatus {
    guard(|| {
        let ds = pipeline::load_features(&path_arg(dir, "dir")?)?;
        write_out(out, Box::into_raw(Box::new(ProspectDataset(ds))), "out")
    })
}

/// # Safety
/// `ds` must be a live handle and `dir` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn prospect_dataset_save(ds: *const ProspectDataset, dir: *const c_char) -> ProspectStatus {
    guard(|| {
        let ds = non_null(ds, "ds")?;
        ds.0.save_dir(&path_arg(dir, "dir")?)?;
        Ok(())
    })
}

/// Number of participants; 0 for NULL.
///
/// # Safety
/// `ds` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn prospect_dataset_len(ds: *const ProspectDataset) -> size_t {
    ds.as_ref().map_or(0, |d| d.0.len())
}

/// # Safety
/// `ds` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn prospect_dataset_free(ds: *mut ProspectDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Leave-one-subject-out evaluation with z-scoring and feature selection as
/// configured. `config_path` may be NULL for defaults.
///
/// # Safety
/// `ds` must be a live handle, `config_path` NULL or NUL-terminated, `out`
/// valid.
#[no_mangle]
pub unsafe extern "C" fn prospect_evaluate(
    ds: *const ProspectDataset,
    config_path: *const c_char,
    target: ProspectModality,
    seed: u64,
    out: *mut *mut ProspectReport,
) -> ProspectStatus {
    guard(|| {
        let ds = non_null(ds, "ds")?;
        let mut cfg = config_arg(config_path)?;
        cfg.modality = target.target();
        cfg.validate()?;
        let prepared = pipeline::prepare(&ds.0, &cfg)?;
        let report = loso_run(&prepared, &cfg.loso(), cfg.modality, seed)?;
        write_out(out, Box::into_raw(Box::new(ProspectReport(report))), "out")
    })
}

/// Confusion matrix and metrics of one scored modality. `cm` may be NULL.
///
/// # Safety
/// `report` must be a live handle; `cm` NULL or valid; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn prospect_report_metrics(
    report: *const ProspectReport,
    modality: ProspectModality,
    cm: *mut ProspectConfusion,
    out: *mut ProspectMetrics,
) -> ProspectStatus {
    guard(|| {
        let r = non_null(report, "report")?.0.result(modality.score())?;
        let m = &r.metrics;
        write_out(
            out,
            ProspectMetrics { bacc: m.bacc, macro_pr: m.macro_pr, macro_re: m.macro_re, macro_f1: m.macro_f1, mcc: m.mcc },
            "out",
        )?;
        if !cm.is_null() {
            let c = &r.confusion;
            cm.write(ProspectConfusion { tn: c.tn as u64, fp: c.fp as u64, fn_: c.fn_ as u64, tp: c.tp as u64 });
        }
        Ok(())
    })
}

/// Report as JSON. Release the string with `prospect_string_free`.
///
/// # Safety
/// `report` must be a live handle; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn prospect_report_json(report: *const ProspectReport, out: *mut *mut c_char) -> ProspectStatus {
    guard(|| {
        let json = non_null(report, "report")?.0.to_json()?;
        let c = CString::new(json).map_err(|_| Error::invalid("report JSON contains NUL"))?;
        write_out(out, c.into_raw(), "out")
    })
}

/// # Safety
/// `report` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn prospect_report_free(report: *mut ProspectReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// # Safety
/// `s` must be NULL or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn prospect_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
