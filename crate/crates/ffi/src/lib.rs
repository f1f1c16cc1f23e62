//! C ABI for coreset selection.
//!
//! Datasets and selection results are opaque handles created and freed
//! through this interface. Every fallible call returns a [`PbcStatus`]; on
//! failure the message is available from [`pbc_last_error`] on the same
//! thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use pbcoreset::{
    projection, select_coreset, Dataset, Error, ExtractionMode, InnerConfig, LabeledExample, LearnerKind,
    SelectionConfig,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PbcStatus {
    Ok = 0,
    NullPointer = 1,
    Config = 2,
    Data = 3,
    Input = 4,
    Runtime = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PbcLearner {
    Logistic = 0,
    Mlp = 1,
    Ridge = 2,
}

/// Plain-value selection settings; start from
/// [`pbc_selection_config_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PbcSelectionConfig {
    pub budget: usize,
    pub outer_iters: usize,
    pub outer_step: f64,
    /// Outer mini-batch size; 0 uses every outer example.
    pub outer_batch: usize,
    pub seed: u64,
    pub learner: PbcLearner,
    pub inner_epochs: usize,
    pub inner_step: f64,
    pub momentum: f64,
    pub l2: f64,
    pub hidden_width: usize,
    pub hidden_layers: usize,
    pub adaptive: bool,
    pub cosine: bool,
    pub control_variate: bool,
    /// Extract by sampling one mask instead of taking the top K.
    pub sample_extraction: bool,
}

pub struct PbcDataset {
    inner: Dataset,
}

pub struct PbcSelection {
    coreset: Vec<usize>,
    probabilities: Vec<f64>,
    outer_losses: Vec<f64>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> PbcStatus {
    match err {
        Error::Config(_) => PbcStatus::Config,
        Error::Data(_) | Error::Io { .. } => PbcStatus::Data,
        Error::Input(_) | Error::ImpossibleOutcome { .. } => PbcStatus::Input,
        Error::EmptyCoreset | Error::NonFinite(_) | Error::Runtime(_) => PbcStatus::Runtime,
    }
}

fn fail(status: PbcStatus, msg: impl Into<String>) -> PbcStatus {
    set_error(msg.into());
    status
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), PbcStatus>) -> PbcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PbcStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(PbcStatus::Panic, "internal panic"),
    }
}

fn check(err: Error) -> PbcStatus {
    fail(status_of(&err), err.to_string())
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), PbcStatus> {
    if p.is_null() {
        Err(fail(PbcStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

/// Message of the last failing call on this thread, or null. The pointer is
/// valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn pbc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Projects `z[0..n]` onto `{s : 0 <= s <= 1, sum s <= budget}`, writing
/// `n` values to `out`.
///
/// # Safety
/// `z` and `out` must point to `n` readable and writable doubles.
#[no_mangle]
pub unsafe extern "C" fn pbc_project(z: *const f64, n: usize, budget: usize, out: *mut f64) -> PbcStatus {
    guard(|| {
        non_null(z, "z")?;
        non_null(out, "out")?;
        let z = std::slice::from_raw_parts(z, n);
        let s = projection::project_default(z, budget).map_err(check)?;
        std::slice::from_raw_parts_mut(out, n).copy_from_slice(&s);
        Ok(())
    })
}

/// Builds a dataset from row-major `features` (`n x dim`) and `labels` in
/// `[0, num_classes)`.
///
/// # Safety
/// `features` must hold `n * dim` doubles and `labels` `n` values; `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn pbc_dataset_new(
    features: *const f64,
    labels: *const u32,
    n: usize,
    dim: usize,
    num_classes: usize,
    out: *mut *mut PbcDataset,
) -> PbcStatus {
    guard(|| {
        non_null(features, "features")?;
        non_null(labels, "labels")?;
        non_null(out, "out")?;
        let len = n
            .checked_mul(dim)
            .ok_or_else(|| fail(PbcStatus::Input, "n * dim overflows"))?;
        let x = std::slice::from_raw_parts(features, len);
        let y = std::slice::from_raw_parts(labels, n);
        let examples = (0..n)
            .map(|i| LabeledExample::new(x[i * dim..(i + 1) * dim].to_vec(), y[i] as usize))
            .collect();
        let inner = Dataset::new(examples, num_classes, dim).map_err(check)?;
        *out = Box::into_raw(Box::new(PbcDataset { inner }));
        Ok(())
    })
}

/// Number of examples, or 0 for a null handle.
///
/// # Safety
/// `dataset` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pbc_dataset_len(dataset: *const PbcDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.inner.len())
}

/// # Safety
/// `dataset` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pbc_dataset_free(dataset: *mut PbcDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

#[no_mangle]
pub extern "C" fn pbc_selection_config_default() -> PbcSelectionConfig {
    let cfg = SelectionConfig::default();
    PbcSelectionConfig {
        budget: cfg.budget,
        outer_iters: cfg.outer_iters,
        outer_step: cfg.outer_step,
        outer_batch: 0,
        seed: cfg.seed,
        learner: PbcLearner::Logistic,
        inner_epochs: cfg.inner.epochs,
        inner_step: cfg.inner.step_size,
        momentum: cfg.inner.momentum,
        l2: cfg.inner.l2,
        hidden_width: cfg.inner.hidden_width,
        hidden_layers: cfg.inner.hidden_layers,
        adaptive: cfg.adaptive,
        cosine: cfg.cosine,
        control_variate: cfg.control_variate,
        sample_extraction: false,
    }
}

fn selection_config(c: &PbcSelectionConfig) -> SelectionConfig {
    let kind = match c.learner {
        PbcLearner::Logistic => LearnerKind::Logistic,
        PbcLearner::Mlp => LearnerKind::Mlp,
        PbcLearner::Ridge => LearnerKind::Ridge,
    };
    SelectionConfig {
        budget: c.budget,
        outer_iters: c.outer_iters,
        outer_step: c.outer_step,
        outer_batch: (c.outer_batch > 0).then_some(c.outer_batch),
        seed: c.seed,
        inner: InnerConfig {
            kind,
            epochs: c.inner_epochs,
            step_size: c.inner_step,
            momentum: c.momentum,
            l2: c.l2,
            hidden_width: c.hidden_width,
            hidden_layers: c.hidden_layers,
            ..InnerConfig::default()
        },
        extraction: if c.sample_extraction {
            ExtractionMode::Sample
        } else {
            ExtractionMode::TopK
        },
        adaptive: c.adaptive,
        cosine: c.cosine,
        control_variate: c.control_variate,
        ..SelectionConfig::default()
    }
}

/// Selects a coreset of `train`, measuring the outer loss on `outer` (or on
/// `train` itself when `outer` is null).
///
/// # Safety
/// `train` must be a live handle, `outer` null or a live handle, `config`
/// readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pbc_run_selection(
    train: *const PbcDataset,
    outer: *const PbcDataset,
    config: *const PbcSelectionConfig,
    out: *mut *mut PbcSelection,
) -> PbcStatus {
    guard(|| {
        non_null(train, "train")?;
        non_null(config, "config")?;
        non_null(out, "out")?;
        let train = &(*train).inner;
        let outer = outer.as_ref().map_or(train, |d| &d.inner);
        let cfg = selection_config(&*config);
        let (coreset, s, trace) = select_coreset(train, outer.examples(), &cfg).map_err(check)?;
        *out = Box::into_raw(Box::new(PbcSelection {
            coreset,
            probabilities: s.into_values(),
            outer_losses: trace.records.iter().map(|r| r.outer_loss).collect(),
        }));
        Ok(())
    })
}

unsafe fn copy_out<T: Copy>(src: &[T], dst: *mut T, capacity: usize, name: &str) -> Result<(), PbcStatus> {
    non_null(dst, name)?;
    if capacity < src.len() {
        return Err(fail(
            PbcStatus::BufferTooSmall,
            format!("{name} holds {capacity} values, {} needed", src.len()),
        ));
    }
    std::slice::from_raw_parts_mut(dst, src.len()).copy_from_slice(src);
    Ok(())
}

/// Coreset size, or 0 for a null handle.
///
/// # Safety
/// `selection` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pbc_selection_coreset_len(selection: *const PbcSelection) -> usize {
    selection.as_ref().map_or(0, |s| s.coreset.len())
}

/// Copies the sorted coreset indices into `out`.
///
/// # Safety
/// `selection` must be a live handle and `out` writable for `capacity`
/// values.
#[no_mangle]
pub unsafe extern "C" fn pbc_selection_coreset(
    selection: *const PbcSelection,
    out: *mut usize,
    capacity: usize,
) -> PbcStatus {
    guard(|| {
        non_null(selection, "selection")?;
        copy_out(&(*selection).coreset, out, capacity, "out")
    })
}

/// Length of the probability vector (the training set size).
///
/// # Safety
/// `selection` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pbc_selection_len(selection: *const PbcSelection) -> usize {
    selection.as_ref().map_or(0, |s| s.probabilities.len())
}

/// Copies the final inclusion probabilities into `out`.
///
/// # Safety
/// `selection` must be a live handle and `out` writable for `capacity`
/// values.
#[no_mangle]
pub unsafe extern "C" fn pbc_selection_probabilities(
    selection: *const PbcSelection,
    out: *mut f64,
    capacity: usize,
) -> PbcStatus {
    guard(|| {
        non_null(selection, "selection")?;
        copy_out(&(*selection).probabilities, out, capacity, "out")
    })
}

/// Number of completed outer iterations.
///
/// # Safety
/// `selection` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pbc_selection_iterations(selection: *const PbcSelection) -> usize {
    selection.as_ref().map_or(0, |s| s.outer_losses.len())
}

/// Copies the per-iteration outer losses into `out`.
///
/// # Safety
/// `selection` must be a live handle and `out` writable for `capacity`
/// values.
#[no_mangle]
pub unsafe extern "C" fn pbc_selection_outer_losses(
    selection: *const PbcSelection,
    out: *mut f64,
    capacity: usize,
) -> PbcStatus {
    guard(|| {
        non_null(selection, "selection")?;
        copy_out(&(*selection).outer_losses, out, capacity, "out")
    })
}

/// # Safety
/// `selection` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pbc_selection_free(selection: *mut PbcSelection) {
    if !selection.is_null() {
        drop(Box::from_raw(selection));
    }
}
