//! C ABI over the triqsvm classifier, quantum kernel and QUBO solvers.
//!
//! Every fallible function returns a [`TriqsvmStatus`]; on failure the message
//! is available from [`triqsvm_last_error`] on the same thread. Handles are
//! opaque and must be released with their matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use triqsvm::anneal::{self, AnnealSchedule, SampleResult};
use triqsvm::cli::ModelFile;
use triqsvm::datagen::Label;
use triqsvm::qkernel::{self, DataMap, FeatureMapSpec};
use triqsvm::qubo::{self, QuboMatrix};
use triqsvm::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TriqsvmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Numerical = 5,
    TooLarge = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TriqsvmDataMap {
    ZzOffset = 0,
    ZzScaled = 1,
}

/// Trained classifier loaded from model JSON.
pub struct TriqsvmModel {
    file: ModelFile,
}

/// Parametrised feature map for kernel evaluation.
pub struct TriqsvmFeatureMap {
    spec: FeatureMapSpec,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> TriqsvmStatus {
    match e {
        Error::Io { .. } => TriqsvmStatus::Io,
        Error::Json { .. }
        | Error::Csv { .. }
        | Error::BadRow { .. }
        | Error::MissingColumn { .. } => TriqsvmStatus::Parse,
        Error::Numerical(_) | Error::GapInfeasible { .. } => TriqsvmStatus::Numerical,
        Error::TooLarge { .. } => TriqsvmStatus::TooLarge,
        _ => TriqsvmStatus::InvalidArgument,
    }
}

struct Fail(TriqsvmStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(TriqsvmStatus::NullPointer, format!("{what} is null"))
}

fn guard(body: impl FnOnce() -> Result<(), Fail>) -> TriqsvmStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            TriqsvmStatus::Ok
        }
        Ok(Err(Fail(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            TriqsvmStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    // SAFETY: caller guarantees `p` points to `len` readable elements.
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    // SAFETY: caller guarantees `p` is null or valid for writes.
    unsafe { p.as_mut() }.ok_or_else(|| null(what))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    // SAFETY: caller guarantees a NUL-terminated string.
    unsafe { CStr::from_ptr(p) }.to_str().map_err(|_| {
        Fail(
            TriqsvmStatus::InvalidArgument,
            format!("{what} is not UTF-8"),
        )
    })
}

/// Message of the last failed call on this thread, or NULL after a success.
/// The pointer stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn triqsvm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn triqsvm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a model file written by `triqsvm train`.
///
/// # Safety
/// `path` must be a NUL-terminated string and the out-pointer valid for writes.
#[no_mangle]
pub unsafe extern "C" fn triqsvm_model_load(
    path: *const c_char,
    out_model: *mut *mut TriqsvmModel,
) -> TriqsvmStatus {
    guard(|| {
        let path = unsafe { str_arg(path, "path") }?;
        let slot = unsafe { out(out_model, "out_model") }?;
        let file = ModelFile::read(Path::new(path))?;
        *slot = Box::into_raw(Box::new(TriqsvmModel { file }));
        Ok(())
    })
}

/// Parses model JSON held in memory.
///
/// # Safety
/// `json` must be a NUL-terminated string and the out-pointer valid for writes.
#[no_mangle]
pub unsafe extern "C" fn triqsvm_model_from_json(
    json: *const c_char,
    out_model: *mut *mut TriqsvmModel,
) -> TriqsvmStatus {
    guard(|| {
        let json = unsafe { str_arg(json, "json") }?;
        let slot = unsafe { out(out_model, "out_model") }?;
        let file = ModelFile::parse(json, "model json")?;
        *slot = Box::into_raw(Box::new(TriqsvmModel { file }));
        Ok(())
    })
}

/// # Safety
/// `model` must be NULL or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn triqsvm_model_free(model: *mut TriqsvmModel) {
    if !model.is_null() {
        // SAFETY: the handle was created by Box::into_raw.
        drop(unsafe { Box::from_raw(model) });
    }
}

/// # Safety
/// `model` must be a live handle and the out-pointer valid for writes.
#[no_mangle]
pub unsafe extern "C" fn triqsvm_model_n_features(
    model: *const TriqsvmModel,
    out_n: *mut usize,
) -> TriqsvmStatus {
    guard(|| {
        let model = unsafe { model.as_ref() }.ok_or_else(|| null("model"))?;
        *unsafe { out(out_n, "out_n") }? = model.file.model.n_features().unwrap_or(0);
        Ok(())
    })
}

/// Decision value at `x`, given in the units of the training data.
///
/// # Safety
/// `model` must be a live handle, `x` must point to `len` doubles and the out-pointer be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn triqsvm_model_decision_value(
    model: *const TriqsvmModel,
    x: *const f64,
    len: usize,
    out_value: *mut f64,
) -> TriqsvmStatus {
    guard(|| {
        let model = unsafe { model.as_ref() }.ok_or_else(|| null("model"))?;
        let x = unsafe { slice(x, len, "x") }?;
        let slot = unsafe { out(out_value, "out_value") }?;
        let point = model.file.prepare(x);
        let v = model.file.model.decision_values(&[point])?;
        *slot = v[0];
        Ok(())
    })
}

/// Predicted label at `x`: `1` or `-1`, with a zero decision value mapped to `1`.
///
/// # Safety
/// Same contract as [`triqsvm_model_decision_value`].
#[no_mangle]
pub unsafe extern "C" fn triqsvm_model_classify(
    model: *const TriqsvmModel,
    x: *const f64,
    len: usize,
    out_label: *mut i8,
) -> TriqsvmStatus {
    let mut v = 0.0;
    let status = unsafe { triqsvm_model_decision_value(model, x, len, &mut v) };
    if status != TriqsvmStatus::Ok {
        return status;
    }
    guard(|| {
        *unsafe { out(out_label, "out_label") }? = i8::from(Label::from_sign(v));
        Ok(())
    })
}

/// Creates a feature map on `n_qubits` qubits with parameters `theta` (`n_qubits` values in [−2π, 2π]).
///
/// # Safety
/// `theta` must point to `theta_len` doubles and the out-pointer be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn triqsvm_feature_map_new(
    n_qubits: usize,
    theta: *const f64,
    theta_len: usize,
    data_map: TriqsvmDataMap,
    out_map: *mut *mut TriqsvmFeatureMap,
) -> TriqsvmStatus {
    guard(|| {
        let theta = unsafe { slice(theta, theta_len, "theta") }?;
        let slot = unsafe { out(out_map, "out_map") }?;
        let data_map = match data_map {
            TriqsvmDataMap::ZzOffset => DataMap::ZzOffset,
            TriqsvmDataMap::ZzScaled => DataMap::ZzScaled,
        };
        let spec = FeatureMapSpec::new(n_qubits, theta.to_vec(), data_map)?;
        *slot = Box::into_raw(Box::new(TriqsvmFeatureMap { spec }));
        Ok(())
    })
}

/// # Safety
/// `map` must be NULL or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn triqsvm_feature_map_free(map: *mut TriqsvmFeatureMap) {
    if !map.is_null() {
        // SAFETY: the handle was created by Box::into_raw.
        drop(unsafe { Box::from_raw(map) });
    }
}

/// Fidelity kernel `|⟨Φ(x)|Φ(z)⟩|²` for two points of length `len`.
///
/// # Safety
/// `map` must be a live handle, `x` and `z` must point to `len` doubles and the out-pointer be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn triqsvm_kernel_entry(
    map: *const TriqsvmFeatureMap,
    x: *const f64,
    z: *const f64,
    len: usize,
    out_value: *mut f64,
) -> TriqsvmStatus {
    guard(|| {
        let map = unsafe { map.as_ref() }.ok_or_else(|| null("map"))?;
        let x = unsafe { slice(x, len, "x") }?;
        let z = unsafe { slice(z, len, "z") }?;
        let slot = unsafe { out(out_value, "out_value") }?;
        *slot = qkernel::kernel_entry(x, z, &map.spec)?;
        Ok(())
    })
}

unsafe fn solve(
    q: *const f64,
    n: usize,
    out_alpha: *mut u8,
    out_energy: *mut f64,
    run: impl FnOnce(&QuboMatrix) -> triqsvm::Result<SampleResult>,
) -> TriqsvmStatus {
    guard(|| {
        let entries = unsafe { slice(q, n.checked_mul(n).ok_or_else(|| null("q"))?, "q") }?;
        if out_alpha.is_null() {
            return Err(null("out_alpha"));
        }
        let energy = unsafe { out(out_energy, "out_energy") }?;
        let q = QuboMatrix::from_flat(n, entries.to_vec())?;
        let result = run(&q)?;
        // SAFETY: caller guarantees `out_alpha` has room for `n` bytes.
        unsafe { ptr::copy_nonoverlapping(result.best_assignment.as_ptr(), out_alpha, n) };
        *energy = result.best_energy;
        Ok(())
    })
}

/// Simulated annealing on the `n × n` row-major QUBO `q`.
///
/// # Safety
/// `q` must point to `n * n` doubles, `out_alpha` to `n` writable bytes and `out_energy` be valid for writes.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn triqsvm_anneal(
    q: *const f64,
    n: usize,
    num_reads: usize,
    sweeps: usize,
    beta_start: f64,
    beta_end: f64,
    seed: u64,
    out_alpha: *mut u8,
    out_energy: *mut f64,
) -> TriqsvmStatus {
    let schedule = AnnealSchedule {
        num_reads,
        sweeps,
        beta_start,
        beta_end,
        seed,
    };
    unsafe {
        solve(q, n, out_alpha, out_energy, |q| {
            anneal::simulated_anneal(q, &schedule)
        })
    }
}

/// Exhaustive minimum of the `n × n` row-major QUBO `q`, for `n ≤ 20`.
///
/// # Safety
/// Same contract as [`triqsvm_anneal`].
#[no_mangle]
pub unsafe extern "C" fn triqsvm_brute_force(
    q: *const f64,
    n: usize,
    out_alpha: *mut u8,
    out_energy: *mut f64,
) -> TriqsvmStatus {
    unsafe { solve(q, n, out_alpha, out_energy, anneal::brute_force) }
}

/// Energy `αᵀ Q α` of a binary assignment.
///
/// # Safety
/// `q` must point to `n * n` doubles, `alpha` to `n` bytes and `out_energy` be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn triqsvm_qubo_energy(
    q: *const f64,
    n: usize,
    alpha: *const u8,
    out_energy: *mut f64,
) -> TriqsvmStatus {
    guard(|| {
        let entries = unsafe { slice(q, n.checked_mul(n).ok_or_else(|| null("q"))?, "q") }?;
        let alpha = unsafe { slice(alpha, n, "alpha") }?;
        let slot = unsafe { out(out_energy, "out_energy") }?;
        let q = QuboMatrix::from_flat(n, entries.to_vec())?;
        *slot = anneal::energy(&q, alpha)?;
        Ok(())
    })
}

/// Offset `β` of the classifier for weights `alpha` over the Gram matrix `gram` (`n × n`, row-major)
/// and labels `labels` (each `1` or `-1`).
///
/// # Safety
/// `alpha` and `labels` must point to `n` elements, `gram` to `n * n` doubles and `out_beta` be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn triqsvm_compute_beta(
    alpha: *const u8,
    labels: *const i8,
    gram: *const f64,
    n: usize,
    out_beta: *mut f64,
) -> TriqsvmStatus {
    guard(|| {
        let alpha = unsafe { slice(alpha, n, "alpha") }?;
        let labels = unsafe { slice(labels, n, "labels") }?;
        let entries =
            unsafe { slice(gram, n.checked_mul(n).ok_or_else(|| null("gram"))?, "gram") }?;
        let slot = unsafe { out(out_beta, "out_beta") }?;
        let labels = labels
            .iter()
            .map(|&l| Label::try_from(l))
            .collect::<triqsvm::Result<Vec<_>>>()?;
        let gram = qkernel::GramMatrix::from_rows(n, entries.to_vec())?;
        *slot = qubo::compute_beta(alpha, &labels, &gram)?;
        Ok(())
    })
}
