//! C ABI over the `pencil` crate.
//!
//! Every fallible function returns a [`PencilStatus`]; on failure the message
//! is available from [`pencil_last_error`] on the same thread. Objects are
//! opaque handles created by `*_new`/`*_load` and released with `*_free`.
//! Panics never cross the boundary; they surface as `PENCIL_STATUS_PANIC`.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;
use std::slice;

use pencil::backbone::Backbone;
use pencil::cli;
use pencil::labelbank::{LabelBank, NoisyLabel};
use pencil::losses::{self, LossVariant};
use pencil::noise;
use pencil::numerics;
use pencil::Error;

pub const PENCIL_KL_FORWARD: i32 = 0;
pub const PENCIL_KL_INVERSE: i32 = 1;
pub const PENCIL_BINARY_INVERSE: i32 = 2;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PencilStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Format = 3,
    Io = 4,
    Divergence = 5,
    Verification = 6,
    Panic = 7,
}

/// Per-example label distributions.
pub struct PencilLabelBank(LabelBank);

/// A trained network loaded from a model checkpoint.
pub struct PencilModel(Backbone);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> PencilStatus {
    match e {
        Error::InvalidInput(_) | Error::Config { .. } => PencilStatus::InvalidInput,
        Error::Format { .. } => PencilStatus::Format,
        Error::Io(_) => PencilStatus::Io,
        Error::Divergence(_) => PencilStatus::Divergence,
        Error::OracleFailure(_) => PencilStatus::Verification,
    }
}

enum Fail {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> PencilStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PencilStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            PencilStatus::NullPointer
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            PencilStatus::Panic
        }
    }
}

unsafe fn slice_in<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn slice_out<'a, T>(p: *mut T, len: usize, what: &'static str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

unsafe fn path_in(p: *const c_char, what: &'static str) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Error::InvalidInput(format!("{what} is not valid UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn handle<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn handle_mut<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

fn variant_of(v: i32) -> Result<LossVariant, Fail> {
    match v {
        PENCIL_KL_FORWARD => Ok(LossVariant::KlForward),
        PENCIL_KL_INVERSE => Ok(LossVariant::KlInverse),
        PENCIL_BINARY_INVERSE => Ok(LossVariant::BinaryInverse),
        _ => Err(Error::InvalidInput(format!("unknown loss variant {v}")).into()),
    }
}

fn check_probs(f: &[f64], yd: &[f64]) -> Result<(), Fail> {
    if f.len() < 2 || f.iter().chain(yd).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("need at least two finite probabilities".into()).into());
    }
    Ok(())
}

/// Message of the last failure on this thread; empty if none. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pencil_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pencil_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Numerically stable softmax of `c` logits into `out`.
#[no_mangle]
pub unsafe extern "C" fn pencil_softmax(z: *const f64, c: usize, out: *mut f64) -> PencilStatus {
    guard(|| {
        let z = slice_in(z, c, "z")?;
        let out = slice_out(out, c, "out")?;
        out.copy_from_slice(&numerics::softmax(z)?);
        Ok(())
    })
}

/// Gradient of `(1/c) L_c + alpha L_o` with respect to one example's label
/// logits, given network probabilities `f` and label distribution `yd`.
#[no_mangle]
pub unsafe extern "C" fn pencil_grad_label_logits(
    f: *const f64,
    yd: *const f64,
    c: usize,
    noisy_label: u32,
    variant: i32,
    alpha: f64,
    out: *mut f64,
) -> PencilStatus {
    guard(|| {
        let (f, yd) = (slice_in(f, c, "f")?, slice_in(yd, c, "yd")?);
        let out = slice_out(out, c, "out")?;
        check_probs(f, yd)?;
        if noisy_label as usize >= c {
            return Err(Error::InvalidInput(format!("label {noisy_label} out of range")).into());
        }
        let g = losses::grad_label_logits(f, yd, NoisyLabel(noisy_label), variant_of(variant)?, alpha, c);
        out.copy_from_slice(&g);
        Ok(())
    })
}

/// Gradient of `(1/c) L_c + (beta/c) L_e` with respect to one example's
/// network logits.
#[no_mangle]
pub unsafe extern "C" fn pencil_grad_net_logits(
    f: *const f64,
    yd: *const f64,
    c: usize,
    variant: i32,
    beta: f64,
    out: *mut f64,
) -> PencilStatus {
    guard(|| {
        let (f, yd) = (slice_in(f, c, "f")?, slice_in(yd, c, "yd")?);
        let out = slice_out(out, c, "out")?;
        check_probs(f, yd)?;
        out.copy_from_slice(&losses::grad_net_logits(f, yd, variant_of(variant)?, beta, c));
        Ok(())
    })
}

/// Symmetric label noise: each label is redrawn uniformly with probability `rate`.
#[no_mangle]
pub unsafe extern "C" fn pencil_inject_symmetric(
    truth: *const u32,
    n: usize,
    c: usize,
    rate: f64,
    seed: u64,
    out: *mut u32,
) -> PencilStatus {
    inject_with(truth, n, out, |t| noise::inject_symmetric(t, c, rate, seed))
}

/// Circular label noise: each label moves to the next class with probability `rate`.
#[no_mangle]
pub unsafe extern "C" fn pencil_inject_asym_circular(
    truth: *const u32,
    n: usize,
    c: usize,
    rate: f64,
    seed: u64,
    out: *mut u32,
) -> PencilStatus {
    inject_with(truth, n, out, |t| noise::inject_asym_circular(t, c, rate, seed))
}

unsafe fn inject_with(
    truth: *const u32,
    n: usize,
    out: *mut u32,
    f: impl FnOnce(&[usize]) -> pencil::Result<Vec<usize>>,
) -> PencilStatus {
    guard(|| {
        let t: Vec<usize> = slice_in(truth, n, "truth")?.iter().map(|&l| l as usize).collect();
        let out = slice_out(out, n, "out")?;
        for (o, l) in out.iter_mut().zip(f(&t)?) {
            *o = l as u32;
        }
        Ok(())
    })
}

/// Creates a label bank with logits `k * onehot(label)` per example.
#[no_mangle]
pub unsafe extern "C" fn pencil_label_bank_new(
    labels: *const u32,
    n: usize,
    c: usize,
    k: f64,
    out: *mut *mut PencilLabelBank,
) -> PencilStatus {
    guard(|| {
        let out = handle_mut(out, "out")?;
        *out = ptr::null_mut();
        let labels: Vec<NoisyLabel> = slice_in(labels, n, "labels")?.iter().map(|&l| NoisyLabel(l)).collect();
        let bank = LabelBank::init_from_noisy(&labels, c, k)?;
        *out = Box::into_raw(Box::new(PencilLabelBank(bank)));
        Ok(())
    })
}

/// Loads a label bank checkpoint.
#[no_mangle]
pub unsafe extern "C" fn pencil_label_bank_load(path: *const c_char, out: *mut *mut PencilLabelBank) -> PencilStatus {
    guard(|| {
        let out = handle_mut(out, "out")?;
        *out = ptr::null_mut();
        let bank = LabelBank::load(&path_in(path, "path")?)?;
        *out = Box::into_raw(Box::new(PencilLabelBank(bank)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn pencil_label_bank_save(bank: *const PencilLabelBank, path: *const c_char) -> PencilStatus {
    guard(|| {
        let bank = handle(bank, "bank")?;
        bank.0.save(&path_in(path, "path")?)?;
        Ok(())
    })
}

/// Releases a bank; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn pencil_label_bank_free(bank: *mut PencilLabelBank) {
    if !bank.is_null() {
        drop(Box::from_raw(bank));
    }
}

/// Number of examples and classes.
#[no_mangle]
pub unsafe extern "C" fn pencil_label_bank_shape(
    bank: *const PencilLabelBank,
    n: *mut usize,
    c: *mut usize,
) -> PencilStatus {
    guard(|| {
        let bank = handle(bank, "bank")?;
        *handle_mut(n, "n")? = bank.0.len();
        *handle_mut(c, "c")? = bank.0.num_classes();
        Ok(())
    })
}

/// Writes the label distribution of example `i` into `out` (length `c`).
#[no_mangle]
pub unsafe extern "C" fn pencil_label_bank_distribution(
    bank: *const PencilLabelBank,
    i: usize,
    out: *mut f64,
    c: usize,
) -> PencilStatus {
    guard(|| {
        let bank = handle(bank, "bank")?;
        if c != bank.0.num_classes() {
            return Err(Error::InvalidInput(format!("buffer holds {c} classes, bank has {}", bank.0.num_classes())).into());
        }
        let out = slice_out(out, c, "out")?;
        out.copy_from_slice(&bank.0.distribution(i)?);
        Ok(())
    })
}

/// Applies `logits[batch[k]] -= lambda * grads[k]`, with `grads` row-major
/// `b x c`.
#[no_mangle]
pub unsafe extern "C" fn pencil_label_bank_apply_update(
    bank: *mut PencilLabelBank,
    batch: *const usize,
    b: usize,
    grads: *const f64,
    lambda: f64,
) -> PencilStatus {
    guard(|| {
        let bank = handle_mut(bank, "bank")?;
        let c = bank.0.num_classes();
        let batch = slice_in(batch, b, "batch")?;
        let grads: Vec<Vec<f64>> = slice_in(grads, b * c, "grads")?.chunks(c).map(<[f64]>::to_vec).collect();
        bank.0.apply_label_update(batch, &grads, lambda)?;
        Ok(())
    })
}

/// Argmax class of every example into `out` (length `n`).
#[no_mangle]
pub unsafe extern "C" fn pencil_label_bank_hard_labels(
    bank: *const PencilLabelBank,
    out: *mut u32,
    n: usize,
) -> PencilStatus {
    guard(|| {
        let bank = handle(bank, "bank")?;
        if n != bank.0.len() {
            return Err(Error::InvalidInput(format!("buffer holds {n} labels, bank has {}", bank.0.len())).into());
        }
        let out = slice_out(out, n, "out")?;
        for (o, l) in out.iter_mut().zip(bank.0.hard_labels()) {
            *o = l as u32;
        }
        Ok(())
    })
}

/// Restores the logits initialized from the original noisy labels.
#[no_mangle]
pub unsafe extern "C" fn pencil_label_bank_reset(bank: *mut PencilLabelBank) -> PencilStatus {
    guard(|| {
        handle_mut(bank, "bank")?.0.reset();
        Ok(())
    })
}

/// Loads a model checkpoint.
#[no_mangle]
pub unsafe extern "C" fn pencil_model_load(path: *const c_char, out: *mut *mut PencilModel) -> PencilStatus {
    guard(|| {
        let out = handle_mut(out, "out")?;
        *out = ptr::null_mut();
        let net = Backbone::load(&path_in(path, "path")?)?;
        *out = Box::into_raw(Box::new(PencilModel(net)));
        Ok(())
    })
}

/// Releases a model; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn pencil_model_free(model: *mut PencilModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Input dimension and number of classes.
#[no_mangle]
pub unsafe extern "C" fn pencil_model_shape(model: *const PencilModel, dim: *mut usize, c: *mut usize) -> PencilStatus {
    guard(|| {
        let model = handle(model, "model")?;
        *handle_mut(dim, "dim")? = model.0.config().input_dim();
        *handle_mut(c, "c")? = model.0.num_classes();
        Ok(())
    })
}

/// Class probabilities for `rows` inputs of width `dim` (row-major), written
/// to `out` as `rows x c`.
#[no_mangle]
pub unsafe extern "C" fn pencil_model_predict(
    model: *const PencilModel,
    x: *const f64,
    rows: usize,
    dim: usize,
    out: *mut f64,
) -> PencilStatus {
    guard(|| {
        let model = handle(model, "model")?;
        let (want, c) = (model.0.config().input_dim(), model.0.num_classes());
        if dim != want {
            return Err(Error::InvalidInput(format!("model expects {want} features, got {dim}")).into());
        }
        if rows == 0 {
            return Ok(());
        }
        let x: Vec<&[f64]> = slice_in(x, rows * dim, "x")?.chunks(dim).collect();
        let out = slice_out(out, rows * c, "out")?;
        let fwd = model.0.forward(&x)?;
        for (dst, p) in out.chunks_mut(c).zip(&fwd.probs) {
            dst.copy_from_slice(p);
        }
        Ok(())
    })
}

/// Runs the full pipeline like `pencil train` and writes the run directory.
/// `config_path` may be null for the defaults; `baseline` non-zero selects
/// cross-entropy-only training.
#[no_mangle]
pub unsafe extern "C" fn pencil_train(
    data_path: *const c_char,
    config_path: *const c_char,
    out_dir: *const c_char,
    baseline: i32,
) -> PencilStatus {
    guard(|| {
        let data = path_in(data_path, "data_path")?;
        let out_dir = path_in(out_dir, "out_dir")?;
        let config = if config_path.is_null() {
            None
        } else {
            Some(path_in(config_path, "config_path")?)
        };
        let cfg = cli::load_config(config.as_deref(), None)?;
        cli::train_to_dir(cfg, &data, &out_dir, baseline != 0)?;
        Ok(())
    })
}
