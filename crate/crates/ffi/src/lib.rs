//! C interface to the ensemble analysis toolkit.
//!
//! Every entry point returns a [`MetStatus`]. On failure a description is kept
//! per thread and can be copied out with [`met_last_error_message`]. Handles
//! are opaque; create them with [`met_ensemble_from_json`] and release them
//! with [`met_ensemble_free`]. No function retains a caller pointer past its
//! return, and a Rust panic never unwinds into C.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;

use met_dgldpc::exit::{ExitModel, ThresholdOptions};
use met_dgldpc::peel::{simulate_point, SweepOptions};
use met_dgldpc::stability::{build_matrices, StabilityBound, StabilityMatrices};
use met_dgldpc::{parse_spec, EnsembleSpec, Error};

/// Result of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// Malformed ensemble or out-of-range argument.
    Validation = 3,
    /// The request exceeds compiled-in size limits.
    Capacity = 4,
    /// The analysis does not apply to this ensemble.
    Hypothesis = 5,
    /// Internal consistency check failed.
    Internal = 6,
    /// A caller buffer was too small. Nothing was written.
    BufferTooSmall = 7,
    /// A panic was caught at the boundary.
    Panic = 8,
}

/// Opaque ensemble handle.
pub struct MetEnsemble {
    spec: EnsembleSpec,
    model: OnceLock<ExitModel>,
    stability: OnceLock<StabilityMatrices>,
}

impl MetEnsemble {
    fn model(&self) -> Result<&ExitModel, Error> {
        if let Some(m) = self.model.get() {
            return Ok(m);
        }
        let m = ExitModel::new(&self.spec)?;
        Ok(self.model.get_or_init(|| m))
    }

    fn stability(&self) -> Result<&StabilityMatrices, Error> {
        if let Some(m) = self.stability.get() {
            return Ok(m);
        }
        let m = build_matrices(&self.spec)?;
        Ok(self.stability.get_or_init(|| m))
    }
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

struct Failure(MetStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Capacity { .. } => MetStatus::Capacity,
            Error::Hypothesis(_) => MetStatus::Hypothesis,
            Error::Internal(_) => MetStatus::Internal,
            Error::Validation(_) | Error::Io(_) | Error::Json(_) => MetStatus::Validation,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(MetStatus::NullPointer, format!("{what} is null"))
}

/// Runs `body` with panics caught and the error slot maintained.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> MetStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_error("");
            MetStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            MetStatus::Panic
        }
    }
}

unsafe fn handle<'a>(h: *const MetEnsemble) -> Result<&'a MetEnsemble, Failure> {
    h.as_ref().ok_or_else(|| null("ensemble handle"))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Copies `text` plus a terminating NUL into `buf`. `needed` always receives
/// the full size including the NUL, so callers can size a second attempt.
unsafe fn write_str(
    text: &str,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> Result<(), Failure> {
    let size = text.len() + 1;
    if let Some(n) = needed.as_mut() {
        *n = size;
    }
    if buf.is_null() || len < size {
        return Err(Failure(
            MetStatus::BufferTooSmall,
            format!("buffer holds {len} bytes, {size} needed"),
        ));
    }
    std::ptr::copy_nonoverlapping(text.as_ptr(), buf.cast::<u8>(), text.len());
    *buf.add(text.len()) = 0;
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn met_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's most recent error message into `buf`.
///
/// The message is empty after a successful call. Returns the number of bytes
/// required including the terminating NUL. Writes nothing when `buf` is null
/// or `len` is smaller than that.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn met_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let size = msg.len() + 1;
        if !buf.is_null() && len >= size {
            std::ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), msg.len());
            *buf.add(msg.len()) = 0;
        }
        size
    })
}

/// Parses and validates a JSON ensemble. On success `*out_handle` owns a new
/// handle; on failure it is set to null.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out_handle` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn met_ensemble_from_json(
    json: *const c_char,
    out_handle: *mut *mut MetEnsemble,
) -> MetStatus {
    guard(|| {
        let slot = out(out_handle, "out")?;
        *slot = std::ptr::null_mut();
        if json.is_null() {
            return Err(null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| Failure(MetStatus::InvalidUtf8, e.to_string()))?;
        let spec = parse_spec(text)?;
        *slot = Box::into_raw(Box::new(MetEnsemble {
            spec,
            model: OnceLock::new(),
            stability: OnceLock::new(),
        }));
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `h` must be null or a handle from [`met_ensemble_from_json`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn met_ensemble_free(h: *mut MetEnsemble) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Number of edge types.
///
/// # Safety
/// `h` must be a live handle and `n` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn met_ensemble_num_edge_types(
    h: *const MetEnsemble,
    n: *mut usize,
) -> MetStatus {
    guard(|| {
        *out(n, "n")? = handle(h)?.spec.num_edge_types();
        Ok(())
    })
}

/// Transmitted length and design dimension of the ensemble at its stated counts.
///
/// # Safety
/// `h` must be a live handle; `length` and `dimension` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn met_ensemble_size(
    h: *const MetEnsemble,
    length: *mut u64,
    dimension: *mut i64,
) -> MetStatus {
    guard(|| {
        let e = handle(h)?;
        *out(length, "length")? = e.spec.length();
        *out(dimension, "dimension")? = e.spec.dimension();
        Ok(())
    })
}

/// Hex SHA-256 digest of the canonical ensemble, NUL-terminated (65 bytes).
///
/// # Safety
/// `h` must be a live handle, `buf` null or `len` writable bytes, `needed`
/// null or a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn met_ensemble_digest(
    h: *const MetEnsemble,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> MetStatus {
    guard(|| write_str(&handle(h)?.spec.digest(), buf, len, needed))
}

/// One application of the EXIT map: `y = f(x, epsilon)`. Both arrays hold
/// `n` entries and `n` must equal the number of edge types.
///
/// # Safety
/// `x` must point to `n` readable doubles and `y` to `n` writable ones.
#[no_mangle]
pub unsafe extern "C" fn met_exit_map(
    h: *const MetEnsemble,
    x: *const f64,
    n: usize,
    epsilon: f64,
    y: *mut f64,
) -> MetStatus {
    guard(|| {
        let e = handle(h)?;
        if x.is_null() {
            return Err(null("x"));
        }
        if y.is_null() {
            return Err(null("y"));
        }
        let n_e = e.spec.num_edge_types();
        if n != n_e {
            return Err(Failure(
                MetStatus::Validation,
                format!("state has {n} entries, ensemble has {n_e} edge types"),
            ));
        }
        let input = std::slice::from_raw_parts(x, n);
        let result = e.model()?.map(input, epsilon)?;
        std::slice::from_raw_parts_mut(y, n).copy_from_slice(&result);
        Ok(())
    })
}

/// BP threshold by bisection to half-width `tol_eps`; 0 selects the default.
///
/// # Safety
/// `h` must be a live handle and `threshold` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn met_threshold(
    h: *const MetEnsemble,
    tol_eps: f64,
    threshold: *mut f64,
) -> MetStatus {
    guard(|| {
        let e = handle(h)?;
        let slot = out(threshold, "threshold")?;
        let mut opts = ThresholdOptions::default();
        if tol_eps != 0.0 {
            opts.tol_eps = tol_eps;
        }
        *slot = e.model()?.threshold(&opts)?.threshold;
        Ok(())
    })
}

/// Spectral radius of `P(epsilon)·C`. Returns `MET_STATUS_HYPOTHESIS` for
/// ensembles outside the scope of the stability analysis.
///
/// # Safety
/// `h` must be a live handle and `sigma` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn met_stability_sigma(
    h: *const MetEnsemble,
    epsilon: f64,
    sigma: *mut f64,
) -> MetStatus {
    guard(|| {
        let e = handle(h)?;
        let slot = out(sigma, "sigma")?;
        *slot = e.stability()?.sigma(epsilon)?;
        Ok(())
    })
}

/// Largest channel parameter at which the erasure-free fixed point is
/// stable, to within `tol_eps` (0 selects the default). When the bound is
/// not reached inside `[0, 1]`, `*unbounded` is set and `*bound` is 1.
///
/// # Safety
/// `h` must be a live handle; `bound` and `unbounded` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn met_stability_bound(
    h: *const MetEnsemble,
    tol_eps: f64,
    bound: *mut f64,
    unbounded: *mut bool,
) -> MetStatus {
    guard(|| {
        let e = handle(h)?;
        let b = out(bound, "bound")?;
        let u = out(unbounded, "unbounded")?;
        let tol = if tol_eps == 0.0 {
            met_dgldpc::stability::DEFAULT_BOUND_TOL
        } else {
            tol_eps
        };
        match e.stability()?.bound(tol)? {
            StabilityBound::Bounded(v) => {
                *b = v;
                *u = false;
            }
            StabilityBound::Unbounded => {
                *b = 1.0;
                *u = true;
            }
        }
        Ok(())
    })
}

/// Monte Carlo peeling-decoder estimate at one channel parameter.
///
/// Each of `trials` codes is sampled at lifting factor `scale` from `seed`.
/// Outputs are the failure count and the bit erasure rate over transmitted
/// bits. Results depend only on the arguments, not on the thread count.
///
/// # Safety
/// `h` must be a live handle; `failures` and `ber` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn met_simulate_point(
    h: *const MetEnsemble,
    epsilon: f64,
    scale: u64,
    trials: u64,
    seed: u64,
    failures: *mut u64,
    ber: *mut f64,
) -> MetStatus {
    guard(|| {
        let e = handle(h)?;
        let f = out(failures, "failures")?;
        let b = out(ber, "ber")?;
        let opts = SweepOptions {
            scale,
            trials: usize::try_from(trials)
                .map_err(|_| Failure(MetStatus::Capacity, "too many trials".into()))?,
            seed,
            ..Default::default()
        };
        let p = simulate_point(&e.spec, epsilon, 0, &opts)?;
        *f = p.failures as u64;
        *b = p.ber;
        Ok(())
    })
}
