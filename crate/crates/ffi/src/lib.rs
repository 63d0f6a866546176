//! C ABI over the stop-window detector.
//!
//! The detector is exposed as an opaque `SwDetector` handle created with
//! [`sw_detector_new`] and released with [`sw_detector_free`]. Every
//! fallible call returns an [`SwStatus`]; on failure a human-readable
//! message is available from [`sw_last_error_message`] on the same thread.
//! The header `include/stopwindow.h` is regenerated by the build script.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use stopwindow::report;
use stopwindow::{Decision, Detector, DetectorConfig, EpochRecord, Error, ExtremumMode, SizeSemantics};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidConfig = 2,
    InvalidRecord = 3,
    NonConsecutiveEpoch = 4,
    FedAfterStop = 5,
    OutOfRange = 6,
    EmptyTrace = 7,
    Internal = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwMode {
    SignChange = 0,
    Strict = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwSize {
    Exclusive = 0,
    Inclusive = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwConfig {
    pub min_window: u32,
    pub max_oscillation: f64,
    pub max_epochs: u32,
    pub mode: SwMode,
    pub epsilon: f64,
    pub size: SwSize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwAction {
    Continue = 0,
    Stop = 1,
    Exhausted = 2,
}

/// Decision record. Fields not meaningful for `action` are zero.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SwDecision {
    pub action: SwAction,
    pub window_start: u32,
    pub window_end: u32,
    pub stop_epoch: u32,
    pub lag: u32,
    pub best_epoch: u32,
}

/// Opaque detector handle.
pub struct SwDetector {
    inner: Detector,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn fail(status: SwStatus, err: &Error) -> SwStatus {
    set_error(err.to_string());
    status
}

fn status_for(err: &Error) -> SwStatus {
    match err {
        Error::InvalidConfig(_) | Error::InvalidN(_) | Error::InvalidD(_) => SwStatus::InvalidConfig,
        Error::InvalidRecord { .. } => SwStatus::InvalidRecord,
        Error::NonConsecutiveEpoch { .. } => SwStatus::NonConsecutiveEpoch,
        Error::FedAfterStop => SwStatus::FedAfterStop,
        Error::OutOfRange(_) | Error::NonPositiveMax(_) => SwStatus::OutOfRange,
        Error::EmptyTrace => SwStatus::EmptyTrace,
        _ => SwStatus::Internal,
    }
}

fn guarded(f: impl FnOnce() -> SwStatus) -> SwStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| {
        set_error("internal panic");
        SwStatus::Internal
    })
}

impl From<SwConfig> for DetectorConfig {
    fn from(c: SwConfig) -> Self {
        DetectorConfig {
            min_window: c.min_window,
            max_oscillation: c.max_oscillation,
            max_epochs: c.max_epochs,
            mode: match c.mode {
                SwMode::SignChange => ExtremumMode::SignChange,
                SwMode::Strict => ExtremumMode::Strict,
            },
            epsilon: c.epsilon,
            size_semantics: match c.size {
                SwSize::Exclusive => SizeSemantics::Exclusive,
                SwSize::Inclusive => SizeSemantics::Inclusive,
            },
        }
    }
}

impl From<&Decision> for SwDecision {
    fn from(d: &Decision) -> Self {
        let blank = SwDecision {
            action: SwAction::Continue,
            window_start: 0,
            window_end: 0,
            stop_epoch: 0,
            lag: 0,
            best_epoch: 0,
        };
        match d {
            Decision::Continue => blank,
            Decision::Stop { window, stop_epoch, lag } => SwDecision {
                action: SwAction::Stop,
                window_start: window.start(),
                window_end: window.end(),
                stop_epoch: *stop_epoch,
                lag: *lag,
                ..blank
            },
            Decision::Exhausted { best_epoch } => SwDecision {
                action: SwAction::Exhausted,
                best_epoch: *best_epoch,
                ..blank
            },
        }
    }
}

/// Fills `out` with the default configuration (N=4, D=2, 200 epochs,
/// sign-change extrema, exclusive size).
///
/// # Safety
/// `out` must be null or point to writable memory for one `SwConfig`.
#[no_mangle]
pub unsafe extern "C" fn sw_config_default(out: *mut SwConfig) -> SwStatus {
    if out.is_null() {
        set_error("null output pointer");
        return SwStatus::NullPointer;
    }
    let d = DetectorConfig::default();
    // SAFETY: non-null and writable per the caller contract.
    unsafe {
        out.write(SwConfig {
            min_window: d.min_window,
            max_oscillation: d.max_oscillation,
            max_epochs: d.max_epochs,
            mode: SwMode::SignChange,
            epsilon: d.epsilon,
            size: SwSize::Exclusive,
        });
    }
    SwStatus::Ok
}

/// Creates a detector. On success `*out` receives a handle that must be
/// released with `sw_detector_free`.
///
/// # Safety
/// `config` must point to a valid `SwConfig`; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sw_detector_new(config: *const SwConfig, out: *mut *mut SwDetector) -> SwStatus {
    guarded(|| {
        if config.is_null() || out.is_null() {
            set_error("null pointer argument");
            return SwStatus::NullPointer;
        }
        // SAFETY: checked non-null; caller guarantees validity.
        let config = unsafe { *config };
        match Detector::new(config.into()) {
            Ok(inner) => {
                let handle = Box::into_raw(Box::new(SwDetector { inner }));
                // SAFETY: checked non-null.
                unsafe { out.write(handle) };
                SwStatus::Ok
            }
            Err(e) => fail(status_for(&e), &e),
        }
    })
}

/// Feeds one epoch. Pass NaN as `val_loss` when no loss is available.
///
/// # Safety
/// `detector` must be a live handle from `sw_detector_new`; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn sw_detector_feed(
    detector: *mut SwDetector,
    epoch: u32,
    metric: f64,
    val_loss: f64,
    out: *mut SwDecision,
) -> SwStatus {
    guarded(|| {
        if detector.is_null() || out.is_null() {
            set_error("null pointer argument");
            return SwStatus::NullPointer;
        }
        // SAFETY: live handle per the caller contract; no aliasing across calls.
        let detector = unsafe { &mut *detector };
        let record = EpochRecord {
            epoch,
            metric,
            val_loss: (!val_loss.is_nan()).then_some(val_loss),
            train_loss: None,
        };
        match detector.inner.feed(record) {
            Ok(decision) => {
                // SAFETY: checked non-null.
                unsafe { out.write(SwDecision::from(&decision)) };
                SwStatus::Ok
            }
            Err(e) => fail(status_for(&e), &e),
        }
    })
}

/// Ends the stream before `max_epochs`, yielding an exhausted decision.
///
/// # Safety
/// Same requirements as `sw_detector_feed`.
#[no_mangle]
pub unsafe extern "C" fn sw_detector_finish(detector: *mut SwDetector, out: *mut SwDecision) -> SwStatus {
    guarded(|| {
        if detector.is_null() || out.is_null() {
            set_error("null pointer argument");
            return SwStatus::NullPointer;
        }
        // SAFETY: live handle per the caller contract.
        let detector = unsafe { &mut *detector };
        match detector.inner.finish() {
            Ok(decision) => {
                // SAFETY: checked non-null.
                unsafe { out.write(SwDecision::from(&decision)) };
                SwStatus::Ok
            }
            Err(e) => fail(status_for(&e), &e),
        }
    })
}

/// Releases a detector. Null is ignored.
///
/// # Safety
/// `detector` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sw_detector_free(detector: *mut SwDetector) {
    if !detector.is_null() {
        // SAFETY: handle came from Box::into_raw in sw_detector_new.
        drop(unsafe { Box::from_raw(detector) });
    }
}

/// `(1 - stop_epoch / max_epochs) * 100`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sw_eff_gain(stop_epoch: u32, max_epochs: u32, out: *mut f64) -> SwStatus {
    if out.is_null() {
        set_error("null output pointer");
        return SwStatus::NullPointer;
    }
    match report::eff_gain(stop_epoch, max_epochs) {
        // SAFETY: checked non-null.
        Ok(v) => unsafe {
            out.write(v);
            SwStatus::Ok
        },
        Err(e) => fail(status_for(&e), &e),
    }
}

/// `metric_at_stop / global_max`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sw_max_diff(metric_at_stop: f64, global_max: f64, out: *mut f64) -> SwStatus {
    if out.is_null() {
        set_error("null output pointer");
        return SwStatus::NullPointer;
    }
    match report::max_diff(metric_at_stop, global_max) {
        // SAFETY: checked non-null.
        Ok(v) => unsafe {
            out.write(v);
            SwStatus::Ok
        },
        Err(e) => fail(status_for(&e), &e),
    }
}

/// Message for the last failure on the calling thread, or null. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sw_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sw_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
