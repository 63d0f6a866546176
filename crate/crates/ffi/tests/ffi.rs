use std::ffi::CStr;
use std::mem::MaybeUninit;
use std::ptr;

use stopwindow_ffi::*;

const GOLDEN: [f64; 10] = [80.0, 81.0, 82.0, 81.8, 81.7, 81.6, 81.5, 81.4, 81.6, 81.8];

fn default_config() -> SwConfig {
    let mut config = MaybeUninit::uninit();
    assert_eq!(unsafe { sw_config_default(config.as_mut_ptr()) }, SwStatus::Ok);
    unsafe { config.assume_init() }
}

fn new_detector(config: &SwConfig) -> *mut SwDetector {
    let mut det = ptr::null_mut();
    assert_eq!(unsafe { sw_detector_new(config, &mut det) }, SwStatus::Ok);
    assert!(!det.is_null());
    det
}

fn feed(det: *mut SwDetector, epoch: u32, metric: f64) -> (SwStatus, SwDecision) {
    let mut out = MaybeUninit::zeroed();
    let status = unsafe { sw_detector_feed(det, epoch, metric, f64::NAN, out.as_mut_ptr()) };
    (status, unsafe { out.assume_init() })
}

fn last_error() -> String {
    let p = sw_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn default_config_values() {
    let c = default_config();
    assert_eq!(c.min_window, 4);
    assert_eq!(c.max_oscillation, 2.0);
    assert_eq!(c.max_epochs, 200);
    assert_eq!(c.mode, SwMode::SignChange);
    assert_eq!(c.epsilon, 0.0);
    assert_eq!(c.size, SwSize::Exclusive);
}

#[test]
fn golden_stream_stops_at_epoch_nine() {
    let det = new_detector(&default_config());
    for (i, m) in GOLDEN.iter().enumerate().take(8) {
        let (status, d) = feed(det, i as u32 + 1, *m);
        assert_eq!(status, SwStatus::Ok);
        assert_eq!(d.action, SwAction::Continue);
    }
    let (status, d) = feed(det, 9, GOLDEN[8]);
    assert_eq!(status, SwStatus::Ok);
    assert_eq!(
        d,
        SwDecision { action: SwAction::Stop, window_start: 3, window_end: 8, stop_epoch: 3, lag: 1, best_epoch: 0 }
    );

    let (status, _) = feed(det, 10, GOLDEN[9]);
    assert_eq!(status, SwStatus::FedAfterStop);
    assert!(!last_error().is_empty());
    unsafe { sw_detector_free(det) };
}

#[test]
fn finish_reports_best_epoch() {
    let det = new_detector(&default_config());
    for (e, m) in [(1, 50.0), (2, 52.0), (3, 51.0)] {
        assert_eq!(feed(det, e, m).0, SwStatus::Ok);
    }
    let mut out = MaybeUninit::zeroed();
    assert_eq!(unsafe { sw_detector_finish(det, out.as_mut_ptr()) }, SwStatus::Ok);
    let d = unsafe { out.assume_init() };
    assert_eq!(d.action, SwAction::Exhausted);
    assert_eq!(d.best_epoch, 2);
    unsafe { sw_detector_free(det) };
}

#[test]
fn invalid_config_is_rejected() {
    let config = SwConfig { min_window: 1, max_oscillation: 3.0, ..default_config() };
    let mut det = ptr::null_mut();
    assert_eq!(unsafe { sw_detector_new(&config, &mut det) }, SwStatus::InvalidConfig);
    assert!(det.is_null());
    let msg = last_error();
    assert!(msg.contains("N=1"), "{msg}");
    assert!(msg.contains("D=3"), "{msg}");
}

#[test]
fn record_errors() {
    let det = new_detector(&default_config());
    assert_eq!(feed(det, 1, 150.0).0, SwStatus::InvalidRecord);
    assert_eq!(feed(det, 1, 50.0).0, SwStatus::Ok);
    assert_eq!(feed(det, 3, 50.0).0, SwStatus::NonConsecutiveEpoch);
    let mut out = MaybeUninit::zeroed();
    let empty = new_detector(&default_config());
    assert_eq!(unsafe { sw_detector_finish(empty, out.as_mut_ptr()) }, SwStatus::EmptyTrace);
    unsafe {
        sw_detector_free(det);
        sw_detector_free(empty);
    }
}

#[test]
fn null_pointers() {
    let config = default_config();
    let mut det = ptr::null_mut();
    let mut out = MaybeUninit::<SwDecision>::zeroed();
    let mut value = 0.0;
    unsafe {
        assert_eq!(sw_config_default(ptr::null_mut()), SwStatus::NullPointer);
        assert_eq!(sw_detector_new(ptr::null(), &mut det), SwStatus::NullPointer);
        assert_eq!(sw_detector_new(&config, ptr::null_mut()), SwStatus::NullPointer);
        assert_eq!(sw_detector_feed(ptr::null_mut(), 1, 50.0, f64::NAN, out.as_mut_ptr()), SwStatus::NullPointer);
        assert_eq!(sw_detector_finish(ptr::null_mut(), out.as_mut_ptr()), SwStatus::NullPointer);
        assert_eq!(sw_eff_gain(3, 200, ptr::null_mut()), SwStatus::NullPointer);
        assert_eq!(sw_max_diff(1.0, 2.0, ptr::null_mut()), SwStatus::NullPointer);
        sw_detector_free(ptr::null_mut());
        assert_eq!(sw_eff_gain(3, 200, &mut value), SwStatus::Ok);
    }
}

#[test]
fn report_helpers() {
    let mut v = 0.0;
    unsafe {
        assert_eq!(sw_eff_gain(39, 200, &mut v), SwStatus::Ok);
        assert_eq!(v, 80.5);
        assert_eq!(sw_eff_gain(201, 200, &mut v), SwStatus::OutOfRange);
        assert_eq!(sw_max_diff(81.76, 84.24, &mut v), SwStatus::Ok);
        assert!((v - 81.76 / 84.24).abs() < 1e-15);
        assert_eq!(sw_max_diff(1.0, 0.0, &mut v), SwStatus::OutOfRange);
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(sw_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/stopwindow.h")).unwrap();
    for needle in [
        "#ifndef STOPWINDOW_H",
        "typedef struct SwDetector SwDetector;",
        "SW_STATUS_OK = 0",
        "SW_STATUS_INVALID_CONFIG = 2",
        "sw_config_default(",
        "sw_detector_new(",
        "sw_detector_feed(",
        "sw_detector_finish(",
        "sw_detector_free(",
        "sw_eff_gain(",
        "sw_max_diff(",
        "sw_last_error_message(",
        "sw_version(",
    ] {
        assert!(header.contains(needle), "missing {needle}");
    }
}
