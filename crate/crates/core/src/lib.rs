//! Early stopping from the shape of an accuracy curve.
//!
//! The stop-window criterion watches a per-epoch accuracy metric, locates
//! local maxima and minima with unit-spacing forward differences, and stops
//! at the first max-to-min window that is long enough (`N`) and flat enough
//! (every step below `D`). Four loss-based baselines, summary statistics and
//! comparison tables sit alongside it.
//!
//! ```
//! use stopwindow::{Decision, Detector, DetectorConfig, EpochRecord};
//!
//! let mut detector = Detector::new(DetectorConfig::default()).unwrap();
//! let metrics = [80.0, 81.0, 82.0, 81.8, 81.7, 81.6, 81.5, 81.4, 81.6, 81.8];
//! let mut decision = Decision::Continue;
//! for (i, m) in metrics.iter().enumerate() {
//!     decision = detector.feed(EpochRecord::new(i as u32 + 1, *m, None).unwrap()).unwrap();
//!     if !decision.is_continue() {
//!         break;
//!     }
//! }
//! assert!(matches!(decision, Decision::Stop { stop_epoch: 3, lag: 1, .. }));
//! ```

pub mod baselines;
pub mod calculus;
pub mod cli;
pub mod detector;
pub mod error;
pub mod protocol;
pub mod report;
pub mod trace;

pub use baselines::{run_strategy, StrategyOutcome, StrategySpec};
pub use calculus::{Extremum, ExtremumKind, ExtremumMode, SizeSemantics, Window};
pub use detector::{detect_offline, replay, Decision, Detector, DetectorConfig, Status};
pub use error::{Error, Result};
pub use report::{ComparisonRow, ComparisonTable, Format, WindowStats};
pub use trace::{CurveParams, EpochRecord, TrainingTrace};
