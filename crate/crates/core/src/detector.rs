//! Stop-window detector.
//!
//! [`Detector`] consumes one [`EpochRecord`] per epoch. Extrema are
//! confirmed causally: a verdict about epoch `e` needs the samples that the
//! forward differences at `e` look at, so it becomes available one epoch
//! later in sign-change mode (longer across plateaus) and two epochs later
//! in strict mode. Whenever a local minimum is confirmed and some local
//! maximum precedes it, the window from the most recent such maximum to the
//! minimum is tested; the first window that qualifies stops the run.
//!
//! On `Stop`, the epoch being fed is the one at which training halts while
//! `stop_epoch` may be earlier. Callers that want the model at `stop_epoch`
//! must keep checkpoints for at least `window span + lag` epochs.
//!
//! [`detect_offline`] re-derives the same decision from a complete trace
//! with a full extremum scan and serves as the reference implementation.

use serde::{Deserialize, Serialize};

use crate::calculus::{self, ExtremumKind, ExtremumMode, SizeSemantics, Window};
use crate::error::{Error, Result};
use crate::trace::{EpochRecord, TrainingTrace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Minimum window size (N).
    pub min_window: u32,
    /// Every consecutive step inside a window must stay strictly below this
    /// magnitude (D), in metric percent.
    pub max_oscillation: f64,
    pub max_epochs: u32,
    pub mode: ExtremumMode,
    /// Zero-derivative tolerance for strict mode.
    pub epsilon: f64,
    pub size_semantics: SizeSemantics,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            min_window: 4,
            max_oscillation: 2.0,
            max_epochs: 200,
            mode: ExtremumMode::SignChange,
            epsilon: 0.0,
            size_semantics: SizeSemantics::Exclusive,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.max_epochs < 3 {
            problems.push(format!("max_epochs={} must be at least 3", self.max_epochs));
        }
        if self.min_window < 2 || self.min_window > self.max_epochs.saturating_sub(1) {
            problems.push(format!(
                "N={} outside [2, max_epochs - 1 = {}]",
                self.min_window,
                self.max_epochs.saturating_sub(1)
            ));
        }
        if !(self.max_oscillation > 0.0 && self.max_oscillation <= 2.0) {
            problems.push(format!("D={} outside (0, 2]", self.max_oscillation));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            problems.push(format!("epsilon={} must be a finite non-negative value", self.epsilon));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems.join("; ")))
        }
    }

    fn qualifies(&self, window: &Window) -> bool {
        calculus::qualify_window(window, self.min_window, self.max_oscillation, self.size_semantics)
            .expect("config validated at construction")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Decision {
    Continue,
    Stop {
        window: Window,
        /// Earliest epoch attaining the window maximum.
        stop_epoch: u32,
        /// Epochs between the window's closing minimum and the epoch at
        /// which it was confirmed.
        lag: u32,
    },
    Exhausted {
        /// Earliest epoch attaining the maximum metric seen.
        best_epoch: u32,
    },
}

impl Decision {
    pub fn is_continue(&self) -> bool {
        matches!(self, Decision::Continue)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Running,
    Stopped,
    Exhausted,
}

/// Streaming detector state. Single owner; not meant for concurrent
/// mutation.
#[derive(Debug, Clone)]
pub struct Detector {
    config: DetectorConfig,
    records: Vec<EpochRecord>,
    last_max: Option<u32>,
    last_min: Option<u32>,
    status: Status,
    // sign-change bookkeeping: index opening the current run and the
    // direction of the last non-zero step
    run_start: usize,
    last_rising: Option<bool>,
}

impl Detector {
    pub fn new(config: DetectorConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            records: Vec::new(),
            last_max: None,
            last_min: None,
            status: Status::Running,
            run_start: 0,
            last_rising: None,
        })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.config
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn records(&self) -> &[EpochRecord] {
        &self.records
    }

    pub fn last_max(&self) -> Option<u32> {
        self.last_max
    }

    pub fn last_min(&self) -> Option<u32> {
        self.last_min
    }

    pub fn feed(&mut self, record: EpochRecord) -> Result<Decision> {
        if self.status != Status::Running {
            return Err(Error::FedAfterStop);
        }
        record.validate()?;
        if let Some(prev) = self.records.last() {
            let expected = prev.epoch.checked_add(1).ok_or(Error::NonConsecutiveEpoch {
                expected: u32::MAX,
                found: record.epoch,
            })?;
            if record.epoch != expected {
                return Err(Error::NonConsecutiveEpoch {
                    expected,
                    found: record.epoch,
                });
            }
        }
        self.records.push(record);

        if let Some((index, kind)) = self.confirm_extremum() {
            let epoch = self.records[index].epoch;
            match kind {
                ExtremumKind::Maximum => self.last_max = Some(epoch),
                ExtremumKind::Minimum => {
                    self.last_min = Some(epoch);
                    if let Some(decision) = self.try_window(record.epoch) {
                        self.status = Status::Stopped;
                        return Ok(decision);
                    }
                }
            }
        }

        if record.epoch >= self.config.max_epochs {
            self.status = Status::Exhausted;
            return Ok(self.exhausted());
        }
        Ok(Decision::Continue)
    }

    /// Closes the stream early: the input ended before `max_epochs` without
    /// a qualifying window.
    pub fn finish(&mut self) -> Result<Decision> {
        if self.status != Status::Running {
            return Err(Error::FedAfterStop);
        }
        if self.records.is_empty() {
            return Err(Error::EmptyTrace);
        }
        self.status = Status::Exhausted;
        Ok(self.exhausted())
    }

    fn exhausted(&self) -> Decision {
        Decision::Exhausted {
            best_epoch: best_epoch(&self.records),
        }
    }

    /// Extremum confirmed by the sample just pushed, if any. At most one
    /// extremum can be confirmed per sample in either mode.
    fn confirm_extremum(&mut self) -> Option<(usize, ExtremumKind)> {
        let t = self.records.len() - 1;
        match self.config.mode {
            ExtremumMode::SignChange => {
                if t == 0 {
                    return None;
                }
                let step = self.records[t].metric - self.records[t - 1].metric;
                if step == 0.0 {
                    return None;
                }
                let rising = step > 0.0;
                let confirmed = match self.last_rising {
                    Some(prev) if prev != rising => Some((
                        self.run_start,
                        if prev { ExtremumKind::Maximum } else { ExtremumKind::Minimum },
                    )),
                    _ => None,
                };
                self.run_start = t;
                self.last_rising = Some(rising);
                confirmed
            }
            ExtremumMode::Strict => {
                if t < 2 {
                    return None;
                }
                let e = t - 2;
                let (a, b, c) = (
                    self.records[e].metric,
                    self.records[e + 1].metric,
                    self.records[e + 2].metric,
                );
                let slope = b - a;
                let curvature = (c - b) - (b - a);
                if slope.abs() > self.config.epsilon {
                    None
                } else if curvature > 0.0 {
                    Some((e, ExtremumKind::Minimum))
                } else if curvature < 0.0 {
                    Some((e, ExtremumKind::Maximum))
                } else {
                    None
                }
            }
        }
    }

    fn try_window(&self, current_epoch: u32) -> Option<Decision> {
        let (start, end) = (self.last_max?, self.last_min?);
        if start >= end {
            return None;
        }
        let first = self.records[0].epoch;
        let values = self.records[(start - first) as usize..=(end - first) as usize]
            .iter()
            .map(|r| r.metric)
            .collect();
        let window = Window::new(start, end, values).expect("extrema lie inside the buffer");
        if !self.config.qualifies(&window) {
            return None;
        }
        Some(Decision::Stop {
            stop_epoch: window.argmax_epoch(),
            lag: current_epoch - end,
            window,
        })
    }
}

fn best_epoch(records: &[EpochRecord]) -> u32 {
    let mut best = &records[0];
    for r in &records[1..] {
        if r.metric > best.metric {
            best = r;
        }
    }
    best.epoch
}

/// Drives a fresh detector over `trace`, returning the first non-`Continue`
/// decision. A trace that ends before `max_epochs` without a stop window
/// yields `Exhausted`.
pub fn replay(trace: &TrainingTrace, config: &DetectorConfig) -> Result<Decision> {
    let mut detector = Detector::new(config.clone())?;
    for record in trace.records() {
        let decision = detector.feed(*record)?;
        if !decision.is_continue() {
            return Ok(decision);
        }
    }
    detector.finish()
}

/// Batch evaluation over a complete trace: scans all extrema within the
/// detector's horizon, enumerates candidate windows in order of their
/// closing minimum and returns the first that qualifies.
pub fn detect_offline(trace: &TrainingTrace, config: &DetectorConfig) -> Result<Decision> {
    config.validate()?;
    // The stream halts at the first epoch >= max_epochs.
    let records = trace.records();
    let horizon = records
        .iter()
        .position(|r| r.epoch >= config.max_epochs)
        .map_or(records.len(), |i| i + 1);
    let records = &records[..horizon];
    let values: Vec<f64> = records.iter().map(|r| r.metric).collect();

    let extrema = if values.len() >= 3 {
        calculus::find_extrema(&values, config.mode, config.epsilon)?
    } else {
        Vec::new()
    };

    let mut last_max: Option<usize> = None;
    for x in &extrema {
        match x.kind {
            ExtremumKind::Maximum => last_max = Some(x.index),
            ExtremumKind::Minimum => {
                let Some(start) = last_max else { continue };
                let window = Window::new(
                    records[start].epoch,
                    records[x.index].epoch,
                    values[start..=x.index].to_vec(),
                )?;
                if !config.qualifies(&window) {
                    continue;
                }
                let confirmed_at = match config.mode {
                    ExtremumMode::Strict => x.index + 2,
                    ExtremumMode::SignChange => {
                        (x.index + 1..values.len())
                            .find(|&k| values[k] != values[k - 1])
                            .expect("a confirmed extremum has a resolving step")
                    }
                };
                return Ok(Decision::Stop {
                    stop_epoch: window.argmax_epoch(),
                    lag: records[confirmed_at].epoch - records[x.index].epoch,
                    window,
                });
            }
        }
    }
    Ok(Decision::Exhausted {
        best_epoch: best_epoch(records),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(metrics: &[f64]) -> TrainingTrace {
        let records = metrics
            .iter()
            .enumerate()
            .map(|(i, m)| EpochRecord::new(i as u32 + 1, *m, None).unwrap())
            .collect();
        TrainingTrace::new(records).unwrap()
    }

    const GOLDEN: [f64; 10] = [80.0, 81.0, 82.0, 81.8, 81.7, 81.6, 81.5, 81.4, 81.6, 81.8];

    #[test]
    fn default_config_is_valid() {
        let d = Detector::new(DetectorConfig::default()).unwrap();
        assert_eq!(d.status(), Status::Running);
        assert!(d.records().is_empty());
    }

    #[test]
    fn config_bounds() {
        let bad = |c: DetectorConfig| match Detector::new(c) {
            Err(Error::InvalidConfig(msg)) => msg,
            other => panic!("expected InvalidConfig, got {other:?}"),
        };
        assert!(bad(DetectorConfig { min_window: 1, ..Default::default() }).contains("N=1"));
        assert!(bad(DetectorConfig { max_oscillation: 2.5, ..Default::default() }).contains("D=2.5"));
        assert!(bad(DetectorConfig { max_oscillation: 0.0, ..Default::default() }).contains("D=0"));
        assert!(bad(DetectorConfig { min_window: 200, ..Default::default() }).contains("N=200"));
        let msg = bad(DetectorConfig { max_epochs: 2, min_window: 1, ..Default::default() });
        assert!(msg.contains("max_epochs") && msg.contains("N=1"));
        assert!(bad(DetectorConfig { epsilon: -1.0, ..Default::default() }).contains("epsilon"));
        assert!(Detector::new(DetectorConfig { min_window: 199, ..Default::default() }).is_ok());
    }

    #[test]
    fn golden_stream_stops_once_minimum_confirmed() {
        // the minimum at epoch 8 is confirmed by the rise at epoch 9
        let mut d = Detector::new(DetectorConfig::default()).unwrap();
        let trace = stream(&GOLDEN);
        for r in &trace.records()[..8] {
            assert_eq!(d.feed(*r).unwrap(), Decision::Continue, "epoch {}", r.epoch);
        }
        let decision = d.feed(trace.records()[8]).unwrap();
        let Decision::Stop { window, stop_epoch, lag } = decision else {
            panic!("expected stop, got {decision:?}");
        };
        assert_eq!((window.start(), window.end()), (3, 8));
        assert_eq!(stop_epoch, 3);
        assert_eq!(lag, 1);
        assert_eq!(d.status(), Status::Stopped);
        assert!(matches!(d.feed(EpochRecord::new(10, 81.8, None).unwrap()), Err(Error::FedAfterStop)));
    }

    #[test]
    fn golden_stream_offline_agrees() {
        let trace = stream(&GOLDEN);
        let config = DetectorConfig::default();
        assert_eq!(detect_offline(&trace, &config).unwrap(), replay(&trace, &config).unwrap());
    }

    #[test]
    fn monotone_stream_exhausts() {
        let config = DetectorConfig { max_epochs: 50, ..Default::default() };
        let metrics: Vec<f64> = (1..=50).map(f64::from).collect();
        let trace = stream(&metrics);
        assert_eq!(replay(&trace, &config).unwrap(), Decision::Exhausted { best_epoch: 50 });
        assert_eq!(detect_offline(&trace, &config).unwrap(), Decision::Exhausted { best_epoch: 50 });
    }

    #[test]
    fn short_peak_trough_pair_does_not_stop() {
        // max at 3, min at 5: size 2 < 4, then divergence
        let metrics = [70.0, 71.0, 72.0, 71.5, 71.0, 74.0, 77.0, 80.0];
        let config = DetectorConfig { max_epochs: 8, ..Default::default() };
        let decision = replay(&stream(&metrics), &config).unwrap();
        assert_eq!(decision, Decision::Exhausted { best_epoch: 8 });
    }

    #[test]
    fn rejects_out_of_order_epochs() {
        let mut d = Detector::new(DetectorConfig::default()).unwrap();
        d.feed(EpochRecord::new(5, 50.0, None).unwrap()).unwrap();
        let err = d.feed(EpochRecord::new(7, 50.0, None).unwrap()).unwrap_err();
        assert!(matches!(err, Error::NonConsecutiveEpoch { expected: 6, found: 7 }));
        // the rejected record leaves the state untouched
        assert_eq!(d.records().len(), 1);
        d.feed(EpochRecord::new(6, 50.0, None).unwrap()).unwrap();
    }

    #[test]
    fn first_record_past_horizon_exhausts() {
        let mut d = Detector::new(DetectorConfig { max_epochs: 10, ..Default::default() }).unwrap();
        let decision = d.feed(EpochRecord::new(12, 42.0, None).unwrap()).unwrap();
        assert_eq!(decision, Decision::Exhausted { best_epoch: 12 });
        assert_eq!(d.status(), Status::Exhausted);
        assert!(matches!(d.finish(), Err(Error::FedAfterStop)));
    }

    #[test]
    fn window_uses_latest_maximum() {
        // Strict mode can confirm two maxima in a row; the later one opens
        // the window.
        let metrics = [
            50.0, 52.0, 52.0, 51.0, 51.5, 51.5, 51.0, 50.8, 50.6, 50.4, 50.4, 51.0, 52.0,
        ];
        let config = DetectorConfig { mode: ExtremumMode::Strict, ..Default::default() };
        let trace = stream(&metrics);
        let decision = replay(&trace, &config).unwrap();
        let Decision::Stop { window, stop_epoch, lag } = &decision else {
            panic!("expected stop, got {decision:?}");
        };
        assert_eq!((window.start(), window.end()), (5, 10));
        assert_eq!(*stop_epoch, 5);
        assert_eq!(*lag, 2);
        assert_eq!(detect_offline(&trace, &config).unwrap(), decision);
    }

    #[test]
    fn plateau_lag_is_reported() {
        // minimum plateau at epochs 7..9 resolves at epoch 10
        let metrics = [70.0, 71.0, 72.0, 71.9, 71.8, 71.7, 71.6, 71.6, 71.6, 72.0];
        let trace = stream(&metrics);
        let decision = replay(&trace, &DetectorConfig::default()).unwrap();
        let Decision::Stop { window, lag, .. } = &decision else {
            panic!("expected stop, got {decision:?}");
        };
        assert_eq!((window.start(), window.end()), (3, 7));
        assert_eq!(*lag, 3);
        assert_eq!(detect_offline(&trace, &DetectorConfig::default()).unwrap(), decision);
    }

    #[test]
    fn finish_on_short_trace() {
        let mut d = Detector::new(DetectorConfig::default()).unwrap();
        assert!(matches!(d.finish(), Err(Error::EmptyTrace)));
        d.feed(EpochRecord::new(1, 10.0, None).unwrap()).unwrap();
        d.feed(EpochRecord::new(2, 30.0, None).unwrap()).unwrap();
        d.feed(EpochRecord::new(3, 20.0, None).unwrap()).unwrap();
        assert_eq!(d.finish().unwrap(), Decision::Exhausted { best_epoch: 2 });
    }
}
