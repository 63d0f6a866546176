//! Stop-window statistics, efficiency/accuracy comparison tables and their
//! markdown, CSV and JSON renderings.
//!
//! All arithmetic is carried at full precision. Markdown rounds metrics and
//! ratios to two decimals and efficiency gains to one; CSV and JSON keep
//! full precision so both parse back to the same table.
//!
//! CSV schema for comparison tables:
//!
//! ```text
//! strategy,stop_epoch,metric_at_stop,max_diff,eff_gain,flags
//! ```
//!
//! `flags` is a `;`-separated list drawn from `exhausted`, `not_stopped`
//! and `horizon_mismatch`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::baselines::{self, StrategySpec};
use crate::calculus::Window;
use crate::detector::{self, Decision, DetectorConfig};
use crate::error::{Error, Result};
use crate::trace::TrainingTrace;

pub const STOP_WINDOW_LABEL: &str = "stop_window";
pub const FLAG_EXHAUSTED: &str = "exhausted";
pub const FLAG_NOT_STOPPED: &str = "not_stopped";
pub const FLAG_HORIZON_MISMATCH: &str = "horizon_mismatch";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Markdown,
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "markdown" | "md" => Ok(Self::Markdown),
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(Error::OutOfRange(format!("unknown format `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowStats {
    pub sw_avg: f64,
    /// Population standard deviation over the window.
    pub sw_std: f64,
    pub sw_max: f64,
    /// Maximum over the whole trace.
    pub global_max: f64,
    pub sw_max_diff: f64,
    pub sw_avg_diff: f64,
}

pub fn window_stats(trace: &TrainingTrace, window: &Window) -> Result<WindowStats> {
    let (start, end) = (window.start(), window.end());
    let out_of_range = || Error::WindowOutOfRange { start, end };
    trace.get(start).ok_or_else(out_of_range)?;
    trace.get(end).ok_or_else(out_of_range)?;

    let values: Vec<f64> = trace
        .records()
        .iter()
        .filter(|r| (start..=end).contains(&r.epoch))
        .map(|r| r.metric)
        .collect();
    let n = values.len() as f64;
    let sw_avg = values.iter().sum::<f64>() / n;
    let sw_std = (values.iter().map(|v| (v - sw_avg).powi(2)).sum::<f64>() / n).sqrt();
    let sw_max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let global_max = global_max(trace);
    Ok(WindowStats {
        sw_avg,
        sw_std,
        sw_max,
        global_max,
        sw_max_diff: max_diff(sw_max, global_max)?,
        sw_avg_diff: max_diff(sw_avg, global_max)?,
    })
}

pub fn global_max(trace: &TrainingTrace) -> f64 {
    trace.records().iter().map(|r| r.metric).fold(f64::NEG_INFINITY, f64::max)
}

/// Training time saved, in percent: `(1 - stop_epoch / max_epochs) * 100`.
pub fn eff_gain(stop_epoch: u32, max_epochs: u32) -> Result<f64> {
    if max_epochs == 0 || stop_epoch > max_epochs {
        return Err(Error::OutOfRange(format!(
            "stop epoch {stop_epoch} outside [0, {max_epochs}]"
        )));
    }
    // (max - stop) * 100 / max is exact for the common 200-epoch cases
    Ok(f64::from(max_epochs - stop_epoch) * 100.0 / f64::from(max_epochs))
}

/// Metric at the stopping point relative to the best metric of the run.
pub fn max_diff(metric_at_stop: f64, global_max: f64) -> Result<f64> {
    if global_max.is_nan() || global_max <= 0.0 {
        return Err(Error::NonPositiveMax(global_max));
    }
    Ok(metric_at_stop / global_max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub strategy: String,
    pub stop_epoch: u32,
    pub metric_at_stop: f64,
    pub max_diff: f64,
    pub eff_gain: f64,
    #[serde(default)]
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

/// One row for the stop-window detector followed by one per baseline.
///
/// Baselines only see epochs up to `max_epochs`, matching the detector's
/// horizon; `max_diff` is taken against the maximum over the full trace and
/// `eff_gain` against `max_epochs`. When the trace does not end exactly at
/// `max_epochs` every row carries `horizon_mismatch`.
pub fn compare(
    trace: &TrainingTrace,
    config: &DetectorConfig,
    specs: &[StrategySpec],
) -> Result<ComparisonTable> {
    let best = global_max(trace);
    let mut common_flags = Vec::new();
    if trace.last_epoch() != config.max_epochs {
        common_flags.push(FLAG_HORIZON_MISMATCH.to_string());
    }
    let row = |strategy: String, stop_epoch: u32, extra: Option<&str>| -> Result<ComparisonRow> {
        let metric_at_stop = trace
            .get(stop_epoch)
            .expect("stop epochs come from the trace")
            .metric;
        let mut flags: Vec<String> = extra.map(str::to_string).into_iter().collect();
        flags.extend(common_flags.iter().cloned());
        Ok(ComparisonRow {
            strategy,
            stop_epoch,
            metric_at_stop,
            max_diff: max_diff(metric_at_stop, best)?,
            eff_gain: eff_gain(stop_epoch, config.max_epochs)?,
            flags,
        })
    };

    let mut rows = Vec::with_capacity(specs.len() + 1);
    rows.push(match detector::replay(trace, config)? {
        Decision::Stop { stop_epoch, .. } => row(STOP_WINDOW_LABEL.into(), stop_epoch, None)?,
        Decision::Exhausted { best_epoch } => {
            row(STOP_WINDOW_LABEL.into(), best_epoch, Some(FLAG_EXHAUSTED))?
        }
        Decision::Continue => unreachable!("replay never ends on Continue"),
    });

    if !specs.is_empty() {
        let horizon = trace
            .truncated(config.max_epochs)
            .unwrap_or_else(|| trace.truncated(trace.first_epoch()).expect("non-empty"));
        for spec in specs {
            let outcome = baselines::run_strategy(&horizon, spec)?;
            let extra = (!outcome.stopped).then_some(FLAG_NOT_STOPPED);
            rows.push(row(spec.label(), outcome.stop_epoch, extra)?);
        }
    }
    Ok(ComparisonTable { rows })
}

pub trait Render {
    fn render(&self, format: Format) -> String;
}

pub fn render<T: Render + ?Sized>(item: &T, format: Format) -> String {
    item.render(format)
}

impl Render for ComparisonTable {
    fn render(&self, format: Format) -> String {
        match format {
            Format::Markdown => {
                let mut out = String::from(
                    "| strategy | stop_epoch | metric_at_stop | max_diff | eff_gain | flags |\n\
                     |---|---|---|---|---|---|\n",
                );
                for r in &self.rows {
                    let _ = writeln!(
                        out,
                        "| {} | {} | {:.2} | {:.2} | {:.1}(%) | {} |",
                        r.strategy,
                        r.stop_epoch,
                        r.metric_at_stop,
                        r.max_diff,
                        r.eff_gain,
                        r.flags.join(", ")
                    );
                }
                out
            }
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(["strategy", "stop_epoch", "metric_at_stop", "max_diff", "eff_gain", "flags"])
                    .expect("in-memory write");
                for r in &self.rows {
                    w.write_record([
                        r.strategy.clone(),
                        r.stop_epoch.to_string(),
                        r.metric_at_stop.to_string(),
                        r.max_diff.to_string(),
                        r.eff_gain.to_string(),
                        r.flags.join(";"),
                    ])
                    .expect("in-memory write");
                }
                String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
            }
            Format::Json => {
                let mut s = serde_json::to_string_pretty(self).expect("plain data serializes");
                s.push('\n');
                s
            }
        }
    }
}

impl Render for WindowStats {
    fn render(&self, format: Format) -> String {
        let fields = [
            ("sw_avg", self.sw_avg),
            ("sw_std", self.sw_std),
            ("sw_max", self.sw_max),
            ("global_max", self.global_max),
            ("sw_max_diff", self.sw_max_diff),
            ("sw_avg_diff", self.sw_avg_diff),
        ];
        match format {
            Format::Markdown => {
                let mut out = String::from("| statistic | value |\n|---|---|\n");
                for (name, v) in fields {
                    let _ = writeln!(out, "| {name} | {v:.2} |");
                }
                out
            }
            Format::Csv => {
                let names: Vec<&str> = fields.iter().map(|f| f.0).collect();
                let values: Vec<String> = fields.iter().map(|f| f.1.to_string()).collect();
                format!("{}\n{}\n", names.join(","), values.join(","))
            }
            Format::Json => {
                let mut s = serde_json::to_string_pretty(self).expect("plain data serializes");
                s.push('\n');
                s
            }
        }
    }
}

pub fn parse_table_json(text: &str) -> Result<ComparisonTable> {
    serde_json::from_str(text).map_err(|e| Error::MalformedRow {
        line: e.line(),
        detail: e.to_string(),
    })
}

pub fn parse_table_csv(text: &str) -> Result<ComparisonTable> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| Error::MalformedHeader(e.to_string()))?;
    let expected = ["strategy", "stop_epoch", "metric_at_stop", "max_diff", "eff_gain", "flags"];
    if header.iter().ne(expected) {
        return Err(Error::MalformedHeader(format!("expected columns {}", expected.join(","))));
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::MalformedRow {
            line: e.position().map_or(0, |p| p.line() as usize),
            detail: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let bad = |what: &str| Error::MalformedRow {
            line,
            detail: format!("bad {what}"),
        };
        let real = |i: usize, what: &str| rec[i].parse::<f64>().map_err(|_| bad(what));
        rows.push(ComparisonRow {
            strategy: rec[0].to_string(),
            stop_epoch: rec[1].parse().map_err(|_| bad("stop_epoch"))?,
            metric_at_stop: real(2, "metric_at_stop")?,
            max_diff: real(3, "max_diff")?,
            eff_gain: real(4, "eff_gain")?,
            flags: rec[5]
                .split(';')
                .filter(|s| !s.is_empty())
                .map(str::to_string)
                .collect(),
        });
    }
    Ok(ComparisonTable { rows })
}
