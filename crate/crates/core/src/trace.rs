//! Training traces: the per-epoch record model, CSV/JSONL ingestion and
//! seeded synthetic curves.
//!
//! Every trace satisfies two structural invariants: it is non-empty and its
//! epoch numbers increase by exactly one between consecutive records, so the
//! sample spacing used by the difference operators is always one epoch.
//! Epoch numbers are kept exactly as they appear in the input.

use std::fmt::Write as _;

use rand_chacha::rand_core::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_METRIC_NAME: &str = "ImIoU";
pub const DEFAULT_RUN_ID: &str = "run";

/// Observations for a single epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: u32,
    /// Accuracy-style metric in percent, `[0, 100]`.
    pub metric: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub val_loss: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_loss: Option<f64>,
}

impl EpochRecord {
    pub fn new(epoch: u32, metric: f64, val_loss: Option<f64>) -> Result<Self> {
        let record = Self {
            epoch,
            metric,
            val_loss,
            train_loss: None,
        };
        record.validate()?;
        Ok(record)
    }

    pub fn with_train_loss(mut self, train_loss: f64) -> Result<Self> {
        self.train_loss = Some(train_loss);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |detail: String| Error::InvalidRecord {
            epoch: self.epoch,
            detail,
        };
        if !self.metric.is_finite() || !(0.0..=100.0).contains(&self.metric) {
            return Err(invalid(format!("metric {} outside [0, 100]", self.metric)));
        }
        for (name, loss) in [("val_loss", self.val_loss), ("train_loss", self.train_loss)] {
            if let Some(v) = loss {
                if !v.is_finite() || v < 0.0 {
                    return Err(invalid(format!("{name} {v} is not a finite non-negative value")));
                }
            }
        }
        Ok(())
    }
}

/// A validated, ordered sequence of epoch records for one training run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainingTrace {
    run_id: String,
    metric_name: String,
    records: Vec<EpochRecord>,
}

impl TrainingTrace {
    pub fn new(records: Vec<EpochRecord>) -> Result<Self> {
        let first = records.first().ok_or(Error::EmptyTrace)?;
        first.validate()?;
        for pair in records.windows(2) {
            pair[1].validate()?;
            if pair[0].epoch.checked_add(1) != Some(pair[1].epoch) {
                return Err(Error::NonConsecutiveEpochs {
                    previous: pair[0].epoch,
                    found: pair[1].epoch,
                });
            }
        }
        Ok(Self {
            run_id: DEFAULT_RUN_ID.to_string(),
            metric_name: DEFAULT_METRIC_NAME.to_string(),
            records,
        })
    }

    pub fn with_run_id(mut self, run_id: impl Into<String>) -> Self {
        self.run_id = run_id.into();
        self
    }

    pub fn with_metric_name(mut self, name: impl Into<String>) -> Self {
        self.metric_name = name.into();
        self
    }

    pub fn run_id(&self) -> &str {
        &self.run_id
    }

    pub fn metric_name(&self) -> &str {
        &self.metric_name
    }

    pub fn records(&self) -> &[EpochRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn first_epoch(&self) -> u32 {
        self.records[0].epoch
    }

    pub fn last_epoch(&self) -> u32 {
        self.records[self.records.len() - 1].epoch
    }

    /// Record for `epoch`, if the trace covers it.
    pub fn get(&self, epoch: u32) -> Option<&EpochRecord> {
        let offset = epoch.checked_sub(self.first_epoch())? as usize;
        self.records.get(offset)
    }

    pub fn metrics(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.metric).collect()
    }

    /// Records with epoch `<= last`, or `None` when that leaves nothing.
    pub fn truncated(&self, last: u32) -> Option<Self> {
        let keep = self.records.iter().take_while(|r| r.epoch <= last).count();
        if keep == 0 {
            return None;
        }
        Some(Self {
            run_id: self.run_id.clone(),
            metric_name: self.metric_name.clone(),
            records: self.records[..keep].to_vec(),
        })
    }

    /// Every record with the metric shifted by `offset`, skipping range
    /// validation. Used to probe shift invariance of the detector.
    #[doc(hidden)]
    pub fn shifted_unchecked(&self, offset: f64) -> Self {
        let mut out = self.clone();
        for r in &mut out.records {
            r.metric += offset;
        }
        out
    }
}

/// Column (CSV) or key (JSONL) names for each record field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Columns {
    pub epoch: String,
    pub metric: String,
    pub val_loss: String,
    pub train_loss: String,
}

impl Default for Columns {
    fn default() -> Self {
        Self {
            epoch: "epoch".into(),
            metric: "metric".into(),
            val_loss: "val_loss".into(),
            train_loss: "train_loss".into(),
        }
    }
}

pub fn parse_csv(text: &str) -> Result<TrainingTrace> {
    parse_csv_with(text, &Columns::default())
}

pub fn parse_csv_with(text: &str, columns: &Columns) -> Result<TrainingTrace> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::MalformedHeader(e.to_string()))?
        .clone();

    let find = |name: &str| -> Result<Option<usize>> {
        let mut hits = header.iter().enumerate().filter(|(_, h)| *h == name);
        let first = hits.next().map(|(i, _)| i);
        if hits.next().is_some() {
            return Err(Error::MalformedHeader(format!("duplicate column `{name}`")));
        }
        Ok(first)
    };
    let epoch_col = find(&columns.epoch)?
        .ok_or_else(|| Error::MalformedHeader(format!("missing column `{}`", columns.epoch)))?;
    let metric_col = find(&columns.metric)?
        .ok_or_else(|| Error::MalformedHeader(format!("missing column `{}`", columns.metric)))?;
    let val_col = find(&columns.val_loss)?;
    let train_col = find(&columns.train_loss)?;

    let known = [
        Some(epoch_col),
        Some(metric_col),
        val_col,
        train_col,
    ];
    for (i, name) in header.iter().enumerate() {
        if !known.contains(&Some(i)) {
            log::warn!("ignoring unrecognized column `{name}`");
        }
    }

    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::MalformedRow {
            line: e.position().map_or(0, |p| p.line() as usize),
            detail: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let cell = |idx: usize| row.get(idx).unwrap_or("");
        let epoch = parse_epoch(cell(epoch_col), line)?;
        let metric = parse_real(cell(metric_col), &columns.metric, line)?;
        let optional = |col: Option<usize>, name: &str| -> Result<Option<f64>> {
            match col.map(cell) {
                None | Some("") => Ok(None),
                Some(s) => parse_real(s, name, line).map(Some),
            }
        };
        records.push(EpochRecord {
            epoch,
            metric,
            val_loss: optional(val_col, &columns.val_loss)?,
            train_loss: optional(train_col, &columns.train_loss)?,
        });
    }
    Ok(TrainingTrace::new(records)?.with_metric_name(metric_name_for(columns)))
}

pub fn parse_jsonl(text: &str) -> Result<TrainingTrace> {
    parse_jsonl_with(text, &Columns::default())
}

pub fn parse_jsonl_with(text: &str, columns: &Columns) -> Result<TrainingTrace> {
    let mut records = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let malformed = |detail: String| Error::MalformedRow { line, detail };
        let value: serde_json::Value =
            serde_json::from_str(raw).map_err(|e| malformed(e.to_string()))?;
        let obj = value
            .as_object()
            .ok_or_else(|| malformed("expected a JSON object".into()))?;

        let epoch = obj
            .get(&columns.epoch)
            .ok_or_else(|| malformed(format!("missing key `{}`", columns.epoch)))?
            .as_u64()
            .and_then(|e| u32::try_from(e).ok())
            .ok_or_else(|| malformed("epoch must be a non-negative integer".into()))?;
        let real = |key: &str, required: bool| -> Result<Option<f64>> {
            match obj.get(key) {
                None | Some(serde_json::Value::Null) if !required => Ok(None),
                None | Some(serde_json::Value::Null) => Err(malformed(format!("missing key `{key}`"))),
                Some(v) => {
                    let x = v
                        .as_f64()
                        .ok_or_else(|| malformed(format!("`{key}` is not a number")))?;
                    if !x.is_finite() {
                        return Err(malformed(format!("`{key}` is not finite")));
                    }
                    Ok(Some(x))
                }
            }
        };
        records.push(EpochRecord {
            epoch,
            metric: real(&columns.metric, true)?.unwrap_or_default(),
            val_loss: real(&columns.val_loss, false)?,
            train_loss: real(&columns.train_loss, false)?,
        });
    }
    Ok(TrainingTrace::new(records)?.with_metric_name(metric_name_for(columns)))
}

fn metric_name_for(columns: &Columns) -> String {
    if columns.metric == "metric" {
        DEFAULT_METRIC_NAME.to_string()
    } else {
        columns.metric.clone()
    }
}

fn parse_epoch(cell: &str, line: usize) -> Result<u32> {
    cell.parse::<u32>().map_err(|_| Error::MalformedRow {
        line,
        detail: format!("epoch `{cell}` is not a non-negative integer"),
    })
}

fn parse_real(cell: &str, name: &str, line: usize) -> Result<f64> {
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) => Err(Error::MalformedRow {
            line,
            detail: format!("`{name}` value `{cell}` is not finite"),
        }),
        Err(_) => Err(Error::MalformedRow {
            line,
            detail: format!("`{name}` value `{cell}` is not a number"),
        }),
    }
}

/// Serializes a trace as CSV. Optional columns appear only when at least
/// one record carries them. Floats use the shortest representation that
/// parses back to the same value.
pub fn to_csv(trace: &TrainingTrace) -> String {
    let has_val = trace.records.iter().any(|r| r.val_loss.is_some());
    let has_train = trace.records.iter().any(|r| r.train_loss.is_some());
    let mut out = String::from("epoch,metric");
    if has_val {
        out.push_str(",val_loss");
    }
    if has_train {
        out.push_str(",train_loss");
    }
    out.push('\n');
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in &trace.records {
        let _ = write!(out, "{},{}", r.epoch, r.metric);
        if has_val {
            let _ = write!(out, ",{}", opt(r.val_loss));
        }
        if has_train {
            let _ = write!(out, ",{}", opt(r.train_loss));
        }
        out.push('\n');
    }
    out
}

/// Parameters of a synthetic training curve.
///
/// The metric saturates towards `metric_ceiling` with time constant
/// `metric_rate`; the validation loss decays towards `loss_floor` and grows
/// linearly by `overfit_slope` per epoch after `overfit_onset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveParams {
    pub max_epochs: u32,
    pub metric_ceiling: f64,
    pub metric_rate: f64,
    pub loss_floor: f64,
    pub loss_rate: f64,
    pub overfit_onset: u32,
    pub overfit_slope: f64,
    pub noise_amplitude: f64,
    pub seed: u64,
}

impl Default for CurveParams {
    fn default() -> Self {
        Self {
            max_epochs: 200,
            metric_ceiling: 85.0,
            metric_rate: 8.0,
            loss_floor: 0.2,
            loss_rate: 10.0,
            overfit_onset: 60,
            overfit_slope: 0.002,
            noise_amplitude: 0.3,
            seed: 0,
        }
    }
}

impl CurveParams {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.max_epochs == 0 {
            problems.push("max_epochs must be at least 1".to_string());
        }
        if !(self.metric_ceiling > 0.0 && self.metric_ceiling <= 100.0) {
            problems.push(format!("metric_ceiling {} outside (0, 100]", self.metric_ceiling));
        }
        if !(self.metric_rate > 0.0 && self.metric_rate.is_finite()) {
            problems.push(format!("metric_rate {} must be positive", self.metric_rate));
        }
        if !(self.loss_floor >= 0.0 && self.loss_floor.is_finite()) {
            problems.push(format!("loss_floor {} must be non-negative", self.loss_floor));
        }
        if !(self.loss_rate > 0.0 && self.loss_rate.is_finite()) {
            problems.push(format!("loss_rate {} must be positive", self.loss_rate));
        }
        if self.overfit_onset > self.max_epochs {
            problems.push(format!(
                "overfit_onset {} exceeds max_epochs {}",
                self.overfit_onset, self.max_epochs
            ));
        }
        if !(self.overfit_slope >= 0.0 && self.overfit_slope.is_finite()) {
            problems.push(format!("overfit_slope {} must be non-negative", self.overfit_slope));
        }
        if !(self.noise_amplitude >= 0.0 && self.noise_amplitude < self.metric_ceiling) {
            problems.push(format!(
                "noise_amplitude {} must lie in [0, metric_ceiling)",
                self.noise_amplitude
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(problems.join("; ")))
        }
    }
}

/// Generates a deterministic synthetic trace with epochs `1..=max_epochs`.
///
/// Noise is uniform on `[-a, a)` with `a = noise_amplitude`, drawn from a
/// ChaCha8 stream seeded with `seed` (`SeedableRng::seed_from_u64`). Each
/// epoch draws two 64-bit words, metric noise first, and maps each word to
/// `[0, 1)` through its top 53 bits. The loss is clamped at zero.
pub fn generate_synthetic(params: &CurveParams) -> Result<TrainingTrace> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut noise = move || {
        let unit = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        params.noise_amplitude * (2.0 * unit - 1.0)
    };

    let records = (1..=params.max_epochs)
        .map(|epoch| {
            let e = f64::from(epoch);
            let metric_noise = noise();
            let loss_noise = noise();
            let metric = params.metric_ceiling * (1.0 - (-e / params.metric_rate).exp()) + metric_noise;
            let overfit = params.overfit_slope * f64::from(epoch.saturating_sub(params.overfit_onset));
            let loss = params.loss_floor + (-e / params.loss_rate).exp() + overfit + loss_noise;
            EpochRecord {
                epoch,
                metric: metric.clamp(0.0, 100.0),
                val_loss: Some(loss.max(0.0)),
                train_loss: None,
            }
        })
        .collect();
    Ok(TrainingTrace::new(records)?.with_run_id(format!("synthetic-{}", params.seed)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_two_records() {
        let t = parse_csv("epoch,metric,val_loss\n1,50.0,1.0\n2,60.0,0.8").unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.records()[0].epoch, 1);
        assert_eq!(t.records()[1].epoch, 2);
        assert_eq!(t.records()[1].val_loss, Some(0.8));
        assert_eq!(t.records()[1].train_loss, None);
    }

    #[test]
    fn csv_gap_is_rejected() {
        let err = parse_csv("epoch,metric\n1,50.0\n3,60.0").unwrap_err();
        assert!(matches!(err, Error::NonConsecutiveEpochs { previous: 1, found: 3 }));
    }

    #[test]
    fn csv_duplicate_epoch_is_rejected() {
        let err = parse_csv("epoch,metric\n1,50.0\n1,60.0").unwrap_err();
        assert!(matches!(err, Error::NonConsecutiveEpochs { .. }));
    }

    #[test]
    fn csv_non_numeric_cell() {
        let err = parse_csv("epoch,metric\n1,abc").unwrap_err();
        assert!(matches!(err, Error::MalformedRow { line: 2, .. }), "{err:?}");
    }

    #[test]
    fn csv_nan_and_inf_rejected() {
        for bad in ["NaN", "inf", "-inf", "1e400"] {
            let err = parse_csv(&format!("epoch,metric\n1,{bad}")).unwrap_err();
            assert!(matches!(err, Error::MalformedRow { .. }), "{bad}: {err:?}");
        }
    }

    #[test]
    fn csv_wrong_arity() {
        let err = parse_csv("epoch,metric\n1,50.0,7").unwrap_err();
        assert!(matches!(err, Error::MalformedRow { .. }), "{err:?}");
    }

    #[test]
    fn csv_missing_mandatory_column() {
        let err = parse_csv("epoch,val_loss\n1,0.5").unwrap_err();
        assert!(matches!(err, Error::MalformedHeader(_)));
    }

    #[test]
    fn csv_extra_columns_ignored() {
        let t = parse_csv("lr,epoch,metric\n0.1,1,50\n0.1,2,51").unwrap();
        assert_eq!(t.metrics(), vec![50.0, 51.0]);
    }

    #[test]
    fn csv_custom_columns() {
        let cols = Columns {
            metric: "imiou".into(),
            val_loss: "loss".into(),
            ..Columns::default()
        };
        let t = parse_csv_with("epoch,imiou,loss\n5,70,0.3\n6,71,0.2", &cols).unwrap();
        assert_eq!(t.first_epoch(), 5);
        assert_eq!(t.metric_name(), "imiou");
        assert_eq!(t.records()[1].val_loss, Some(0.2));
    }

    #[test]
    fn metric_out_of_percent_range() {
        let err = parse_csv("epoch,metric\n1,100.5").unwrap_err();
        assert!(matches!(err, Error::InvalidRecord { epoch: 1, .. }));
        let err = parse_csv("epoch,metric,val_loss\n1,50,-0.1").unwrap_err();
        assert!(matches!(err, Error::InvalidRecord { .. }));
    }

    #[test]
    fn jsonl_two_records() {
        let t = parse_jsonl("{\"epoch\":1,\"metric\":50.0}\n{\"epoch\":2,\"metric\":51.0}\n").unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.metrics(), vec![50.0, 51.0]);
    }

    #[test]
    fn jsonl_empty_input() {
        assert!(matches!(parse_jsonl("").unwrap_err(), Error::EmptyTrace));
        assert!(matches!(parse_jsonl("\n  \n").unwrap_err(), Error::EmptyTrace));
    }

    #[test]
    fn jsonl_non_finite() {
        let err = parse_jsonl("{\"epoch\":1,\"metric\":1e400}").unwrap_err();
        assert!(matches!(err, Error::MalformedRow { line: 1, .. }));
    }

    #[test]
    fn jsonl_unknown_keys_and_gap() {
        let t = parse_jsonl("{\"epoch\":3,\"metric\":5,\"lr\":0.1,\"val_loss\":0.4}").unwrap();
        assert_eq!(t.records()[0].val_loss, Some(0.4));
        let err = parse_jsonl("{\"epoch\":1,\"metric\":5}\n{\"epoch\":3,\"metric\":5}").unwrap_err();
        assert!(matches!(err, Error::NonConsecutiveEpochs { .. }));
    }

    #[test]
    fn trace_lookup_by_epoch() {
        let t = parse_csv("epoch,metric\n10,1\n11,2\n12,3").unwrap();
        assert_eq!(t.get(11).unwrap().metric, 2.0);
        assert!(t.get(9).is_none());
        assert!(t.get(13).is_none());
        assert_eq!(t.truncated(11).unwrap().len(), 2);
        assert!(t.truncated(9).is_none());
    }

    #[test]
    fn noiseless_saturation() {
        let params = CurveParams {
            max_epochs: 30,
            metric_ceiling: 80.0,
            metric_rate: 1e-9,
            overfit_onset: 20,
            noise_amplitude: 0.0,
            ..CurveParams::default()
        };
        let t = generate_synthetic(&params).unwrap();
        assert!(t.records().iter().all(|r| (r.metric - 80.0).abs() < 1e-12));
    }

    #[test]
    fn generation_is_deterministic() {
        let params = CurveParams {
            seed: 7,
            noise_amplitude: 0.8,
            ..CurveParams::default()
        };
        let a = generate_synthetic(&params).unwrap();
        let b = generate_synthetic(&params).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic(&CurveParams { seed: 8, ..params }).unwrap();
        assert_ne!(a.records(), c.records());
    }

    #[test]
    fn noisy_curve_oscillation_bound() {
        let params = CurveParams {
            max_epochs: 50,
            metric_ceiling: 85.0,
            metric_rate: 5.0,
            noise_amplitude: 0.5,
            overfit_onset: 40,
            seed: 42,
            ..CurveParams::default()
        };
        let t = generate_synthetic(&params).unwrap();
        assert_eq!(t.len(), 50);
        let late: Vec<f64> = t.records().iter().filter(|r| r.epoch >= 25).map(|r| r.metric).collect();
        let worst = late.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
        assert!(worst <= 1.0, "largest neighbour step {worst}");
        // upward trend: the second half sits above the first
        let m = t.metrics();
        let early_mean: f64 = m[..10].iter().sum::<f64>() / 10.0;
        let late_mean: f64 = m[40..].iter().sum::<f64>() / 10.0;
        assert!(late_mean > early_mean);
    }

    #[test]
    fn invalid_params() {
        let bad = [
            CurveParams { overfit_onset: 300, ..CurveParams::default() },
            CurveParams { noise_amplitude: 90.0, ..CurveParams::default() },
            CurveParams { metric_ceiling: 0.0, ..CurveParams::default() },
            CurveParams { metric_rate: -1.0, ..CurveParams::default() },
            CurveParams { max_epochs: 0, overfit_onset: 0, ..CurveParams::default() },
        ];
        for p in bad {
            assert!(matches!(generate_synthetic(&p), Err(Error::InvalidParams(_))), "{p:?}");
        }
    }
}
