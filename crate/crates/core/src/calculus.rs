//! Unit-spacing forward differences, local extremum detection and the
//! stop-window qualification test.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::TrainingTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExtremumKind {
    Maximum,
    Minimum,
}

/// A local extremum at position `index` of the analysed sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    pub index: usize,
    pub kind: ExtremumKind,
    pub value: f64,
}

/// How local extrema are recognised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtremumMode {
    /// `|f'(e)| <= epsilon` with the sign of `f''(e)` deciding the kind.
    /// Looks two samples ahead.
    Strict,
    /// A change of sign between the last non-zero difference before `e` and
    /// the first non-zero difference from `e` onwards. Plateaus report their
    /// first index.
    #[default]
    SignChange,
}

impl ExtremumMode {
    /// Samples past `e` needed before an extremum at `e` can be confirmed,
    /// ignoring plateaus.
    pub fn lookahead(self) -> usize {
        match self {
            ExtremumMode::Strict => 2,
            ExtremumMode::SignChange => 1,
        }
    }
}

/// How the size of a window is counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SizeSemantics {
    /// `end - start`
    #[default]
    Exclusive,
    /// `end - start + 1`, the number of epochs covered.
    Inclusive,
}

pub fn forward_diff(values: &[f64]) -> Result<Vec<f64>> {
    if values.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            got: values.len(),
        });
    }
    Ok(values.windows(2).map(|w| w[1] - w[0]).collect())
}

/// Second forward difference. Evaluated as the difference of first
/// differences so the result is bit-identical to applying [`forward_diff`]
/// twice.
pub fn second_diff(values: &[f64]) -> Result<Vec<f64>> {
    if values.len() < 3 {
        return Err(Error::TooShort {
            needed: 3,
            got: values.len(),
        });
    }
    Ok(values
        .windows(3)
        .map(|w| (w[2] - w[1]) - (w[1] - w[0]))
        .collect())
}

/// Local extrema of `values`, sorted by index.
///
/// `epsilon` only affects [`ExtremumMode::Strict`].
pub fn find_extrema(values: &[f64], mode: ExtremumMode, epsilon: f64) -> Result<Vec<Extremum>> {
    if values.len() < 3 {
        return Err(Error::TooShort {
            needed: 3,
            got: values.len(),
        });
    }
    Ok(match mode {
        ExtremumMode::Strict => strict_extrema(values, epsilon),
        ExtremumMode::SignChange => sign_change_extrema(values),
    })
}

fn strict_extrema(values: &[f64], epsilon: f64) -> Vec<Extremum> {
    let first = forward_diff(values).expect("length checked");
    let second = second_diff(values).expect("length checked");
    second
        .iter()
        .enumerate()
        .filter_map(|(e, &curvature)| {
            if first[e].abs() > epsilon {
                return None;
            }
            let kind = if curvature > 0.0 {
                ExtremumKind::Minimum
            } else if curvature < 0.0 {
                ExtremumKind::Maximum
            } else {
                return None;
            };
            Some(Extremum {
                index: e,
                kind,
                value: values[e],
            })
        })
        .collect()
}

fn sign_change_extrema(values: &[f64]) -> Vec<Extremum> {
    let diffs = forward_diff(values).expect("length checked");
    let mut out = Vec::new();
    // e is only a candidate when it opens a run, i.e. diffs[e - 1] != 0.
    for e in 1..values.len() - 1 {
        let before = diffs[e - 1];
        if before == 0.0 {
            continue;
        }
        let Some(&after) = diffs[e..].iter().find(|d| **d != 0.0) else {
            break;
        };
        let kind = match (before > 0.0, after > 0.0) {
            (true, false) => ExtremumKind::Maximum,
            (false, true) => ExtremumKind::Minimum,
            _ => continue,
        };
        out.push(Extremum {
            index: e,
            kind,
            value: values[e],
        });
    }
    out
}

/// Metric values between a local maximum (`start`) and a later local
/// minimum (`end`), both inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    start: u32,
    end: u32,
    values: Vec<f64>,
}

impl Window {
    pub fn new(start: u32, end: u32, values: Vec<f64>) -> Result<Self> {
        if start >= end {
            return Err(Error::InvalidWindow(format!("start {start} must precede end {end}")));
        }
        let expected = (end - start) as usize + 1;
        if values.len() != expected {
            return Err(Error::InvalidWindow(format!(
                "[{start}, {end}] needs {expected} values, got {}",
                values.len()
            )));
        }
        Ok(Self { start, end, values })
    }

    /// Window over `[start, end]` with values taken from `trace`.
    pub fn from_trace(trace: &TrainingTrace, start: u32, end: u32) -> Result<Self> {
        let out_of_range = || Error::WindowOutOfRange { start, end };
        if start >= end {
            return Err(Error::InvalidWindow(format!("start {start} must precede end {end}")));
        }
        let first = trace.get(start).ok_or_else(out_of_range)?;
        trace.get(end).ok_or_else(out_of_range)?;
        let offset = (first.epoch - trace.first_epoch()) as usize;
        let values = trace.records()[offset..=offset + (end - start) as usize]
            .iter()
            .map(|r| r.metric)
            .collect();
        Self::new(start, end, values)
    }

    pub fn start(&self) -> u32 {
        self.start
    }

    pub fn end(&self) -> u32 {
        self.end
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn size(&self, semantics: SizeSemantics) -> u32 {
        match semantics {
            SizeSemantics::Exclusive => self.end - self.start,
            SizeSemantics::Inclusive => self.end - self.start + 1,
        }
    }

    /// Earliest epoch holding the largest value in the window.
    pub fn argmax_epoch(&self) -> u32 {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        self.start + best as u32
    }
}

/// Consecutive differences inside the window, earlier minus later.
pub fn window_range(window: &Window) -> Vec<f64> {
    window.values.windows(2).map(|w| w[0] - w[1]).collect()
}

/// True when the window spans at least `min_size` epochs and no consecutive
/// step reaches `max_oscillation` in magnitude.
pub fn qualify_window(
    window: &Window,
    min_size: u32,
    max_oscillation: f64,
    semantics: SizeSemantics,
) -> Result<bool> {
    if min_size < 2 {
        return Err(Error::InvalidN(min_size));
    }
    if !(max_oscillation > 0.0 && max_oscillation <= 2.0) {
        return Err(Error::InvalidD(max_oscillation));
    }
    Ok(window.size(semantics) >= min_size
        && window_range(window).iter().all(|k| k.abs() < max_oscillation))
}
