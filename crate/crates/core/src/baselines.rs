//! Loss-based early-stopping baselines.
//!
//! Two families cover the four conventional presets:
//!
//! | preset    | rule                                   |
//! |-----------|----------------------------------------|
//! | `earlys1` | `PrevIncrease { factor: 1.0 }`         |
//! | `earlys2` | `PrevIncrease { factor: 1.05 }`        |
//! | `earlys3` | `Patience { patience: 2, min_delta: 0 }` |
//! | `earlys4` | `Patience { patience: 3, min_delta: 0 }` |

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::TrainingTrace;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StrategySpec {
    /// Stop at the first epoch whose loss exceeds `factor` times the
    /// previous epoch's loss.
    PrevIncrease { factor: f64 },
    /// Stop once `patience` consecutive epochs fail to beat the best loss
    /// so far by more than `min_delta`.
    Patience { patience: u32, min_delta: f64 },
}

impl StrategySpec {
    pub const EARLY_S1: Self = Self::PrevIncrease { factor: 1.0 };
    pub const EARLY_S2: Self = Self::PrevIncrease { factor: 1.05 };
    pub const EARLY_S3: Self = Self::Patience { patience: 2, min_delta: 0.0 };
    pub const EARLY_S4: Self = Self::Patience { patience: 3, min_delta: 0.0 };

    pub fn presets() -> [Self; 4] {
        [Self::EARLY_S1, Self::EARLY_S2, Self::EARLY_S3, Self::EARLY_S4]
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::PrevIncrease { factor } if !(factor >= 1.0 && factor.is_finite()) => Err(
                Error::OutOfRange(format!("previncrease factor {factor} must be >= 1")),
            ),
            Self::Patience { patience: 0, .. } => {
                Err(Error::OutOfRange("patience must be at least 1".into()))
            }
            Self::Patience { min_delta, .. } if !(min_delta >= 0.0 && min_delta.is_finite()) => Err(
                Error::OutOfRange(format!("min_delta {min_delta} must be non-negative")),
            ),
            _ => Ok(()),
        }
    }

    /// Preset name when the spec matches one, otherwise the parameterised
    /// form accepted by [`FromStr`].
    pub fn label(&self) -> String {
        if let Some(i) = Self::presets().iter().position(|p| p == self) {
            return format!("earlys{}", i + 1);
        }
        self.to_string()
    }
}

impl fmt::Display for StrategySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::PrevIncrease { factor } => write!(f, "previncrease:{factor}"),
            Self::Patience { patience, min_delta } if *min_delta == 0.0 => {
                write!(f, "patience:{patience}")
            }
            Self::Patience { patience, min_delta } => write!(f, "patience:{patience}:{min_delta}"),
        }
    }
}

impl FromStr for StrategySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let unknown = || Error::UnknownStrategy(s.to_string());
        let lower = s.trim().to_ascii_lowercase();
        let spec = match lower.as_str() {
            "earlys1" => Self::EARLY_S1,
            "earlys2" => Self::EARLY_S2,
            "earlys3" => Self::EARLY_S3,
            "earlys4" => Self::EARLY_S4,
            _ => {
                let mut parts = lower.split(':');
                match (parts.next(), parts.next(), parts.next(), parts.next()) {
                    (Some("previncrease"), Some(f), None, None) => Self::PrevIncrease {
                        factor: f.parse().map_err(|_| unknown())?,
                    },
                    (Some("patience"), Some(p), delta, None) => Self::Patience {
                        patience: p.parse().map_err(|_| unknown())?,
                        min_delta: delta.map_or(Ok(0.0), str::parse).map_err(|_| unknown())?,
                    },
                    _ => return Err(unknown()),
                }
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Parses a comma-separated strategy list; empty entries are skipped.
pub fn parse_strategy_list(list: &str) -> Result<Vec<StrategySpec>> {
    list.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyOutcome {
    pub strategy: StrategySpec,
    pub stop_epoch: u32,
    pub metric_at_stop: f64,
    /// False when the trace ended before the rule fired; `stop_epoch` is
    /// then the last epoch.
    pub stopped: bool,
}

/// Runs one strategy over the validation-loss column of `trace` in a single
/// forward pass.
pub fn run_strategy(trace: &TrainingTrace, spec: &StrategySpec) -> Result<StrategyOutcome> {
    spec.validate()?;
    let losses = trace
        .records()
        .iter()
        .map(|r| r.val_loss.ok_or(Error::MissingLoss { epoch: r.epoch }))
        .collect::<Result<Vec<f64>>>()?;

    let trigger = match *spec {
        StrategySpec::PrevIncrease { factor } => {
            (1..losses.len()).find(|&i| losses[i] > factor * losses[i - 1])
        }
        StrategySpec::Patience { patience, min_delta } => {
            let mut best = losses[0];
            let mut stale = 0u32;
            let mut hit = None;
            for (i, &loss) in losses.iter().enumerate().skip(1) {
                if loss < best - min_delta {
                    best = loss;
                    stale = 0;
                } else {
                    stale += 1;
                    if stale >= patience {
                        hit = Some(i);
                        break;
                    }
                }
            }
            hit
        }
    };

    let index = trigger.unwrap_or(losses.len() - 1);
    let record = &trace.records()[index];
    Ok(StrategyOutcome {
        strategy: *spec,
        stop_epoch: record.epoch,
        metric_at_stop: record.metric,
        stopped: trigger.is_some(),
    })
}
