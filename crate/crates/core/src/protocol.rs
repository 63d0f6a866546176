//! Line protocol spoken by `stopwindow serve`.
//!
//! Each request is one JSON object per line:
//!
//! ```text
//! {"epoch":12,"metric":82.4,"val_loss":0.31}
//! ```
//!
//! and each response is exactly one line, one of
//!
//! ```text
//! {"action":"continue"}
//! {"action":"stop","swindow":[3,8],"stop_epoch":3,"lag":1}
//! {"action":"exhausted","best_epoch":200}
//! {"action":"error","code":"malformed","detail":"..."}
//! ```
//!
//! `detect --format json` prints the same response object for its final
//! decision.

use serde::{Deserialize, Serialize};

use crate::detector::Decision;
use crate::error::Error;
use crate::trace::EpochRecord;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub epoch: u32,
    pub metric: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub val_loss: Option<f64>,
}

impl Request {
    pub fn into_record(self) -> EpochRecord {
        EpochRecord {
            epoch: self.epoch,
            metric: self.metric,
            val_loss: self.val_loss,
            train_loss: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "lowercase")]
pub enum Response {
    Continue,
    Stop {
        swindow: [u32; 2],
        stop_epoch: u32,
        lag: u32,
    },
    Exhausted {
        best_epoch: u32,
    },
    Error {
        code: String,
        detail: String,
    },
}

impl Response {
    pub fn error(code: &str, detail: impl Into<String>) -> Self {
        Self::Error {
            code: code.to_string(),
            detail: detail.into(),
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("plain data serializes")
    }
}

impl From<&Decision> for Response {
    fn from(decision: &Decision) -> Self {
        match decision {
            Decision::Continue => Self::Continue,
            Decision::Stop {
                window,
                stop_epoch,
                lag,
            } => Self::Stop {
                swindow: [window.start(), window.end()],
                stop_epoch: *stop_epoch,
                lag: *lag,
            },
            Decision::Exhausted { best_epoch } => Self::Exhausted {
                best_epoch: *best_epoch,
            },
        }
    }
}

/// Stable machine-readable code for an error response.
pub fn error_code(err: &Error) -> &'static str {
    match err {
        Error::NonConsecutiveEpoch { .. } => "out_of_order",
        Error::FedAfterStop => "finished",
        Error::InvalidRecord { .. } => "invalid_record",
        _ => "malformed",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_shapes() {
        assert_eq!(Response::Continue.to_line(), r#"{"action":"continue"}"#);
        let stop = Response::Stop { swindow: [3, 8], stop_epoch: 3, lag: 1 };
        assert_eq!(stop.to_line(), r#"{"action":"stop","swindow":[3,8],"stop_epoch":3,"lag":1}"#);
        assert_eq!(
            Response::Exhausted { best_epoch: 50 }.to_line(),
            r#"{"action":"exhausted","best_epoch":50}"#
        );
        let err = Response::error("malformed", "bad");
        assert_eq!(err.to_line(), r#"{"action":"error","code":"malformed","detail":"bad"}"#);
        let back: Response = serde_json::from_str(&stop.to_line()).unwrap();
        assert_eq!(back, stop);
    }

    #[test]
    fn request_parsing() {
        let r: Request = serde_json::from_str(r#"{"epoch":12,"metric":82.4,"val_loss":0.31}"#).unwrap();
        assert_eq!(r, Request { epoch: 12, metric: 82.4, val_loss: Some(0.31) });
        let r: Request = serde_json::from_str(r#"{"epoch":1,"metric":5,"extra":true}"#).unwrap();
        assert_eq!(r.val_loss, None);
        assert!(serde_json::from_str::<Request>(r#"{"epoch":-1,"metric":5}"#).is_err());
    }
}
