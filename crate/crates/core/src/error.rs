use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("malformed row at line {line}: {detail}")]
    MalformedRow { line: usize, detail: String },

    #[error("non-consecutive epochs: {previous} followed by {found}")]
    NonConsecutiveEpochs { previous: u32, found: u32 },

    #[error("trace is empty")]
    EmptyTrace,

    #[error("invalid record at epoch {epoch}: {detail}")]
    InvalidRecord { epoch: u32, detail: String },

    #[error("invalid curve parameters: {0}")]
    InvalidParams(String),

    #[error("sequence too short: need at least {needed} values, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("invalid detector configuration: {0}")]
    InvalidConfig(String),

    #[error("minimum window size {0} outside [2, max_epochs - 1]")]
    InvalidN(u32),

    #[error("maximum oscillation {0} outside (0, 2]")]
    InvalidD(f64),

    #[error("invalid window: {0}")]
    InvalidWindow(String),

    #[error("detector already finished; no further records accepted")]
    FedAfterStop,

    #[error("non-consecutive epoch: expected {expected}, got {found}")]
    NonConsecutiveEpoch { expected: u32, found: u32 },

    #[error("validation loss missing at epoch {epoch}")]
    MissingLoss { epoch: u32 },

    #[error("window [{start}, {end}] lies outside the trace")]
    WindowOutOfRange { start: u32, end: u32 },

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("global maximum must be positive, got {0}")]
    NonPositiveMax(f64),

    #[error("unknown strategy `{0}`")]
    UnknownStrategy(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
