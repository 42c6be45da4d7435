use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("empty signal")]
    EmptySignal,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("degenerate filterbank: mel band {band} has no support on the FFT grid")]
    DegenerateFilterbank { band: usize },
    #[error("undefined SNR: {0} has zero energy")]
    UndefinedSnr(&'static str),
    #[error("infeasible RT60: absorption {alpha:.3} > 1 for rt60 {rt60} s")]
    InfeasibleRt60 { rt60: f64, alpha: f64 },
    #[error("signal too short: {0}")]
    TooShort(String),
    #[error("missing target: {0}")]
    MissingTarget(&'static str),
    #[error("graph error: {0}")]
    Graph(String),
    #[error("training diverged at step {0}")]
    Diverged(usize),
    #[error("wav error: {0}")]
    Wav(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
