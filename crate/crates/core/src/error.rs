use thiserror::Error;

pub type Result<T> = std::result::Result<T, SddeError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SddeError {
    #[error("invalid configuration `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("index {index} out of range 0..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("time {t} outside the admissible domain [{lo}, {hi}]")]
    TimeOutOfDomain { t: f64, lo: f64, hi: f64 },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("causality violation: query at t={query} but only t<={computed} has been computed")]
    Causality { query: f64, computed: f64 },

    #[error("delay {delay} violates its constraint at t={t}: value {value}, bound {bound}")]
    DelayViolation {
        delay: usize,
        t: f64,
        value: f64,
        bound: f64,
    },

    #[error("non-finite state at step {step} (t={t}): {state:?}")]
    NonFinite {
        step: usize,
        t: f64,
        state: Vec<f64>,
    },

    #[error("non-positive value {value} at position {index}")]
    NonPositive { index: usize, value: f64 },

    #[error("{0}")]
    Invalid(String),

    #[error("stream {stream}, level {level}: {source}")]
    Stream {
        stream: u64,
        level: u32,
        #[source]
        source: Box<SddeError>,
    },

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

impl SddeError {
    pub(crate) fn config(field: &str, message: impl Into<String>) -> Self {
        SddeError::Config {
            field: field.to_string(),
            message: message.into(),
        }
    }
}
