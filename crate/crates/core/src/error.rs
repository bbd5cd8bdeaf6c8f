use std::fmt;
use std::path::PathBuf;
use thiserror::Error;

/// One broken rule found while validating a chain document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Label of the offending stage, or `None` for chain-level rules.
    pub stage: Option<String>,
    pub rule: String,
}

impl Violation {
    pub(crate) fn chain(rule: impl Into<String>) -> Self {
        Violation {
            stage: None,
            rule: rule.into(),
        }
    }

    pub(crate) fn stage(label: &str, rule: impl Into<String>) -> Self {
        Violation {
            stage: Some(label.to_string()),
            rule: rule.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.stage {
            Some(label) => write!(f, "stage '{label}': {}", self.rule),
            None => write!(f, "chain: {}", self.rule),
        }
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed chain document: {0}")]
    Document(#[from] serde_json::Error),

    #[error("invalid chain ({} violation(s)): {}", .0.len(), join_violations(.0))]
    InvalidChain(Vec<Violation>),

    #[error("cannot read {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("exactly one of oip3_dbm / iip3_dbm must be supplied, got {supplied}")]
    InterceptSpec { supplied: usize },

    #[error("frequency {freq_hz} Hz outside table range [{min_hz}, {max_hz}] Hz")]
    OutOfTableRange { freq_hz: f64, min_hz: f64, max_hz: f64 },

    #[error("frequency {freq_hz} Hz outside band [{low_hz}, {high_hz}] Hz")]
    OutOfBand { freq_hz: f64, low_hz: f64, high_hz: f64 },

    #[error("temperature {temp_degc} °C outside model validity range [{min_degc}, {max_degc}] °C")]
    TemperatureOutOfRange {
        temp_degc: f64,
        min_degc: f64,
        max_degc: f64,
    },

    #[error("cascade of an empty stage list")]
    EmptyChain,

    #[error("chain has no nonlinear stages")]
    NoNonlinearStages,

    #[error("touchstone line {line}: {message}")]
    Touchstone { line: usize, message: String },

    #[error("parameter table line {line}: {message}")]
    Table { line: usize, message: String },

    #[error("sample grid: {0}")]
    Sampling(String),

    #[error(
        "drive too large for small-signal model: fundamental compression {compression_db:.4} dB exceeds {limit_db} dB"
    )]
    Overdriven { compression_db: f64, limit_db: f64 },

    #[error("measured IM3 slope {slope:.4} dB/dB deviates from 3 by more than {tolerance}")]
    SlopeOutOfRegion { slope: f64, tolerance: f64 },

    #[error("interferer IM3 product at {freq_hz} Hz falls outside the {passband_hz} Hz passband")]
    InterfererOutOfBand { freq_hz: f64, passband_hz: f64 },

    #[error("calibration target {target_db} dB unreachable at {freq_hz} Hz (attenuator would need {required_db:.3} dB, range 0..{max_db})")]
    Unreachable {
        freq_hz: f64,
        target_db: f64,
        required_db: f64,
        max_db: f64,
    },

    #[error("at {point}: {source}")]
    AtPoint { point: String, source: Box<Error> },

    #[error("{0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
