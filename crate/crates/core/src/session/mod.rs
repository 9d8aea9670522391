//! Session orchestration: replay, calibration, synthetic streams and live
//! serving over the line-delimited protocol, plus the event log and metrics.

pub mod calibrate;
pub mod config;
pub mod live;
pub mod log;
pub mod metrics;
pub mod protocol;
pub mod runner;
pub mod synth;

use thiserror::Error;

use crate::calibration::CalibrationError;
use crate::engine::EngineError;
use crate::hints::HintError;
use crate::ipa::IpaError;
use crate::preprocess::PreprocessError;
use crate::signals::SignalError;
use crate::stress::StressError;

pub use calibrate::{calibrate_inputs, run_calibration, CalibrationOutcome};
pub use config::{ReplaySpeed, SessionConfig};
pub use live::{run_live, LiveOptions};
pub use log::{Entry, LogEntry, SessionLog};
pub use metrics::{compute_metrics, session_row, SessionMetrics};
pub use runner::{run_replay, run_replay_inputs, replay_indices, Profiles, SessionInputs, SessionRunner};
pub use synth::{generate_synthetic, write_synthetic, SyntheticSession, SyntheticSpec};

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("config: {0}")]
    Config(String),
    #[error("missing input: {0}")]
    MissingInput(String),
    #[error("log line {line}: {message}")]
    Log { line: usize, message: String },
    #[error("protocol: {0}")]
    Protocol(String),
    #[error("synthetic spec: {0}")]
    Spec(String),
    #[error("{file}: {source}")]
    Signal { file: String, source: SignalError },
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Ipa(#[from] IpaError),
    #[error(transparent)]
    Stress(#[from] StressError),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error(transparent)]
    Hint(#[from] HintError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl From<EngineError> for SessionError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Config(m) => SessionError::Config(m),
            EngineError::Protocol(m) => SessionError::Protocol(m),
        }
    }
}

impl SessionError {
    /// Stable identifier for machine-readable error output.
    pub fn kind(&self) -> &'static str {
        match self {
            SessionError::Config(_) => "config",
            SessionError::MissingInput(_) => "missing_input",
            SessionError::Log { .. } => "malformed_log",
            SessionError::Protocol(_) => "protocol",
            SessionError::Spec(_) => "spec",
            SessionError::Signal { .. } => "signal",
            SessionError::Preprocess(PreprocessError::InsufficientData { .. }) => "insufficient_data",
            SessionError::Preprocess(PreprocessError::DegenerateBaseline { .. }) => "degenerate_baseline",
            SessionError::Preprocess(_) => "preprocess",
            SessionError::Ipa(_) => "ipa",
            SessionError::Stress(_) => "stress",
            SessionError::Calibration(CalibrationError::InsufficientBaseline { .. }) => "insufficient_baseline",
            SessionError::Calibration(CalibrationError::DegenerateBaseline { .. }) => "degenerate_baseline",
            SessionError::Calibration(_) => "calibration",
            SessionError::Hint(_) => "hints",
            SessionError::Io(_) => "io",
        }
    }
}
