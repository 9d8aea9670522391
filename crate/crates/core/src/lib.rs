//! Real-time multimodal scaffolding engine.
//!
//! The crate turns raw sensor streams (pupil diameter, heart rate, gaze line)
//! into two physiological indices, calibrates per-participant resting
//! thresholds, and drives a prompt/hint state machine that delivers
//! context-sensitive debugging hints. The [`stats`] module carries the
//! analysis machinery used to evaluate sessions across conditions.
//!
//! Pipeline, in module order:
//!
//! * [`signals`]: sample types, CSV stream formats, deterministic merge
//! * [`preprocess`]: blink and artifact rejection, resampling, z-scoring
//! * [`ipa`]: wavelet-based pupillary activity index (cognitive load)
//! * [`stress`]: heart-rate slope index (stress)
//! * [`calibration`]: resting baselines and thresholds
//! * [`engine`]: the four-condition trigger state machine
//! * [`hints`]: bug database and gaze-aligned hint selection
//! * [`session`]: replay, calibration and live orchestration, logs, metrics
//! * [`stats`]: ANOVA, pairwise comparisons, Welch, Pearson, Levene

pub mod calibration;
pub mod engine;
pub mod hints;
pub mod index;
pub mod ipa;
pub mod preprocess;
pub mod session;
pub mod signals;
pub mod stats;
pub mod stress;

pub use calibration::{BaselineProfile, CalibrationConfig};
pub use engine::{ConditionMode, EngineConfig, Phase, TriggerEngine, TriggerEvent};
pub use hints::{BugRecord, HintDb, HintRecord};
pub use index::{IndexPoint, IndexSeries, SignalKind};
pub use preprocess::CleanSignal;
pub use session::{SessionConfig, SessionLog, SessionMetrics};
pub use signals::{BeatKind, BeatSample, ClientEvent, GazeSample, Payload, PupilSample, SensorEvent};
pub use stats::{AnovaResult, CorrResult, GroupSummary, PairwiseResult};

/// Milliseconds since the session epoch (first calibration sample).
pub type Millis = u64;
