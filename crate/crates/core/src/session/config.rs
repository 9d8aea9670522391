use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::calibration::CalibrationConfig;
use crate::engine::{ConditionMode, EngineConfig};
use crate::ipa::IpaConfig;
use crate::preprocess::PreprocessConfig;
use crate::stress::StressConfig;

use super::SessionError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ReplaySpeed {
    Realtime,
    #[default]
    Max,
}

impl std::str::FromStr for ReplaySpeed {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "realtime" => Ok(ReplaySpeed::Realtime),
            "max" => Ok(ReplaySpeed::Max),
            other => Err(format!("unknown speed `{other}`, expected realtime|max")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub mode: ConditionMode,
    /// Pre-test score, 0 to 10, echoed into the summary.
    pub expertise: Option<f64>,
    pub preprocess: PreprocessConfig,
    pub ipa: IpaConfig,
    pub stress: StressConfig,
    pub calibration: CalibrationConfig,
    pub cooldown_s: f64,
    pub timeout_s: f64,
    /// `None` keeps a hint open until the client dismisses it.
    pub hint_display_s: Option<f64>,
    /// Directory with the task-phase streams.
    pub streams: PathBuf,
    /// Directory with the resting-phase streams.
    pub rosl: PathBuf,
    pub hints: PathBuf,
    pub baseline_dir: PathBuf,
    pub log: Option<PathBuf>,
    pub replay_speed: ReplaySpeed,
    /// Wall-clock speed-up applied in realtime pacing.
    pub time_scale: f64,
    /// Defaults to the first task-phase sample.
    pub task_start_ms: Option<u64>,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            mode: ConditionMode::Control,
            expertise: None,
            preprocess: PreprocessConfig::default(),
            ipa: IpaConfig::default(),
            stress: StressConfig::default(),
            calibration: CalibrationConfig::default(),
            cooldown_s: 30.0,
            timeout_s: 30.0,
            hint_display_s: Some(30.0),
            streams: PathBuf::from("task"),
            rosl: PathBuf::from("rosl"),
            hints: PathBuf::from("hints.toml"),
            baseline_dir: PathBuf::from("."),
            log: None,
            replay_speed: ReplaySpeed::Max,
            time_scale: 1.0,
            task_start_ms: None,
        }
    }
}

fn ms(seconds: f64) -> u64 {
    (seconds * 1000.0).round() as u64
}

impl SessionConfig {
    pub fn from_toml(text: &str) -> Result<Self, SessionError> {
        let cfg: SessionConfig = toml::from_str(text).map_err(|e| SessionError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), SessionError> {
        let positive = [
            ("ipa.window_s", self.ipa.window_s),
            ("ipa.hop_s", self.ipa.hop_s),
            ("stress.window_s", self.stress.window_s),
            ("stress.hop_s", self.stress.hop_s),
            ("preprocess.fs_hz", self.preprocess.fs_hz),
            ("time_scale", self.time_scale),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SessionError::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        // zero pacing is allowed for the engine delays
        let non_negative = [
            ("cooldown_s", self.cooldown_s),
            ("timeout_s", self.timeout_s),
            ("hint_display_s", self.hint_display_s.unwrap_or(0.0)),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(SessionError::Config(format!("{name} must be >= 0, got {v}")));
            }
        }
        if let Some(e) = self.expertise {
            if !(0.0..=10.0).contains(&e) {
                return Err(SessionError::Config(format!("expertise must be in [0, 10], got {e}")));
            }
        }
        if self.ipa.hop_s > self.ipa.window_s {
            return Err(SessionError::Config("ipa.hop_s must not exceed ipa.window_s".into()));
        }
        Ok(())
    }

    /// Engine settings without thresholds; those come from the profiles.
    pub fn engine_config(&self) -> EngineConfig {
        EngineConfig {
            mode: self.mode,
            cooldown_ms: ms(self.cooldown_s),
            prompt_timeout_ms: ms(self.timeout_s),
            hint_display_ms: self.hint_display_s.map(ms),
            theta_cognitive: None,
            theta_stress: None,
        }
    }
}
