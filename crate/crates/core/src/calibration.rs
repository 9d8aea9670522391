//! Resting-state baselines and trigger thresholds.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::index::{IndexSeries, SignalKind};

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("insufficient baseline: {duration_s:.1} s covered, need {floor_s} s")]
    InsufficientBaseline { duration_s: f64, floor_s: f64 },
    #[error("degenerate baseline: sigma = {sigma:e} over {n_windows} windows")]
    DegenerateBaseline { sigma: f64, n_windows: usize },
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("profile io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationConfig {
    pub k: f64,
    pub floor_s: f64,
    pub recommended_s: f64,
    pub min_coverage: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            k: 2.0,
            floor_s: 60.0,
            recommended_s: 120.0,
            min_coverage: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineProfile {
    pub signal: SignalKind,
    pub mu: f64,
    pub sigma: f64,
    pub theta: f64,
    pub k: f64,
    pub duration_s: f64,
    pub n_windows: usize,
    /// Resting pupil diameter statistics, mm, used for z-scoring.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_sd: Option<f64>,
}

impl BaselineProfile {
    pub fn file_name(signal: SignalKind) -> String {
        format!("baseline_{signal}.toml")
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("profile serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self, CalibrationError> {
        let p: BaselineProfile = toml::from_str(text).map_err(|e| CalibrationError::InvalidProfile(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn save(&self, path: &Path) -> Result<(), CalibrationError> {
        std::fs::write(path, self.to_toml())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CalibrationError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| match e {
            CalibrationError::InvalidProfile(m) => CalibrationError::InvalidProfile(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    fn validate(&self) -> Result<(), CalibrationError> {
        let bad = |m: String| Err(CalibrationError::InvalidProfile(m));
        if !(self.sigma >= 0.0 && self.sigma.is_finite() && self.mu.is_finite()) {
            return bad(format!("mu {} / sigma {} not usable", self.mu, self.sigma));
        }
        if self.n_windows < 1 {
            return bad("n_windows must be >= 1".into());
        }
        if self.theta != self.mu + self.k * self.sigma {
            return bad(format!("theta {} != mu + k*sigma = {}", self.theta, self.mu + self.k * self.sigma));
        }
        Ok(())
    }
}

pub fn compute_baseline(series: &IndexSeries, cfg: &CalibrationConfig) -> Result<BaselineProfile, CalibrationError> {
    let duration_s = series.covered_duration_s();
    if series.is_empty() || duration_s < cfg.floor_s {
        return Err(CalibrationError::InsufficientBaseline {
            duration_s,
            floor_s: cfg.floor_s,
        });
    }
    let n = series.len();
    let mu = series.values().sum::<f64>() / n as f64;
    let sigma = if n > 1 {
        (series.values().map(|v| (v - mu).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    if !(sigma >= 1e-9) {
        return Err(CalibrationError::DegenerateBaseline { sigma, n_windows: n });
    }
    Ok(BaselineProfile {
        signal: series.signal,
        mu,
        sigma,
        theta: mu + cfg.k * sigma,
        k: cfg.k,
        duration_s,
        n_windows: n,
        raw_mean: None,
        raw_sd: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoslReport {
    pub signal: SignalKind,
    pub duration_s: f64,
    pub coverage: f64,
    pub pass: bool,
    /// Met the recommended duration, not just the floor.
    pub recommended: bool,
    pub reasons: Vec<String>,
}

pub fn validate_rosl(series: &IndexSeries, cfg: &CalibrationConfig) -> RoslReport {
    let duration_s = series.covered_duration_s();
    let coverage = series.mean_coverage();
    let mut reasons = Vec::new();
    if duration_s < cfg.floor_s {
        reasons.push(format!("below {} s floor", cfg.floor_s));
    }
    if coverage < cfg.min_coverage {
        reasons.push("coverage".to_string());
    }
    RoslReport {
        signal: series.signal,
        duration_s,
        coverage,
        pass: reasons.is_empty(),
        recommended: duration_s >= cfg.recommended_s,
        reasons,
    }
}
