use crate::calibration::{compute_baseline, validate_rosl, BaselineProfile, RoslReport};
use crate::index::SignalKind;
use crate::ipa::ipa_series;
use crate::preprocess::{clean_pupil, normalize_to_baseline, PreprocessError};
use crate::stress::{heart_rate, stress_index_series};

use super::config::SessionConfig;
use super::runner::{Profiles, SessionInputs};
use super::SessionError;

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationOutcome {
    pub profiles: Profiles,
    pub reports: Vec<RoslReport>,
}

/// Baselines for every resting stream present. Streams required by the
/// configured mode must be present.
pub fn calibrate_inputs(cfg: &SessionConfig, rosl: &SessionInputs) -> Result<CalibrationOutcome, SessionError> {
    cfg.validate()?;
    for signal in SignalKind::ALL {
        let missing = match signal {
            SignalKind::Cognitive => rosl.pupil.is_empty(),
            SignalKind::Stress => rosl.beats.is_empty(),
        };
        if cfg.mode.admits(signal) && missing {
            return Err(SessionError::MissingInput(format!("resting {signal} stream")));
        }
    }
    let mut profiles = Profiles::default();
    let mut reports = Vec::new();
    if !rosl.pupil.is_empty() {
        let clean = clean_pupil(&rosl.pupil, &cfg.preprocess)?;
        let (mean, sd) = clean.mean_sd().ok_or(PreprocessError::InsufficientData { usable: 0 })?;
        let z = normalize_to_baseline(&clean, mean, sd)?;
        let series = ipa_series(&z, &cfg.ipa)?;
        reports.push(validate_rosl(&series, &cfg.calibration));
        let mut p = compute_baseline(&series, &cfg.calibration)?;
        p.raw_mean = Some(mean);
        p.raw_sd = Some(sd);
        profiles.cognitive = Some(p);
    }
    if !rosl.beats.is_empty() {
        let (hr, _) = heart_rate(&rosl.beats);
        let series = stress_index_series(&hr, &cfg.stress)?;
        reports.push(validate_rosl(&series, &cfg.calibration));
        profiles.stress = Some(compute_baseline(&series, &cfg.calibration)?);
    }
    Ok(CalibrationOutcome { profiles, reports })
}

/// Reads the resting streams named by `cfg` and writes one
/// `baseline_<signal>.toml` per calibrated signal into the baseline directory.
pub fn run_calibration(cfg: &SessionConfig) -> Result<CalibrationOutcome, SessionError> {
    let rosl = SessionInputs::load_dir(&cfg.rosl)?;
    let outcome = calibrate_inputs(cfg, &rosl)?;
    std::fs::create_dir_all(&cfg.baseline_dir)?;
    for p in [&outcome.profiles.cognitive, &outcome.profiles.stress].into_iter().flatten() {
        p.save(&cfg.baseline_dir.join(BaselineProfile::file_name(p.signal)))?;
    }
    Ok(outcome)
}
