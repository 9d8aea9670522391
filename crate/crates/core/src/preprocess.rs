//! Pupil signal cleaning: blink rejection, artifact clamping, uniform
//! resampling with bounded gap interpolation, and z-scoring against a
//! resting baseline.
//!
//! The rejection passes only ever mark samples; diameters are never
//! rewritten. Marks are derived from the recorded fields alone, so running a
//! pass over its own output changes nothing.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signals::{Artifact, PupilSample};
use crate::Millis;

#[derive(Debug, Error, PartialEq)]
pub enum PreprocessError {
    #[error("insufficient data: {usable} usable samples, need at least 2")]
    InsufficientData { usable: usize },
    #[error("degenerate baseline: sd = {sd}")]
    DegenerateBaseline { sd: f64 },
    #[error("invalid parameter: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    pub blink_pad_ms: Millis,
    /// Diameters below this are treated as blinks even when flagged valid.
    pub blink_floor_mm: f64,
    pub clamp_lo_mm: f64,
    pub clamp_hi_mm: f64,
    pub slew_mm: f64,
    pub slew_window_ms: Millis,
    pub fs_hz: f64,
    pub max_gap_ms: Millis,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            blink_pad_ms: 100,
            blink_floor_mm: 1.0,
            clamp_lo_mm: 1.5,
            clamp_hi_mm: 9.0,
            slew_mm: 0.8,
            slew_window_ms: 20,
            fs_hz: 60.0,
            max_gap_ms: 500,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SampleMask {
    Measured,
    Interpolated,
    Missing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Units {
    Millimeters,
    ZScore,
}

/// Uniformly sampled pupil signal. Missing grid points hold `NaN`.
#[derive(Debug, Clone, PartialEq)]
pub struct CleanSignal {
    pub fs: f64,
    pub t0: Millis,
    pub values: Vec<f64>,
    pub mask: Vec<SampleMask>,
    pub units: Units,
}

impl CleanSignal {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Timestamp of grid point `i`, fractional milliseconds.
    pub fn time_ms(&self, i: usize) -> f64 {
        self.t0 as f64 + i as f64 * 1000.0 / self.fs
    }

    pub fn is_usable(&self, i: usize) -> bool {
        self.mask[i] != SampleMask::Missing
    }

    /// Mean and sample SD over non-missing values.
    pub fn mean_sd(&self) -> Option<(f64, f64)> {
        let usable: Vec<f64> = (0..self.len()).filter(|&i| self.is_usable(i)).map(|i| self.values[i]).collect();
        if usable.len() < 2 {
            return None;
        }
        let n = usable.len() as f64;
        let mean = usable.iter().sum::<f64>() / n;
        let var = usable.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Some((mean, var.sqrt()))
    }
}

/// Marks blinks (tracker-invalid samples or diameters below the blink floor)
/// and every sample within `pad_ms` of one.
pub fn remove_blinks(samples: &[PupilSample], pad_ms: Millis, floor_mm: f64) -> Vec<PupilSample> {
    let is_blink = |s: &PupilSample| s.diameter().is_none_or(|d| d < floor_mm);
    let n = samples.len();
    // nearest blink timestamp at or before / at or after each index
    let mut prev: Vec<Option<Millis>> = vec![None; n];
    let mut last = None;
    for (i, s) in samples.iter().enumerate() {
        if is_blink(s) {
            last = Some(s.t);
        }
        prev[i] = last;
    }
    let mut next: Option<Millis> = None;
    let mut out = samples.to_vec();
    for i in (0..n).rev() {
        let s = &samples[i];
        if is_blink(s) {
            next = Some(s.t);
        }
        let near_prev = prev[i].is_some_and(|b| s.t.abs_diff(b) <= pad_ms);
        let near_next = next.is_some_and(|b| s.t.abs_diff(b) <= pad_ms);
        if out[i].artifact.is_none() && s.diameter().is_some() {
            if is_blink(s) {
                out[i].artifact = Some(Artifact::Blink);
            } else if near_prev || near_next {
                out[i].artifact = Some(Artifact::BlinkPad);
            }
        }
    }
    out
}

/// Marks diameters outside `[lo_mm, hi_mm]`, and any sample whose diameter
/// jumps more than `slew_mm` from its predecessor within `slew_window_ms`.
pub fn clamp_artifacts(
    samples: &[PupilSample],
    lo_mm: f64,
    hi_mm: f64,
    slew_mm: f64,
    slew_window_ms: Millis,
) -> Result<Vec<PupilSample>, PreprocessError> {
    if !(lo_mm > 0.0 && lo_mm < hi_mm) {
        return Err(PreprocessError::Config(format!("need 0 < lo < hi, got [{lo_mm}, {hi_mm}]")));
    }
    let mut out = samples.to_vec();
    for i in 0..samples.len() {
        if out[i].artifact.is_some() {
            continue;
        }
        let Some(d) = samples[i].diameter() else { continue };
        if d < lo_mm || d > hi_mm {
            out[i].artifact = Some(Artifact::OutOfRange);
            continue;
        }
        if i > 0 {
            let prev = &samples[i - 1];
            if let Some(pd) = prev.diameter() {
                if samples[i].t - prev.t <= slew_window_ms && (d - pd).abs() > slew_mm {
                    out[i].artifact = Some(Artifact::Slew);
                }
            }
        }
    }
    Ok(out)
}

/// Linear resampling onto a uniform grid starting at the first usable
/// sample. Gaps up to `max_gap_ms` are bridged and marked interpolated when
/// rejected samples were skipped; wider gaps are marked missing.
pub fn resample_uniform(samples: &[PupilSample], fs: f64, max_gap_ms: Millis) -> Result<CleanSignal, PreprocessError> {
    if !(fs > 0.0 && fs.is_finite()) {
        return Err(PreprocessError::Config(format!("sampling rate must be > 0, got {fs}")));
    }
    let usable: Vec<(usize, Millis, f64)> = samples
        .iter()
        .enumerate()
        .filter(|(_, s)| s.is_usable())
        .map(|(i, s)| (i, s.t, s.diameter().unwrap_or(f64::NAN)))
        .collect();
    if usable.len() < 2 {
        return Err(PreprocessError::InsufficientData { usable: usable.len() });
    }
    let t0 = usable[0].1;
    let t_last = usable[usable.len() - 1].1;
    let step = 1000.0 / fs;
    let n = ((t_last - t0) as f64 / step + 1e-9).floor() as usize + 1;

    let mut values = Vec::with_capacity(n);
    let mut mask = Vec::with_capacity(n);
    let mut j = 0;
    for i in 0..n {
        let tg = t0 as f64 + i as f64 * step;
        while j + 1 < usable.len() && (usable[j + 1].1 as f64) <= tg {
            j += 1;
        }
        let (idx_a, ta, da) = usable[j];
        if ta as f64 == tg || j + 1 == usable.len() {
            values.push(da);
            mask.push(SampleMask::Measured);
            continue;
        }
        let (idx_b, tb, db) = usable[j + 1];
        if tb - ta > max_gap_ms {
            values.push(f64::NAN);
            mask.push(SampleMask::Missing);
            continue;
        }
        let w = (tg - ta as f64) / (tb - ta) as f64;
        values.push(da + w * (db - da));
        mask.push(if idx_b == idx_a + 1 {
            SampleMask::Measured
        } else {
            SampleMask::Interpolated
        });
    }
    Ok(CleanSignal {
        fs,
        t0,
        values,
        mask,
        units: Units::Millimeters,
    })
}

/// Z-scores the signal against a resting mean and SD. A signal that is
/// already in z-units is returned unchanged.
pub fn normalize_to_baseline(signal: &CleanSignal, base_mean: f64, base_sd: f64) -> Result<CleanSignal, PreprocessError> {
    if !(base_sd > 0.0 && base_sd.is_finite()) {
        return Err(PreprocessError::DegenerateBaseline { sd: base_sd });
    }
    if signal.units == Units::ZScore {
        return Ok(signal.clone());
    }
    Ok(CleanSignal {
        values: signal.values.iter().map(|v| (v - base_mean) / base_sd).collect(),
        units: Units::ZScore,
        ..signal.clone()
    })
}

/// Clamp, blink removal and resampling with one configuration.
pub fn clean_pupil(samples: &[PupilSample], cfg: &PreprocessConfig) -> Result<CleanSignal, PreprocessError> {
    let clamped = clamp_artifacts(samples, cfg.clamp_lo_mm, cfg.clamp_hi_mm, cfg.slew_mm, cfg.slew_window_ms)?;
    let deblinked = remove_blinks(&clamped, cfg.blink_pad_ms, cfg.blink_floor_mm);
    resample_uniform(&deblinked, cfg.fs_hz, cfg.max_gap_ms)
}
