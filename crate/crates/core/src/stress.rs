//! Stress index from the heart-rate trend: the negated least-squares slope
//! of bpm over a sliding window, clamped at zero.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::index::{IndexPoint, IndexSeries, SignalKind};
use crate::signals::{BeatKind, BeatSample};
use crate::Millis;

#[derive(Debug, Error, PartialEq)]
pub enum StressError {
    #[error("insufficient data: {distinct} distinct timestamps, need 2")]
    InsufficientData { distinct: usize },
    #[error("invalid parameter: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HrPoint {
    pub t: Millis,
    pub bpm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StressWindow {
    pub t_end: Millis,
    /// bpm/s
    pub beta: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StressConfig {
    pub window_s: f64,
    pub hop_s: f64,
    pub min_beats: usize,
}

impl Default for StressConfig {
    fn default() -> Self {
        Self {
            window_s: 30.0,
            hop_s: 5.0,
            min_beats: 5,
        }
    }
}

/// Counters from beat conversion.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BeatStats {
    pub skipped_out_of_range: usize,
    /// RR samples dropped because an HR stream was present.
    pub ignored_rr: usize,
}

pub fn rr_to_hr(beats: &[BeatSample], stats: &mut BeatStats) -> Vec<HrPoint> {
    beats
        .iter()
        .filter(|b| b.kind == BeatKind::Rr)
        .filter_map(|b| {
            if b.valid {
                Some(HrPoint { t: b.t, bpm: 60_000.0 / b.value })
            } else {
                stats.skipped_out_of_range += 1;
                None
            }
        })
        .collect()
}

/// Heart rate from a mixed beat stream. HR samples take precedence; RR
/// samples are converted only when no HR sample exists.
pub fn heart_rate(beats: &[BeatSample]) -> (Vec<HrPoint>, BeatStats) {
    let mut stats = BeatStats::default();
    if beats.iter().any(|b| b.kind == BeatKind::Hr) {
        stats.ignored_rr = beats.iter().filter(|b| b.kind == BeatKind::Rr).count();
        let hr = beats
            .iter()
            .filter(|b| b.kind == BeatKind::Hr)
            .filter_map(|b| {
                if b.valid {
                    Some(HrPoint { t: b.t, bpm: b.value })
                } else {
                    stats.skipped_out_of_range += 1;
                    None
                }
            })
            .collect();
        (hr, stats)
    } else {
        let hr = rr_to_hr(beats, &mut stats);
        (hr, stats)
    }
}

/// OLS slope of bpm against time in seconds.
pub fn hr_slope(points: &[HrPoint]) -> Result<StressWindow, StressError> {
    let mut distinct: Vec<Millis> = points.iter().map(|p| p.t).collect();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(StressError::InsufficientData { distinct: distinct.len() });
    }
    let origin = points[0].t as f64;
    let ts: Vec<f64> = points.iter().map(|p| (p.t as f64 - origin) / 1000.0).collect();
    let n = points.len() as f64;
    let t_mean = ts.iter().sum::<f64>() / n;
    let y_mean = points.iter().map(|p| p.bpm).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, p) in ts.iter().zip(points) {
        let dt = t - t_mean;
        sxy += dt * (p.bpm - y_mean);
        sxx += dt * dt;
    }
    Ok(StressWindow {
        t_end: points.iter().map(|p| p.t).max().unwrap_or(0),
        beta: sxy / sxx,
        n: points.len(),
    })
}

/// Windows `[s, s + W)` at `s = t_first + j * hop`, stamped at `s + W`,
/// for as long as the window ends within the data.
pub fn stress_index_series(hr: &[HrPoint], cfg: &StressConfig) -> Result<IndexSeries, StressError> {
    if !(cfg.window_s > 0.0 && cfg.hop_s > 0.0) {
        return Err(StressError::Config(format!(
            "window and hop must be > 0, got {} s / {} s",
            cfg.window_s, cfg.hop_s
        )));
    }
    let window_ms = (cfg.window_s * 1000.0).round() as Millis;
    let hop_ms = (cfg.hop_s * 1000.0).round() as Millis;
    let mut series = IndexSeries::new(SignalKind::Stress, window_ms, hop_ms);
    let (Some(first), Some(last)) = (hr.first(), hr.last()) else {
        return Ok(series);
    };
    let mut start = first.t;
    let mut lo = 0;
    while start + window_ms <= last.t + 1 {
        let end = start + window_ms;
        while lo < hr.len() && hr[lo].t < start {
            lo += 1;
        }
        let hi = lo + hr[lo..].partition_point(|p| p.t < end);
        let window = &hr[lo..hi];
        if window.len() >= cfg.min_beats.max(2) {
            if let Ok(w) = hr_slope(window) {
                series.points.push(IndexPoint {
                    t: end,
                    value: (-w.beta).max(0.0),
                    coverage: 1.0,
                });
            }
        }
        start += hop_ms;
    }
    Ok(series)
}
