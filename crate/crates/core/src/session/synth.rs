//! Seeded synthetic sensor streams with injected load and stress episodes.

use std::f64::consts::TAU;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::signals::{BeatKind, BeatSample, ClientEvent, GazeSample, PupilSample};
use crate::Millis;

use super::runner::SessionInputs;
use super::SessionError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PupilEpisode {
    pub t0: f64,
    pub t1: f64,
    pub tone_hz: f64,
    pub amplitude_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HrEpisode {
    pub t0: f64,
    pub t1: f64,
    pub slope_bpm_per_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PupilSpec {
    pub fs_hz: f64,
    pub mean_mm: f64,
    pub noise_sd_mm: f64,
    /// Steady tracker hum.
    pub hum_hz: f64,
    pub hum_mm: f64,
    /// Brief Gaussian dilations at a fixed period; 0 disables them.
    pub twitch_period_s: f64,
    pub twitch_mm: f64,
    pub twitch_width_s: f64,
    /// Blink every this many seconds, lasting `blink_ms`; 0 disables them.
    pub blink_period_s: f64,
    pub blink_ms: f64,
    pub episodes: Vec<PupilEpisode>,
}

impl Default for PupilSpec {
    fn default() -> Self {
        Self {
            fs_hz: 250.0,
            mean_mm: 3.5,
            noise_sd_mm: 0.0005,
            hum_hz: 12.0,
            hum_mm: 0.02,
            twitch_period_s: 2.0,
            twitch_mm: 0.3,
            twitch_width_s: 0.03,
            blink_period_s: 0.0,
            blink_ms: 150.0,
            episodes: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HrSpec {
    pub rate_hz: f64,
    pub mean_bpm: f64,
    pub noise_sd_bpm: f64,
    /// Respiratory sinus arrhythmia.
    pub rsa_hz: f64,
    pub rsa_bpm: f64,
    pub rsa_phase: f64,
    /// Emit inter-beat intervals instead of heart rate.
    pub as_rr: bool,
    pub episodes: Vec<HrEpisode>,
}

impl Default for HrSpec {
    fn default() -> Self {
        Self {
            rate_hz: 1.0,
            mean_bpm: 70.0,
            noise_sd_bpm: 0.01,
            rsa_hz: 0.1,
            rsa_bpm: 2.0,
            rsa_phase: 0.3,
            as_rr: false,
            episodes: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GazeSpec {
    pub rate_hz: f64,
    /// Lines visited in turn, `dwell_s` each.
    pub lines: Vec<u32>,
    pub dwell_s: f64,
}

impl Default for GazeSpec {
    fn default() -> Self {
        Self {
            rate_hz: 10.0,
            lines: vec![12],
            dwell_s: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedEvent {
    pub t_s: f64,
    #[serde(flatten)]
    pub event: ClientEvent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub duration_s: f64,
    /// Samples before this instant form the resting phase.
    pub rosl_s: f64,
    pub pupil: Option<PupilSpec>,
    pub hr: Option<HrSpec>,
    pub gaze: Option<GazeSpec>,
    pub client: Vec<ScriptedEvent>,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            duration_s: 600.0,
            rosl_s: 120.0,
            pupil: None,
            hr: None,
            gaze: None,
            client: Vec::new(),
        }
    }
}

impl SyntheticSpec {
    pub fn from_toml(text: &str) -> Result<Self, SessionError> {
        let spec: SyntheticSpec = toml::from_str(text).map_err(|e| SessionError::Spec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), SessionError> {
        let err = |m: String| Err(SessionError::Spec(m));
        if !(self.duration_s > 0.0) || !(0.0..=self.duration_s).contains(&self.rosl_s) {
            return err(format!("need 0 <= rosl_s <= duration_s, duration_s > 0; got {} / {}", self.rosl_s, self.duration_s));
        }
        if let Some(p) = &self.pupil {
            if !(p.fs_hz > 0.0) || p.noise_sd_mm < 0.0 || !(p.twitch_width_s > 0.0 || p.twitch_period_s == 0.0) {
                return err("pupil: fs_hz > 0, noise_sd_mm >= 0 and twitch_width_s > 0 required".into());
            }
            check_episodes("pupil", p.episodes.iter().map(|e| (e.t0, e.t1)))?;
        }
        if let Some(h) = &self.hr {
            if !(h.rate_hz > 0.0) || h.noise_sd_bpm < 0.0 || !(h.mean_bpm > 0.0) {
                return err("hr: rate_hz > 0, mean_bpm > 0 and noise_sd_bpm >= 0 required".into());
            }
            check_episodes("hr", h.episodes.iter().map(|e| (e.t0, e.t1)))?;
        }
        if let Some(g) = &self.gaze {
            if !(g.rate_hz > 0.0 && g.dwell_s > 0.0) || g.lines.is_empty() {
                return err("gaze: rate_hz > 0, dwell_s > 0 and a non-empty line list required".into());
            }
        }
        Ok(())
    }
}

fn check_episodes(channel: &str, spans: impl Iterator<Item = (f64, f64)>) -> Result<(), SessionError> {
    let mut spans: Vec<(f64, f64)> = spans.collect();
    if let Some(&(t0, t1)) = spans.iter().find(|(t0, t1)| !(t0 < t1)) {
        return Err(SessionError::Spec(format!("{channel} episode [{t0}, {t1}) is empty")));
    }
    spans.sort_by(|a, b| a.0.total_cmp(&b.0));
    for w in spans.windows(2) {
        if w[1].0 < w[0].1 {
            return Err(SessionError::Spec(format!(
                "{channel} episodes [{}, {}) and [{}, {}) overlap",
                w[0].0, w[0].1, w[1].0, w[1].1
            )));
        }
    }
    Ok(())
}

/// Resting and task phases of one generated session.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SyntheticSession {
    pub rosl: SessionInputs,
    pub task: SessionInputs,
}

fn grid(duration_s: f64, rate_hz: f64) -> impl Iterator<Item = Millis> {
    let n = (duration_s * rate_hz).floor() as u64;
    (0..n).map(move |i| (i as f64 * 1000.0 / rate_hz).round() as Millis)
}

fn channel_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn noise(rng: &mut ChaCha8Rng, sd: f64) -> f64 {
    if sd == 0.0 {
        0.0
    } else {
        rng.sample(Normal::new(0.0, sd).expect("validated sd"))
    }
}

fn pupil_stream(spec: &PupilSpec, duration_s: f64, seed: u64) -> Vec<PupilSample> {
    let mut rng = channel_rng(seed, 1);
    grid(duration_s, spec.fs_hz)
        .map(|t| {
            let s = t as f64 / 1000.0;
            let mut d = spec.mean_mm + spec.hum_mm * (TAU * spec.hum_hz * s).sin();
            if spec.twitch_period_s > 0.0 {
                let dt = s - (s / spec.twitch_period_s).round() * spec.twitch_period_s;
                d += spec.twitch_mm * (-dt * dt / (2.0 * spec.twitch_width_s.powi(2))).exp();
            }
            for e in spec.episodes.iter().filter(|e| s >= e.t0 && s < e.t1) {
                d += e.amplitude_mm * (TAU * e.tone_hz * (s - e.t0)).sin();
            }
            d += noise(&mut rng, spec.noise_sd_mm);
            let blinking = spec.blink_period_s > 0.0
                && s >= spec.blink_period_s
                && (s % spec.blink_period_s) * 1000.0 < spec.blink_ms;
            if blinking {
                PupilSample::new(t, 0.0, 0.0, false)
            } else {
                PupilSample::new(t, d, d, true)
            }
        })
        .collect()
}

/// Heart rate at `s` seconds; each episode's decline persists after it ends.
fn hr_at(spec: &HrSpec, s: f64) -> f64 {
    let drift: f64 = spec
        .episodes
        .iter()
        .map(|e| e.slope_bpm_per_s * (s.clamp(e.t0, e.t1) - e.t0))
        .sum();
    spec.mean_bpm + spec.rsa_bpm * (TAU * spec.rsa_hz * s + spec.rsa_phase).sin() + drift
}

fn beat_stream(spec: &HrSpec, duration_s: f64, seed: u64) -> Vec<BeatSample> {
    let mut rng = channel_rng(seed, 2);
    grid(duration_s, spec.rate_hz)
        .map(|t| {
            let bpm = hr_at(spec, t as f64 / 1000.0) + noise(&mut rng, spec.noise_sd_bpm);
            if spec.as_rr {
                BeatSample::new(t, BeatKind::Rr, 60_000.0 / bpm)
            } else {
                BeatSample::new(t, BeatKind::Hr, bpm)
            }
        })
        .collect()
}

fn gaze_stream(spec: &GazeSpec, duration_s: f64) -> Vec<GazeSample> {
    grid(duration_s, spec.rate_hz)
        .map(|t| {
            let slot = (t as f64 / 1000.0 / spec.dwell_s).floor() as usize;
            GazeSample {
                t,
                line: spec.lines[slot % spec.lines.len()],
                valid: true,
            }
        })
        .collect()
}

fn split<T: Clone>(items: Vec<T>, at: Millis, t: impl Fn(&T) -> Millis) -> (Vec<T>, Vec<T>) {
    items.into_iter().partition(|x| t(x) < at)
}

/// Deterministic in `(spec, spec.seed)`: each channel draws from its own
/// ChaCha8 stream.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticSession, SessionError> {
    spec.validate()?;
    let at = (spec.rosl_s * 1000.0).round() as Millis;
    let mut out = SyntheticSession::default();
    if let Some(p) = &spec.pupil {
        (out.rosl.pupil, out.task.pupil) = split(pupil_stream(p, spec.duration_s, spec.seed), at, |s| s.t);
    }
    if let Some(h) = &spec.hr {
        (out.rosl.beats, out.task.beats) = split(beat_stream(h, spec.duration_s, spec.seed), at, |s| s.t);
    }
    if let Some(g) = &spec.gaze {
        (out.rosl.gaze, out.task.gaze) = split(gaze_stream(g, spec.duration_s), at, |s| s.t);
    }
    let mut client: Vec<(Millis, ClientEvent)> = spec
        .client
        .iter()
        .map(|c| ((c.t_s * 1000.0).round() as Millis, c.event.clone()))
        .collect();
    client.sort_by_key(|c| c.0);
    out.task.client = client;
    Ok(out)
}

/// Writes `rosl/` and `task/` stream directories under `dir`.
pub fn write_synthetic(spec: &SyntheticSpec, dir: &Path) -> Result<SyntheticSession, SessionError> {
    let session = generate_synthetic(spec)?;
    session.rosl.write_dir(&dir.join("rosl"))?;
    session.task.write_dir(&dir.join("task"))?;
    Ok(session)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet(duration_s: f64) -> SyntheticSpec {
        SyntheticSpec {
            seed: 3,
            duration_s,
            rosl_s: 0.0,
            pupil: Some(PupilSpec::default()),
            hr: Some(HrSpec::default()),
            ..SyntheticSpec::default()
        }
    }

    #[test]
    fn hr_episode_declines_by_slope_times_span() {
        let mut spec = quiet(400.0);
        let hr = spec.hr.as_mut().unwrap();
        hr.rsa_bpm = 0.0;
        hr.noise_sd_bpm = 0.0;
        hr.episodes.push(HrEpisode {
            t0: 300.0,
            t1: 360.0,
            slope_bpm_per_s: -0.2,
        });
        let s = generate_synthetic(&spec).unwrap();
        let at = |sec: u64| s.task.beats.iter().find(|b| b.t == sec * 1000).unwrap().value;
        assert_eq!(at(100), 70.0);
        assert!((at(300) - 70.0).abs() < 1e-12);
        assert!((at(360) - 58.0).abs() < 1e-9);
        assert!((at(399) - 58.0).abs() < 1e-9);
    }

    #[test]
    fn no_episodes_is_stationary() {
        let s = generate_synthetic(&quiet(60.0)).unwrap();
        let d: Vec<f64> = s.task.pupil.iter().map(|p| p.left_mm).collect();
        assert_eq!(d.len(), 15_000);
        let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
        let (a, b) = d.split_at(d.len() / 2);
        assert!((mean(a) - mean(b)).abs() < 1e-3);
        assert!((mean(&d) - 3.5).abs() < 0.02);
        assert!(s.task.beats.iter().all(|b| (b.value - 70.0).abs() < 2.1));
    }

    #[test]
    fn seeded_determinism() {
        let a = generate_synthetic(&quiet(30.0)).unwrap();
        let b = generate_synthetic(&quiet(30.0)).unwrap();
        assert_eq!(a, b);
        let mut other = quiet(30.0);
        other.seed = 4;
        assert_ne!(a, generate_synthetic(&other).unwrap());
    }

    #[test]
    fn overlapping_episodes_rejected() {
        let mut spec = quiet(100.0);
        let ep = |t0, t1| PupilEpisode {
            t0,
            t1,
            tone_hz: 10.0,
            amplitude_mm: 0.3,
        };
        spec.pupil.as_mut().unwrap().episodes = vec![ep(10.0, 30.0), ep(25.0, 40.0)];
        assert!(matches!(generate_synthetic(&spec), Err(SessionError::Spec(_))));
        spec.pupil.as_mut().unwrap().episodes = vec![ep(10.0, 30.0), ep(30.0, 40.0)];
        assert!(generate_synthetic(&spec).is_ok());
    }

    #[test]
    fn phases_split_at_rosl_boundary() {
        let mut spec = quiet(20.0);
        spec.rosl_s = 5.0;
        let s = generate_synthetic(&spec).unwrap();
        assert!(s.rosl.pupil.iter().all(|p| p.t < 5000));
        assert_eq!(s.task.pupil[0].t, 5000);
        assert_eq!(s.rosl.beats.len(), 5);
    }

    #[test]
    fn spec_parses_from_toml() {
        let spec = SyntheticSpec::from_toml(
            r#"
            seed = 9
            duration_s = 50
            rosl_s = 10
            [pupil]
            fs_hz = 60
            [[pupil.episodes]]
            t0 = 20
            t1 = 30
            tone_hz = 10
            amplitude_mm = 0.3
            [[client]]
            t_s = 12.5
            event = "help_toggle"
            enabled = false
            "#,
        )
        .unwrap();
        assert_eq!(spec.pupil.as_ref().unwrap().fs_hz, 60.0);
        assert_eq!(spec.pupil.as_ref().unwrap().mean_mm, 3.5);
        assert!(spec.hr.is_none());
        let s = generate_synthetic(&spec).unwrap();
        assert_eq!(s.task.client, vec![(12_500, ClientEvent::HelpToggle { enabled: false })]);
    }
}
