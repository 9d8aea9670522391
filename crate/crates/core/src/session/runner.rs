//! The session event loop shared by replay and live serving.

use std::path::Path;
use std::time::{Duration, Instant};

use crate::calibration::BaselineProfile;
use crate::engine::{Response, Transition, TriggerEngine};
use crate::hints::HintDb;
use crate::index::{IndexPoint, IndexSeries, SignalKind};
use crate::ipa::ipa_series;
use crate::preprocess::{clean_pupil, normalize_to_baseline};
use crate::signals::{
    parse_beats_csv, parse_client_events, parse_gaze_csv, parse_pupil_csv, write_beats_csv, write_client_events,
    write_gaze_csv, write_pupil_csv, BeatKind, BeatSample, ClientEvent, GazeSample, PupilSample,
};
use crate::stress::{heart_rate, stress_index_series};
use crate::Millis;

use super::config::{ReplaySpeed, SessionConfig};
use super::log::{Entry, SessionLog, PROMPT_TEXT};
use super::metrics::metrics_from_entries;
use super::protocol::{BugInfo, ServerMsg, Thresholds, PROTOCOL_VERSION};
use super::SessionError;

pub const PUPIL_FILE: &str = "pupil.csv";
pub const HR_FILE: &str = "hr.csv";
pub const RR_FILE: &str = "rr.csv";
pub const GAZE_FILE: &str = "gaze.csv";
pub const CLIENT_FILE: &str = "client.jsonl";

/// Raw streams of one session phase. Every file is optional.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SessionInputs {
    pub pupil: Vec<PupilSample>,
    pub beats: Vec<BeatSample>,
    pub gaze: Vec<GazeSample>,
    pub client: Vec<(Millis, ClientEvent)>,
}

fn open(dir: &Path, name: &str) -> Result<Option<std::fs::File>, SessionError> {
    let path = dir.join(name);
    match std::fs::File::open(&path) {
        Ok(f) => Ok(Some(f)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn with_file<T>(dir: &Path, name: &str, parse: impl FnOnce(std::fs::File) -> Result<T, crate::signals::SignalError>) -> Result<Option<T>, SessionError> {
    match open(dir, name)? {
        Some(f) => parse(f).map(Some).map_err(|source| SessionError::Signal {
            file: dir.join(name).display().to_string(),
            source,
        }),
        None => Ok(None),
    }
}

impl SessionInputs {
    pub fn load_dir(dir: &Path) -> Result<Self, SessionError> {
        if !dir.is_dir() {
            return Err(SessionError::MissingInput(format!("stream directory {}", dir.display())));
        }
        let mut beats = with_file(dir, HR_FILE, |f| parse_beats_csv(f, BeatKind::Hr))?.unwrap_or_default();
        beats.extend(with_file(dir, RR_FILE, |f| parse_beats_csv(f, BeatKind::Rr))?.unwrap_or_default());
        beats.sort_by_key(|b| b.t);
        Ok(Self {
            pupil: with_file(dir, PUPIL_FILE, parse_pupil_csv)?.unwrap_or_default(),
            beats,
            gaze: with_file(dir, GAZE_FILE, parse_gaze_csv)?.unwrap_or_default(),
            client: with_file(dir, CLIENT_FILE, parse_client_events)?.unwrap_or_default(),
        })
    }

    pub fn write_dir(&self, dir: &Path) -> Result<(), SessionError> {
        std::fs::create_dir_all(dir)?;
        let sig = |file: &str| {
            let file = dir.join(file).display().to_string();
            move |source| SessionError::Signal { file, source }
        };
        if !self.pupil.is_empty() {
            write_pupil_csv(std::fs::File::create(dir.join(PUPIL_FILE))?, &self.pupil).map_err(sig(PUPIL_FILE))?;
        }
        for (kind, name) in [(BeatKind::Hr, HR_FILE), (BeatKind::Rr, RR_FILE)] {
            let beats: Vec<BeatSample> = self.beats.iter().filter(|b| b.kind == kind).copied().collect();
            if !beats.is_empty() {
                write_beats_csv(std::fs::File::create(dir.join(name))?, &beats).map_err(sig(name))?;
            }
        }
        if !self.gaze.is_empty() {
            write_gaze_csv(std::fs::File::create(dir.join(GAZE_FILE))?, &self.gaze).map_err(sig(GAZE_FILE))?;
        }
        if !self.client.is_empty() {
            write_client_events(std::fs::File::create(dir.join(CLIENT_FILE))?, &self.client).map_err(sig(CLIENT_FILE))?;
        }
        Ok(())
    }

    pub fn first_t(&self) -> Option<Millis> {
        [
            self.pupil.first().map(|s| s.t),
            self.beats.first().map(|s| s.t),
            self.gaze.first().map(|s| s.t),
        ]
        .into_iter()
        .flatten()
        .min()
    }

    pub fn last_t(&self) -> Option<Millis> {
        [
            self.pupil.last().map(|s| s.t),
            self.beats.last().map(|s| s.t),
            self.gaze.last().map(|s| s.t),
            self.client.last().map(|c| c.0),
        ]
        .into_iter()
        .flatten()
        .max()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Profiles {
    pub cognitive: Option<BaselineProfile>,
    pub stress: Option<BaselineProfile>,
}

impl Profiles {
    pub fn get(&self, signal: SignalKind) -> Option<&BaselineProfile> {
        match signal {
            SignalKind::Cognitive => self.cognitive.as_ref(),
            SignalKind::Stress => self.stress.as_ref(),
        }
    }

    pub fn theta(&self, signal: SignalKind) -> Option<f64> {
        self.get(signal).map(|p| p.theta)
    }

    /// Loads whichever `baseline_<signal>.toml` files exist in `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self, SessionError> {
        let load = |signal| -> Result<Option<BaselineProfile>, SessionError> {
            let path = dir.join(BaselineProfile::file_name(signal));
            if !path.exists() {
                return Ok(None);
            }
            let p = BaselineProfile::load(&path)?;
            if p.signal != signal {
                return Err(SessionError::Config(format!("{} holds a {} profile", path.display(), p.signal)));
            }
            Ok(Some(p))
        };
        Ok(Self {
            cognitive: load(SignalKind::Cognitive)?,
            stress: load(SignalKind::Stress)?,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Indices {
    pub cognitive: Option<IndexSeries>,
    pub stress: Option<IndexSeries>,
}

/// Pupil and heart-rate indices for one phase. The pupil signal is
/// z-scored when the cognitive profile carries resting statistics.
pub fn compute_indices(cfg: &SessionConfig, inputs: &SessionInputs, profiles: &Profiles) -> Result<Indices, SessionError> {
    let cognitive = if inputs.pupil.is_empty() {
        None
    } else {
        let mut clean = clean_pupil(&inputs.pupil, &cfg.preprocess)?;
        if let Some(BaselineProfile {
            raw_mean: Some(m),
            raw_sd: Some(sd),
            ..
        }) = profiles.cognitive
        {
            clean = normalize_to_baseline(&clean, m, sd)?;
        }
        Some(ipa_series(&clean, &cfg.ipa)?)
    };
    let stress = if inputs.beats.is_empty() {
        None
    } else {
        let (hr, _) = heart_rate(&inputs.beats);
        Some(stress_index_series(&hr, &cfg.stress)?)
    };
    Ok(Indices { cognitive, stress })
}

#[derive(Debug, Clone, PartialEq)]
pub enum TimelineEvent {
    Gaze(GazeSample),
    Client(ClientEvent),
    Index(SignalKind, IndexPoint),
}

impl TimelineEvent {
    fn rank(&self) -> u8 {
        match self {
            TimelineEvent::Gaze(_) => 2,
            TimelineEvent::Client(_) => 3,
            TimelineEvent::Index(SignalKind::Cognitive, _) => 4,
            TimelineEvent::Index(SignalKind::Stress, _) => 5,
        }
    }
}

/// Gaze, scripted client actions and index points in processing order:
/// by time, then gaze, client, cognitive index, stress index.
pub fn timeline(inputs: &SessionInputs, indices: &Indices) -> Vec<(Millis, TimelineEvent)> {
    let mut events: Vec<(Millis, TimelineEvent)> = Vec::new();
    events.extend(inputs.gaze.iter().map(|g| (g.t, TimelineEvent::Gaze(*g))));
    events.extend(inputs.client.iter().map(|(t, c)| (*t, TimelineEvent::Client(c.clone()))));
    for (kind, series) in [(SignalKind::Cognitive, &indices.cognitive), (SignalKind::Stress, &indices.stress)] {
        if let Some(s) = series {
            events.extend(s.points.iter().map(|p| (p.t, TimelineEvent::Index(kind, *p))));
        }
    }
    events.sort_by_key(|(t, e)| (*t, e.rank()));
    events
}

/// Engine, hint store and log for one session.
pub struct SessionRunner {
    engine: TriggerEngine,
    hints: HintDb,
    thetas: Thresholds,
    log: SessionLog,
    last_gaze: Option<(u32, Millis)>,
    protocol_errors: u64,
    expertise: Option<f64>,
    task_start: Millis,
    now: Millis,
}

impl SessionRunner {
    pub fn new(cfg: &SessionConfig, profiles: &Profiles, hints: HintDb, task_start: Millis) -> Result<Self, SessionError> {
        for signal in SignalKind::ALL {
            if cfg.mode.admits(signal) && profiles.get(signal).is_none() {
                return Err(SessionError::MissingInput(format!(
                    "{} for mode {}",
                    BaselineProfile::file_name(signal),
                    cfg.mode
                )));
            }
        }
        let mut ecfg = cfg.engine_config();
        ecfg.theta_cognitive = profiles.theta(SignalKind::Cognitive);
        ecfg.theta_stress = profiles.theta(SignalKind::Stress);
        ecfg.validate()?;
        Ok(Self {
            thetas: Thresholds {
                cognitive: ecfg.theta_cognitive,
                stress: ecfg.theta_stress,
            },
            engine: TriggerEngine::new(ecfg),
            hints,
            log: SessionLog::new(),
            last_gaze: None,
            protocol_errors: 0,
            expertise: cfg.expertise,
            task_start,
            now: task_start,
        })
    }

    pub fn engine(&self) -> &TriggerEngine {
        &self.engine
    }

    pub fn now(&self) -> Millis {
        self.now
    }

    pub fn protocol_errors(&self) -> u64 {
        self.protocol_errors
    }

    pub fn session_config_msg(&self) -> ServerMsg {
        ServerMsg::SessionConfig {
            protocol_version: PROTOCOL_VERSION,
            mode: self.engine.config().mode,
            help_enabled: self.engine.state().help_enabled,
            thresholds: self.thetas.clone(),
            bugs: self
                .hints
                .bugs()
                .iter()
                .map(|b| BugInfo {
                    bug_id: b.bug_id.clone(),
                    lines: [b.line_start, b.line_end],
                })
                .collect(),
        }
    }

    /// Moves session time forward, logging prompt timeouts.
    pub fn advance(&mut self, t: Millis) {
        self.now = self.now.max(t);
        self.engine.advance(self.now);
        for tr in self.engine.take_transitions() {
            if let Transition::PromptTimedOut { prompt_id, t } = tr {
                self.log.push(
                    t,
                    Entry::Response {
                        prompt_id,
                        accepted: false,
                        timed_out: true,
                    },
                );
            }
        }
    }

    pub fn on_index(&mut self, t: Millis, signal: SignalKind, point: IndexPoint) -> Result<Vec<ServerMsg>, SessionError> {
        self.advance(t);
        let theta = match signal {
            SignalKind::Cognitive => self.thetas.cognitive,
            SignalKind::Stress => self.thetas.stress,
        };
        self.log.push(
            t,
            Entry::Index {
                signal,
                value: point.value,
                coverage: point.coverage,
                theta,
            },
        );
        let mut out = vec![ServerMsg::IndexUpdate {
            t,
            signal,
            value: point.value,
            theta,
        }];
        if let Some(ev) = self.engine.on_index(t, signal, point.value)? {
            self.log.push(
                t,
                Entry::Trigger {
                    source: ev.source,
                    index_value: ev.index_value,
                    theta: ev.theta,
                    prompt_id: ev.prompt_id,
                },
            );
            self.log.push(
                t,
                Entry::Prompt {
                    prompt_id: ev.prompt_id,
                    source: ev.source,
                    text: PROMPT_TEXT.to_string(),
                },
            );
            out.push(ServerMsg::Prompt {
                t,
                prompt_id: ev.prompt_id,
                source: ev.source,
                text: PROMPT_TEXT.to_string(),
            });
        }
        Ok(out)
    }

    pub fn on_gaze(&mut self, g: &GazeSample) {
        self.advance(g.t);
        if g.valid {
            self.last_gaze = Some((g.line, g.t));
        }
    }

    /// Counts a protocol violation and returns the error reply.
    pub fn protocol_error(&mut self, message: String) -> Vec<ServerMsg> {
        self.protocol_errors += 1;
        vec![ServerMsg::Error { message }]
    }

    /// Applies a participant action. Protocol violations are counted and
    /// answered with an error message; they never abort the session.
    pub fn on_client(&mut self, t: Millis, event: &ClientEvent) -> Vec<ServerMsg> {
        self.advance(t);
        let t = self.now;
        match event {
            ClientEvent::PromptResponse { prompt_id, accepted } => {
                let (hints, gaze) = (&mut self.hints, self.last_gaze);
                match self.engine.on_prompt_response(*prompt_id, *accepted, t, |ev| hints.select_hint(gaze, t, ev)) {
                    Ok(outcome) => {
                        self.log.push(
                            t,
                            Entry::Response {
                                prompt_id: *prompt_id,
                                accepted: *accepted,
                                timed_out: false,
                            },
                        );
                        if let Response::Hint(h) = outcome {
                            self.log.push(
                                t,
                                Entry::Hint {
                                    prompt_id: h.prompt_id,
                                    bug_id: h.bug_id.clone(),
                                    text: h.text.clone(),
                                    source_label: h.source_label.clone(),
                                },
                            );
                            return vec![ServerMsg::Hint {
                                t,
                                prompt_id: h.prompt_id,
                                bug_id: h.bug_id,
                                text: h.text,
                                source_label: h.source_label,
                            }];
                        }
                        Vec::new()
                    }
                    Err(e) => self.protocol_error(e.to_string()),
                }
            }
            ClientEvent::HelpToggle { enabled } => {
                let closed = self.engine.on_help_toggle(*enabled, t);
                self.log.push(
                    t,
                    Entry::Toggle {
                        enabled: *enabled,
                        closed_prompt: closed,
                    },
                );
                Vec::new()
            }
            ClientEvent::BugResolved { bug_id } => match self.hints.mark_resolved(bug_id, t) {
                Ok(()) => {
                    self.log.push(t, Entry::Resolve { bug_id: bug_id.clone() });
                    Vec::new()
                }
                Err(e) => self.protocol_error(e.to_string()),
            },
            ClientEvent::HintDismissed => match self.engine.on_hint_dismissed(t) {
                Ok(()) => Vec::new(),
                Err(e) => self.protocol_error(e.to_string()),
            },
        }
    }

    pub fn dispatch(&mut self, t: Millis, event: &TimelineEvent) -> Result<Vec<ServerMsg>, SessionError> {
        match event {
            TimelineEvent::Gaze(g) => {
                self.on_gaze(g);
                Ok(Vec::new())
            }
            TimelineEvent::Client(c) => Ok(self.on_client(t, c)),
            TimelineEvent::Index(kind, p) => self.on_index(t, *kind, *p),
        }
    }

    /// Closes the session at `t_end` and appends the summary.
    pub fn finish(mut self, t_end: Millis, aborted: bool) -> (SessionLog, ServerMsg) {
        self.advance(t_end);
        let end = self.now;
        let metrics = metrics_from_entries(&self.log, self.task_start, end, self.expertise);
        let msg = ServerMsg::SessionSummary {
            metrics: metrics.clone(),
            protocol_errors: self.protocol_errors,
            aborted,
        };
        self.log.push(
            end,
            Entry::Summary {
                mode: self.engine.config().mode,
                expertise: self.expertise,
                task_start_ms: self.task_start,
                task_end_ms: end,
                metrics,
                protocol_errors: self.protocol_errors,
                aborted,
            },
        );
        (self.log, msg)
    }
}

/// Sleeps until stream time `t` in realtime pacing.
pub(crate) struct Pacer {
    origin: Option<(Instant, Millis)>,
    scale: f64,
}

impl Pacer {
    pub(crate) fn new(speed: ReplaySpeed, scale: f64) -> Self {
        Self {
            origin: None,
            scale: if speed == ReplaySpeed::Realtime { scale } else { f64::INFINITY },
        }
    }

    pub(crate) fn deadline(&mut self, t: Millis) -> Option<Instant> {
        if self.scale.is_infinite() {
            return None;
        }
        let (start, t0) = *self.origin.get_or_insert((Instant::now(), t));
        Some(start + Duration::from_secs_f64(t.saturating_sub(t0) as f64 / 1000.0 / self.scale))
    }

    pub(crate) fn wait(&mut self, t: Millis) {
        if let Some(d) = self.deadline(t) {
            let now = Instant::now();
            if d > now {
                std::thread::sleep(d - now);
            }
        }
    }

    pub(crate) fn stream_time(&self, fallback: Millis) -> Millis {
        match self.origin {
            Some((start, t0)) if self.scale.is_finite() => {
                t0 + (start.elapsed().as_secs_f64() * 1000.0 * self.scale) as Millis
            }
            _ => fallback,
        }
    }
}

pub(crate) fn check_admitted_streams(cfg: &SessionConfig, inputs: &SessionInputs) -> Result<(), SessionError> {
    for signal in SignalKind::ALL {
        let stream_empty = match signal {
            SignalKind::Cognitive => inputs.pupil.is_empty(),
            SignalKind::Stress => inputs.beats.is_empty(),
        };
        if cfg.mode.admits(signal) && stream_empty {
            return Err(SessionError::MissingInput(format!("{signal} stream for mode {}", cfg.mode)));
        }
    }
    Ok(())
}

/// Runs the full pipeline over in-memory inputs.
pub fn run_replay_inputs(cfg: &SessionConfig, inputs: &SessionInputs, profiles: &Profiles, hints: HintDb) -> Result<SessionLog, SessionError> {
    cfg.validate()?;
    check_admitted_streams(cfg, inputs)?;
    let indices = compute_indices(cfg, inputs, profiles)?;
    replay_indices(cfg, inputs, &indices, profiles, hints)
}

/// Engine pass over precomputed indices. Index computation does not
/// depend on the mode, so one set of indices can drive every mode.
pub fn replay_indices(
    cfg: &SessionConfig,
    inputs: &SessionInputs,
    indices: &Indices,
    profiles: &Profiles,
    hints: HintDb,
) -> Result<SessionLog, SessionError> {
    let events = timeline(inputs, indices);
    let task_start = cfg.task_start_ms.or(inputs.first_t()).unwrap_or(0);
    let mut runner = SessionRunner::new(cfg, profiles, hints, task_start)?;
    let mut pacer = Pacer::new(cfg.replay_speed, cfg.time_scale);
    for (t, ev) in &events {
        pacer.wait(*t);
        runner.dispatch(*t, ev)?;
    }
    let t_end = events.iter().map(|e| e.0).chain(inputs.last_t()).max().unwrap_or(task_start);
    let (log, _) = runner.finish(t_end, false);
    Ok(log)
}

/// Loads streams, baselines and hints named by `cfg`, replays them and
/// writes the log when a path is configured.
pub fn run_replay(cfg: &SessionConfig) -> Result<SessionLog, SessionError> {
    cfg.validate()?;
    let inputs = SessionInputs::load_dir(&cfg.streams)?;
    let profiles = Profiles::load_dir(&cfg.baseline_dir)?;
    let hints = HintDb::load(&cfg.hints)?;
    let log = run_replay_inputs(cfg, &inputs, &profiles, hints)?;
    if let Some(path) = &cfg.log {
        log.write_to(path)?;
    }
    Ok(log)
}
