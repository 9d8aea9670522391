//! Trigger state machine.
//!
//! ```text
//!            trigger              accept (hint found)
//!   idle ─────────────▶ prompted ───────────────────▶ hint_shown
//!    ▲  ▲                │  │  │ accept (no hint)          │ dismiss / expiry
//!    │  └────────────────┼──┘  │                           ▼
//!    │   help off        │     └──── decline / timeout ─▶ cooldown
//!    └───────────────────┴───────────── cooldown over ◀────┘
//! ```
//!
//! Every public method first calls [`TriggerEngine::advance`] with the event
//! time, so deadline-driven transitions are resolved before the event itself.
//! Those transitions queue up until [`TriggerEngine::take_transitions`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::index::SignalKind;
use crate::Millis;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConditionMode {
    Control,
    Cognitive,
    Stress,
    Combined,
}

impl ConditionMode {
    pub const ALL: [ConditionMode; 4] = [
        ConditionMode::Control,
        ConditionMode::Cognitive,
        ConditionMode::Stress,
        ConditionMode::Combined,
    ];

    pub fn admits(self, source: SignalKind) -> bool {
        match self {
            ConditionMode::Control => false,
            ConditionMode::Cognitive => source == SignalKind::Cognitive,
            ConditionMode::Stress => source == SignalKind::Stress,
            ConditionMode::Combined => true,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ConditionMode::Control => "control",
            ConditionMode::Cognitive => "cognitive",
            ConditionMode::Stress => "stress",
            ConditionMode::Combined => "combined",
        }
    }
}

impl std::fmt::Display for ConditionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ConditionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ConditionMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown mode `{s}`, expected control|cognitive|stress|combined"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Idle,
    Prompted,
    HintShown,
    Cooldown,
}

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("protocol error: {0}")]
    Protocol(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub mode: ConditionMode,
    pub cooldown_ms: Millis,
    pub prompt_timeout_ms: Millis,
    /// Hints close on their own after this long; `None` waits for the client.
    pub hint_display_ms: Option<Millis>,
    pub theta_cognitive: Option<f64>,
    pub theta_stress: Option<f64>,
}

impl EngineConfig {
    pub fn new(mode: ConditionMode) -> Self {
        Self {
            mode,
            cooldown_ms: 30_000,
            prompt_timeout_ms: 30_000,
            hint_display_ms: Some(30_000),
            theta_cognitive: None,
            theta_stress: None,
        }
    }

    pub fn with_theta(mut self, source: SignalKind, theta: f64) -> Self {
        match source {
            SignalKind::Cognitive => self.theta_cognitive = Some(theta),
            SignalKind::Stress => self.theta_stress = Some(theta),
        }
        self
    }

    pub fn theta(&self, source: SignalKind) -> Option<f64> {
        match source {
            SignalKind::Cognitive => self.theta_cognitive,
            SignalKind::Stress => self.theta_stress,
        }
    }

    /// Every source the mode admits must carry a threshold.
    pub fn validate(&self) -> Result<(), EngineError> {
        for source in SignalKind::ALL {
            if self.mode.admits(source) && self.theta(source).is_none() {
                return Err(EngineError::Config(format!("mode {} needs a {source} baseline", self.mode)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriggerEvent {
    pub t: Millis,
    pub source: SignalKind,
    pub index_value: f64,
    pub theta: f64,
    pub prompt_id: u64,
}

/// Deadline-driven changes, stamped at the deadline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transition {
    PromptTimedOut { prompt_id: u64, t: Millis },
    HintExpired { prompt_id: u64, t: Millis },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Response<H> {
    Hint(H),
    /// Accepted, but nothing left to suggest.
    NoHint,
    Declined,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EngineState {
    pub phase: Phase,
    pub help_enabled: bool,
    pub cooldown_until: Millis,
    pub feedback_count: u64,
}

#[derive(Debug, Clone)]
pub struct TriggerEngine {
    cfg: EngineConfig,
    phase: Phase,
    help_enabled: bool,
    cooldown_until: Millis,
    feedback_count: u64,
    next_prompt_id: u64,
    open_prompt: Option<(TriggerEvent, Millis)>,
    hint_since: Option<(u64, Millis)>,
    armed: [bool; 2],
    pending: Vec<Transition>,
}

fn slot(source: SignalKind) -> usize {
    match source {
        SignalKind::Cognitive => 0,
        SignalKind::Stress => 1,
    }
}

impl TriggerEngine {
    pub fn new(cfg: EngineConfig) -> Self {
        Self {
            cfg,
            phase: Phase::Idle,
            help_enabled: true,
            cooldown_until: 0,
            feedback_count: 0,
            next_prompt_id: 1,
            open_prompt: None,
            hint_since: None,
            armed: [true; 2],
            pending: Vec::new(),
        }
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn feedback_count(&self) -> u64 {
        self.feedback_count
    }

    pub fn open_prompt(&self) -> Option<&TriggerEvent> {
        self.open_prompt.as_ref().map(|(e, _)| e)
    }

    pub fn state(&self) -> EngineState {
        EngineState {
            phase: self.phase,
            help_enabled: self.help_enabled,
            cooldown_until: self.cooldown_until,
            feedback_count: self.feedback_count,
        }
    }

    pub fn take_transitions(&mut self) -> Vec<Transition> {
        std::mem::take(&mut self.pending)
    }

    /// Resolves prompt timeouts, hint expiry and cooldown ends due by `t`.
    pub fn advance(&mut self, t: Millis) {
        loop {
            match self.phase {
                Phase::Prompted => {
                    let (event, opened) = self.open_prompt.expect("prompted without prompt");
                    let deadline = opened + self.cfg.prompt_timeout_ms;
                    if t < deadline {
                        return;
                    }
                    self.open_prompt = None;
                    self.enter_cooldown(deadline);
                    self.pending.push(Transition::PromptTimedOut {
                        prompt_id: event.prompt_id,
                        t: deadline,
                    });
                }
                Phase::HintShown => {
                    let (Some(display), Some((prompt_id, since))) = (self.cfg.hint_display_ms, self.hint_since) else {
                        return;
                    };
                    let deadline = since + display;
                    if t < deadline {
                        return;
                    }
                    self.hint_since = None;
                    self.enter_cooldown(deadline);
                    self.pending.push(Transition::HintExpired { prompt_id, t: deadline });
                }
                Phase::Cooldown => {
                    if t < self.cooldown_until {
                        return;
                    }
                    self.phase = Phase::Idle;
                }
                Phase::Idle => return,
            }
        }
    }

    fn enter_cooldown(&mut self, t: Millis) {
        self.phase = Phase::Cooldown;
        self.cooldown_until = t + self.cfg.cooldown_ms;
    }

    pub fn on_index(&mut self, t: Millis, source: SignalKind, value: f64) -> Result<Option<TriggerEvent>, EngineError> {
        self.advance(t);
        if !self.cfg.mode.admits(source) {
            return Ok(None);
        }
        let theta = self
            .cfg
            .theta(source)
            .ok_or_else(|| EngineError::Config(format!("no {source} baseline for mode {}", self.cfg.mode)))?;
        if value <= theta {
            self.armed[slot(source)] = true;
            return Ok(None);
        }
        if !self.armed[slot(source)] || !self.help_enabled || self.phase != Phase::Idle || t < self.cooldown_until {
            return Ok(None);
        }
        let event = TriggerEvent {
            t,
            source,
            index_value: value,
            theta,
            prompt_id: self.next_prompt_id,
        };
        self.next_prompt_id += 1;
        self.armed[slot(source)] = false;
        self.phase = Phase::Prompted;
        self.open_prompt = Some((event, t));
        Ok(Some(event))
    }

    /// `select` is consulted only on acceptance; the feedback count grows
    /// only when it yields a hint.
    pub fn on_prompt_response<H>(
        &mut self,
        prompt_id: u64,
        accepted: bool,
        t: Millis,
        select: impl FnOnce(&TriggerEvent) -> Option<H>,
    ) -> Result<Response<H>, EngineError> {
        self.advance(t);
        let event = match self.open_prompt {
            Some((event, _)) if self.phase == Phase::Prompted && event.prompt_id == prompt_id => event,
            Some((event, _)) => {
                return Err(EngineError::Protocol(format!(
                    "response to prompt {prompt_id} while prompt {} is open",
                    event.prompt_id
                )))
            }
            None => return Err(EngineError::Protocol(format!("response to prompt {prompt_id} with no open prompt"))),
        };
        self.open_prompt = None;
        if !accepted {
            self.enter_cooldown(t);
            return Ok(Response::Declined);
        }
        match select(&event) {
            Some(hint) => {
                self.phase = Phase::HintShown;
                self.hint_since = Some((prompt_id, t));
                self.feedback_count += 1;
                Ok(Response::Hint(hint))
            }
            None => {
                self.phase = Phase::Idle;
                Ok(Response::NoHint)
            }
        }
    }

    pub fn on_hint_dismissed(&mut self, t: Millis) -> Result<(), EngineError> {
        self.advance(t);
        if self.phase != Phase::HintShown {
            return Err(EngineError::Protocol(format!("hint dismissed in phase {:?}", self.phase)));
        }
        self.hint_since = None;
        self.enter_cooldown(t);
        Ok(())
    }

    /// Returns the prompt id whose prompt or hint was closed by switching
    /// help off.
    pub fn on_help_toggle(&mut self, enabled: bool, t: Millis) -> Option<u64> {
        self.advance(t);
        self.help_enabled = enabled;
        if enabled {
            return None;
        }
        let closed = match self.phase {
            Phase::Prompted => self.open_prompt.take().map(|(e, _)| e.prompt_id),
            Phase::HintShown => self.hint_since.take().map(|(id, _)| id),
            _ => return None,
        };
        self.phase = Phase::Idle;
        closed
    }
}
