//! Append-only session log, one JSON object per line.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::ConditionMode;
use crate::index::SignalKind;
use crate::Millis;

use super::metrics::SessionMetrics;
use super::SessionError;

/// The prompt shown to participants, verbatim.
pub const PROMPT_TEXT: &str = "Hey! Do you need help?";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Entry {
    Index {
        signal: SignalKind,
        value: f64,
        coverage: f64,
        theta: Option<f64>,
    },
    Trigger {
        source: SignalKind,
        index_value: f64,
        theta: f64,
        prompt_id: u64,
    },
    Prompt {
        prompt_id: u64,
        source: SignalKind,
        text: String,
    },
    Response {
        prompt_id: u64,
        accepted: bool,
        timed_out: bool,
    },
    Hint {
        prompt_id: u64,
        bug_id: String,
        text: String,
        source_label: String,
    },
    Toggle {
        enabled: bool,
        closed_prompt: Option<u64>,
    },
    Resolve {
        bug_id: String,
    },
    Summary {
        mode: ConditionMode,
        expertise: Option<f64>,
        task_start_ms: Millis,
        task_end_ms: Millis,
        metrics: SessionMetrics,
        protocol_errors: u64,
        aborted: bool,
    },
}

impl Entry {
    pub fn kind(&self) -> &'static str {
        match self {
            Entry::Index { .. } => "index",
            Entry::Trigger { .. } => "trigger",
            Entry::Prompt { .. } => "prompt",
            Entry::Response { .. } => "response",
            Entry::Hint { .. } => "hint",
            Entry::Toggle { .. } => "toggle",
            Entry::Resolve { .. } => "resolve",
            Entry::Summary { .. } => "summary",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub t: Millis,
    #[serde(flatten)]
    pub entry: Entry,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SessionLog {
    entries: Vec<LogEntry>,
}

impl SessionLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[LogEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn last_t(&self) -> Option<Millis> {
        self.entries.last().map(|e| e.t)
    }

    /// Appends, holding `t` at the previous entry's time if it would go
    /// backwards.
    pub fn push(&mut self, t: Millis, entry: Entry) {
        let t = self.last_t().map_or(t, |last| t.max(last));
        self.entries.push(LogEntry { t, entry });
    }

    pub fn summary(&self) -> Option<&Entry> {
        self.entries.last().map(|e| &e.entry).filter(|e| matches!(e, Entry::Summary { .. }))
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("log entries serialize"));
            out.push('\n');
        }
        out
    }

    pub fn write_to(&self, path: &Path) -> Result<(), SessionError> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_jsonl().as_bytes())?;
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, SessionError> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: LogEntry = serde_json::from_str(line).map_err(|e| SessionError::Log {
                line: i + 1,
                message: e.to_string(),
            })?;
            if let Some(prev) = entries.last().map(|e: &LogEntry| e.t) {
                if entry.t < prev {
                    return Err(SessionError::Log {
                        line: i + 1,
                        message: format!("t = {} goes back from {prev}", entry.t),
                    });
                }
            }
            entries.push(entry);
        }
        Ok(Self { entries })
    }

    pub fn read(path: &Path) -> Result<Self, SessionError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Structural checks: time order, a single trailing summary, and every
    /// hint preceded by its trigger, prompt and accepting response.
    pub fn check_grammar(&self) -> Result<(), String> {
        use std::collections::HashMap;
        #[derive(PartialEq, PartialOrd, Clone, Copy)]
        enum Stage {
            Triggered,
            Prompted,
            Accepted,
            Done,
        }
        let mut stage: HashMap<u64, Stage> = HashMap::new();
        for (i, e) in self.entries.iter().enumerate() {
            if i > 0 && e.t < self.entries[i - 1].t {
                return Err(format!("entry {i}: time goes backwards"));
            }
            match &e.entry {
                Entry::Trigger { prompt_id, .. } => {
                    if stage.insert(*prompt_id, Stage::Triggered).is_some() {
                        return Err(format!("entry {i}: prompt {prompt_id} triggered twice"));
                    }
                }
                Entry::Prompt { prompt_id, text, .. } => {
                    if stage.get(prompt_id) != Some(&Stage::Triggered) || text != PROMPT_TEXT {
                        return Err(format!("entry {i}: prompt {prompt_id} without trigger"));
                    }
                    stage.insert(*prompt_id, Stage::Prompted);
                }
                Entry::Response { prompt_id, accepted, .. } => {
                    if stage.get(prompt_id) != Some(&Stage::Prompted) {
                        return Err(format!("entry {i}: response to prompt {prompt_id} not open"));
                    }
                    stage.insert(*prompt_id, if *accepted { Stage::Accepted } else { Stage::Done });
                }
                Entry::Hint { prompt_id, .. } => {
                    if stage.get(prompt_id) != Some(&Stage::Accepted) {
                        return Err(format!("entry {i}: hint for prompt {prompt_id} without acceptance"));
                    }
                    stage.insert(*prompt_id, Stage::Done);
                }
                Entry::Summary { .. } if i + 1 != self.entries.len() => {
                    return Err(format!("entry {i}: summary is not last"));
                }
                _ => {}
            }
        }
        Ok(())
    }
}
