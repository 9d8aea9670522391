//! Bug database and gaze-aligned hint selection.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::TriggerEvent;
use crate::Millis;

/// Gaze older than this falls back to positional order.
pub const GAZE_STALE_MS: Millis = 2_000;

#[derive(Debug, Error, PartialEq)]
pub enum HintError {
    #[error("hint db {path}: {message}")]
    Load { path: String, message: String },
    #[error("protocol error: {0}")]
    Protocol(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BugKind {
    Syntactic,
    Logical,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BugRecord {
    pub bug_id: String,
    pub line_start: u32,
    pub line_end: u32,
    pub kind: BugKind,
    pub hints: Vec<String>,
    pub resolved_at: Option<Millis>,
    #[serde(skip)]
    delivered: usize,
}

impl BugRecord {
    pub fn distance(&self, line: u32) -> u32 {
        if line < self.line_start {
            self.line_start - line
        } else if line > self.line_end {
            line - self.line_end
        } else {
            0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HintRecord {
    pub prompt_id: u64,
    pub bug_id: String,
    pub text: String,
    pub source_label: String,
    pub t: Millis,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HintDb {
    bugs: Vec<BugRecord>,
}

fn load_err(path: impl Into<String>, message: impl Into<String>) -> HintError {
    HintError::Load {
        path: path.into(),
        message: message.into(),
    }
}

fn parse_bug(i: usize, v: &toml::Value) -> Result<BugRecord, HintError> {
    let at = |field: &str| format!("bug[{i}].{field}");
    let table = v.as_table().ok_or_else(|| load_err(format!("bug[{i}]"), "expected a table"))?;
    let get = |field: &str| table.get(field).ok_or_else(|| load_err(at(field), "missing"));

    let bug_id = get("bug_id")?
        .as_str()
        .filter(|s| !s.trim().is_empty())
        .ok_or_else(|| load_err(at("bug_id"), "expected a non-empty string"))?
        .to_string();

    let lines = get("lines")?
        .as_array()
        .ok_or_else(|| load_err(at("lines"), "expected [start, end]"))?;
    let nums: Vec<i64> = lines.iter().filter_map(|l| l.as_integer()).collect();
    let [start, end] = nums[..] else {
        return Err(load_err(at("lines"), "expected two integers [start, end]"));
    };
    if nums.len() != lines.len() || start < 1 || start > end || end > u32::MAX as i64 {
        return Err(load_err(at("lines"), format!("need 1 <= start <= end, got [{start}, {end}]")));
    }

    let kind = match get("kind")?.as_str() {
        Some("syntactic") => BugKind::Syntactic,
        Some("logical") => BugKind::Logical,
        _ => return Err(load_err(at("kind"), "expected \"syntactic\" or \"logical\"")),
    };

    let hints_v = get("hints")?.as_array().ok_or_else(|| load_err(at("hints"), "expected a list of strings"))?;
    let mut hints = Vec::with_capacity(hints_v.len());
    for (j, h) in hints_v.iter().enumerate() {
        let s = h.as_str().ok_or_else(|| load_err(format!("bug[{i}].hints[{j}]"), "expected a string"))?;
        hints.push(s.to_string());
    }
    if hints.is_empty() {
        return Err(load_err(at("hints"), "empty hint list"));
    }

    Ok(BugRecord {
        bug_id,
        line_start: start as u32,
        line_end: end as u32,
        kind,
        hints,
        resolved_at: None,
        delivered: 0,
    })
}

impl HintDb {
    pub fn from_toml(text: &str) -> Result<Self, HintError> {
        let doc: toml::Table = text.parse().map_err(|e: toml::de::Error| load_err("<document>", e.to_string()))?;
        let entries = doc
            .get("bug")
            .and_then(|b| b.as_array())
            .ok_or_else(|| load_err("bug", "expected one or more [[bug]] entries"))?;
        let mut bugs = Vec::with_capacity(entries.len());
        let mut seen = HashSet::new();
        for (i, v) in entries.iter().enumerate() {
            let bug = parse_bug(i, v)?;
            if !seen.insert(bug.bug_id.clone()) {
                return Err(load_err(format!("bug[{i}].bug_id"), format!("duplicate id `{}`", bug.bug_id)));
            }
            bugs.push(bug);
        }
        if bugs.is_empty() {
            return Err(load_err("bug", "no bugs listed"));
        }
        Ok(Self { bugs })
    }

    pub fn load(path: &Path) -> Result<Self, HintError> {
        let text = std::fs::read_to_string(path).map_err(|e| load_err(path.display().to_string(), e.to_string()))?;
        Self::from_toml(&text)
    }

    pub fn len(&self) -> usize {
        self.bugs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bugs.is_empty()
    }

    pub fn bugs(&self) -> &[BugRecord] {
        &self.bugs
    }

    pub fn unresolved(&self) -> impl Iterator<Item = &BugRecord> {
        self.bugs.iter().filter(|b| b.resolved_at.is_none())
    }

    /// Index of the bug a hint would target, without delivering anything.
    pub fn choose(&self, gaze: Option<(u32, Millis)>, t: Millis) -> Option<usize> {
        let fresh = gaze.filter(|&(_, seen)| t.saturating_sub(seen) <= GAZE_STALE_MS);
        let open = self.bugs.iter().enumerate().filter(|(_, b)| b.resolved_at.is_none());
        match fresh {
            Some((line, _)) => open.min_by(|(_, a), (_, b)| {
                (a.distance(line), a.line_start, &a.bug_id).cmp(&(b.distance(line), b.line_start, &b.bug_id))
            }),
            None => open.min_by(|(_, a), (_, b)| (a.line_start, &a.bug_id).cmp(&(b.line_start, &b.bug_id))),
        }
        .map(|(i, _)| i)
    }

    /// Picks a bug by gaze and delivers its next hint, cycling through the
    /// list. `None` when every bug is resolved.
    pub fn select_hint(&mut self, gaze: Option<(u32, Millis)>, t: Millis, trigger: &TriggerEvent) -> Option<HintRecord> {
        let i = self.choose(gaze, t)?;
        let bug = &mut self.bugs[i];
        let text = bug.hints[bug.delivered % bug.hints.len()].clone();
        bug.delivered += 1;
        Some(HintRecord {
            prompt_id: trigger.prompt_id,
            bug_id: bug.bug_id.clone(),
            text,
            source_label: trigger.source.source_label().to_string(),
            t,
        })
    }

    pub fn mark_resolved(&mut self, bug_id: &str, t: Millis) -> Result<(), HintError> {
        let bug = self
            .bugs
            .iter_mut()
            .find(|b| b.bug_id == bug_id)
            .ok_or_else(|| HintError::Protocol(format!("unknown bug `{bug_id}`")))?;
        if let Some(at) = bug.resolved_at {
            return Err(HintError::Protocol(format!("bug `{bug_id}` already resolved at {at} ms")));
        }
        bug.resolved_at = Some(t);
        Ok(())
    }
}
