use serde::{Deserialize, Serialize};

use crate::stats::report::SessionRow;
use crate::Millis;

use super::log::{Entry, SessionLog};
use super::SessionError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMetrics {
    pub bugs_resolved: u32,
    /// Seconds per resolved bug; absent when nothing was resolved.
    pub avg_time_per_bug: Option<f64>,
    pub task_duration_s: f64,
    pub feedback_count: u64,
    pub expertise: Option<f64>,
}

/// Metrics over the entries before any summary. `task_start` anchors the
/// per-bug average.
pub fn metrics_from_entries(log: &SessionLog, task_start: Millis, task_end: Millis, expertise: Option<f64>) -> SessionMetrics {
    let mut resolves = 0u32;
    let mut last_resolve = None;
    let mut hints = 0u64;
    for e in log.entries() {
        match e.entry {
            Entry::Resolve { .. } => {
                resolves += 1;
                last_resolve = Some(e.t);
            }
            Entry::Hint { .. } => hints += 1,
            _ => {}
        }
    }
    SessionMetrics {
        bugs_resolved: resolves,
        avg_time_per_bug: last_resolve.map(|t| t.saturating_sub(task_start) as f64 / 1000.0 / resolves as f64),
        task_duration_s: task_end.saturating_sub(task_start) as f64 / 1000.0,
        feedback_count: hints,
        expertise,
    }
}

/// Recomputes metrics from a finished log. Task bounds and expertise come
/// from the summary when present; otherwise the task spans the log.
pub fn compute_metrics(log: &SessionLog) -> Result<SessionMetrics, SessionError> {
    let (start, end, expertise) = match log.summary() {
        Some(Entry::Summary {
            task_start_ms,
            task_end_ms,
            expertise,
            ..
        }) => (*task_start_ms, *task_end_ms, *expertise),
        _ => (0, log.last_t().unwrap_or(0), None),
    };
    let m = metrics_from_entries(log, start, end, expertise);
    if m.bugs_resolved > 5 {
        return Err(SessionError::Log {
            line: 0,
            message: format!("{} resolve entries, at most 5 expected", m.bugs_resolved),
        });
    }
    Ok(m)
}

/// One analysis row per finished session log.
pub fn session_row(log: &SessionLog) -> Result<SessionRow, SessionError> {
    let Some(Entry::Summary { mode, expertise, .. }) = log.summary() else {
        return Err(SessionError::Log {
            line: log.len(),
            message: "log has no summary".into(),
        });
    };
    let expertise = expertise.ok_or_else(|| SessionError::Config("session summary lacks expertise".into()))?;
    let m = compute_metrics(log)?;
    Ok(SessionRow {
        condition: mode.to_string(),
        expertise,
        bugs_resolved: m.bugs_resolved as f64,
        avg_time_per_bug: m.avg_time_per_bug,
        feedback_count: m.feedback_count as f64,
    })
}
