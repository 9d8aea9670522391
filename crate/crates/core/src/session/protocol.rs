//! Line-delimited JSON messages between the session server and a client.
//! Every message is an object with a `type` field; unknown fields are
//! ignored.

use serde::{Deserialize, Serialize};

use crate::engine::ConditionMode;
use crate::index::SignalKind;
use crate::Millis;

use super::metrics::SessionMetrics;

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BugInfo {
    pub bug_id: String,
    pub lines: [u32; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub cognitive: Option<f64>,
    pub stress: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMsg {
    SessionConfig {
        protocol_version: u32,
        mode: ConditionMode,
        help_enabled: bool,
        thresholds: Thresholds,
        bugs: Vec<BugInfo>,
    },
    IndexUpdate {
        t: Millis,
        signal: SignalKind,
        value: f64,
        theta: Option<f64>,
    },
    Prompt {
        t: Millis,
        prompt_id: u64,
        source: SignalKind,
        text: String,
    },
    Hint {
        t: Millis,
        prompt_id: u64,
        bug_id: String,
        text: String,
        source_label: String,
    },
    SessionSummary {
        metrics: SessionMetrics,
        protocol_errors: u64,
        aborted: bool,
    },
    Error {
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMsg {
    Hello {
        client: String,
        version: String,
    },
    PromptResponse {
        prompt_id: u64,
        accepted: bool,
    },
    HelpToggle {
        enabled: bool,
    },
    BugResolved {
        bug_id: String,
        #[serde(default)]
        t: Option<Millis>,
    },
    Bye,
}

pub const CLIENT_TYPES: [&str; 5] = ["hello", "prompt_response", "help_toggle", "bug_resolved", "bye"];

/// Parses one client line. Errors are phrased for an `error` reply.
pub fn parse_client_line(line: &str) -> Result<ClientMsg, String> {
    let value: serde_json::Value = serde_json::from_str(line).map_err(|e| format!("malformed message: {e}"))?;
    let kind = value
        .get("type")
        .and_then(|t| t.as_str())
        .ok_or_else(|| "message has no `type`".to_string())?
        .to_string();
    if !CLIENT_TYPES.contains(&kind.as_str()) {
        return Err(format!("unknown message type `{kind}`"));
    }
    serde_json::from_value(value).map_err(|e| format!("invalid `{kind}` message: {e}"))
}

pub fn encode<T: Serialize>(msg: &T) -> String {
    let mut s = serde_json::to_string(msg).expect("messages serialize");
    s.push('\n');
    s
}
