//! Windowed index values shared by the cognitive-load and stress paths.

use serde::{Deserialize, Serialize};

use crate::Millis;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalKind {
    /// Pupillary activity index, Hz.
    Cognitive,
    /// Negated heart-rate slope, bpm/s.
    Stress,
}

impl SignalKind {
    pub const ALL: [SignalKind; 2] = [SignalKind::Cognitive, SignalKind::Stress];

    pub fn as_str(self) -> &'static str {
        match self {
            SignalKind::Cognitive => "cognitive",
            SignalKind::Stress => "stress",
        }
    }

    /// Label shown on hints triggered by this signal.
    pub fn source_label(self) -> &'static str {
        match self {
            SignalKind::Cognitive => "Cognitive-Aware",
            SignalKind::Stress => "Stress-Aware",
        }
    }
}

impl std::fmt::Display for SignalKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SignalKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cognitive" => Ok(SignalKind::Cognitive),
            "stress" => Ok(SignalKind::Stress),
            other => Err(format!("unknown signal `{other}`")),
        }
    }
}

/// One index value, stamped at the end of the window it summarizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexPoint {
    pub t: Millis,
    pub value: f64,
    /// Fraction of the window backed by usable samples, in `[0, 1]`.
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexSeries {
    pub signal: SignalKind,
    pub window_ms: Millis,
    pub hop_ms: Millis,
    pub points: Vec<IndexPoint>,
}

impl IndexSeries {
    pub fn new(signal: SignalKind, window_ms: Millis, hop_ms: Millis) -> Self {
        Self {
            signal,
            window_ms,
            hop_ms,
            points: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Span from the first window's start to the last window's end, seconds.
    pub fn covered_duration_s(&self) -> f64 {
        match (self.points.first(), self.points.last()) {
            (Some(first), Some(last)) => {
                let start = first.t.saturating_sub(self.window_ms);
                (last.t - start) as f64 / 1000.0
            }
            _ => 0.0,
        }
    }

    pub fn mean_coverage(&self) -> f64 {
        if self.points.is_empty() {
            return 0.0;
        }
        self.points.iter().map(|p| p.coverage).sum::<f64>() / self.points.len() as f64
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.value)
    }
}
