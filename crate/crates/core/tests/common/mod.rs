#![allow(dead_code)]

use std::path::Path;

use rtms_core::index::SignalKind;
use rtms_core::session::{run_calibration, write_synthetic, Entry, SessionConfig, SessionLog, SyntheticSpec};
use rtms_core::{ConditionMode, Millis};

pub const HINTS: &str = include_str!("../../data/hints.toml");
pub const TWO_EPISODES: &str = include_str!("../fixtures/two_episodes.toml");

pub fn config(dir: &Path, mode: ConditionMode) -> SessionConfig {
    SessionConfig {
        mode,
        streams: dir.join("task"),
        rosl: dir.join("rosl"),
        hints: dir.join("hints.toml"),
        baseline_dir: dir.to_path_buf(),
        ..SessionConfig::default()
    }
}

/// Writes the two-episode session, the hint file and both baselines.
pub fn fixture(dir: &Path) {
    let spec = SyntheticSpec::from_toml(TWO_EPISODES).unwrap();
    write_synthetic(&spec, dir).unwrap();
    std::fs::write(dir.join("hints.toml"), HINTS).unwrap();
    run_calibration(&config(dir, ConditionMode::Combined)).unwrap();
}

pub fn triggers(log: &SessionLog) -> Vec<(Millis, SignalKind)> {
    log.entries()
        .iter()
        .filter_map(|e| match e.entry {
            Entry::Trigger { source, .. } => Some((e.t, source)),
            _ => None,
        })
        .collect()
}

pub fn count(log: &SessionLog, kind: &str) -> usize {
    log.entries().iter().filter(|e| e.entry.kind() == kind).count()
}
