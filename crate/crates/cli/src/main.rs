//! `rtms`: calibrate, replay, serve, simulate and analyze sessions.
//!
//! Failures print one JSON object `{"error": {"kind", "message"}}` on
//! stderr and exit with status 1 (2 for usage errors).

use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rtms_core::session::{
    compute_metrics, run_calibration, run_live, run_replay, session_row, write_synthetic, LiveOptions, ReplaySpeed,
    SessionConfig, SessionError, SessionLog, SyntheticSpec,
};
use rtms_core::stats::report::{analyze_sessions, read_rows_csv, SessionRow};
use rtms_core::stats::StatsError;
use rtms_core::ConditionMode;
use serde_json::json;

#[derive(Parser)]
#[command(name = "rtms", version, about = "Real-time multimodal scaffolding sessions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute resting baselines from the RoSL streams.
    Calibrate(SessionArgs),
    /// Run a recorded session through the pipeline at max speed.
    Replay(SessionArgs),
    /// Serve a session to one client over TCP.
    Live {
        #[command(flatten)]
        session: SessionArgs,
        #[arg(long, default_value = "127.0.0.1:7878")]
        listen: String,
        /// Seconds to wait for the client's answer to each prompt at max speed.
        #[arg(long, default_value_t = 10.0)]
        response_wait_s: f64,
    },
    /// Generate seeded synthetic streams into `<out>/rosl` and `<out>/task`.
    Simulate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Recompute metrics from a session log.
    Metrics {
        #[arg(long)]
        log: PathBuf,
    },
    /// Cohort statistics from a metrics CSV or a directory of session logs.
    Analyze {
        input: PathBuf,
        /// Also write the long-format CSV report here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

/// Overrides for fields of the session config file.
#[derive(Args)]
struct SessionArgs {
    /// Session config (TOML). Relative paths inside resolve against its directory.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    mode: Option<ConditionMode>,
    #[arg(long)]
    expertise: Option<f64>,
    #[arg(long)]
    cooldown_s: Option<f64>,
    #[arg(long)]
    timeout_s: Option<f64>,
    #[arg(long)]
    hint_display_s: Option<f64>,
    #[arg(long)]
    k: Option<f64>,
    #[arg(long)]
    ipa_window_s: Option<f64>,
    #[arg(long)]
    ipa_hop_s: Option<f64>,
    #[arg(long)]
    stress_window_s: Option<f64>,
    #[arg(long)]
    stress_hop_s: Option<f64>,
    #[arg(long)]
    streams: Option<PathBuf>,
    #[arg(long)]
    rosl: Option<PathBuf>,
    #[arg(long)]
    hints: Option<PathBuf>,
    #[arg(long)]
    baseline_dir: Option<PathBuf>,
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long)]
    replay_speed: Option<ReplaySpeed>,
    #[arg(long)]
    time_scale: Option<f64>,
    #[arg(long)]
    task_start_ms: Option<u64>,
}

struct Failure {
    kind: &'static str,
    message: String,
}

impl From<SessionError> for Failure {
    fn from(e: SessionError) -> Self {
        Failure {
            kind: e.kind(),
            message: e.to_string(),
        }
    }
}

impl From<StatsError> for Failure {
    fn from(e: StatsError) -> Self {
        Failure {
            kind: "stats",
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure {
            kind: "io",
            message: e.to_string(),
        }
    }
}

fn rebase(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl SessionArgs {
    fn resolve(self) -> Result<SessionConfig, Failure> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)?;
                let mut cfg = SessionConfig::from_toml(&text)?;
                let base = path.parent().unwrap_or(Path::new("."));
                for p in [&mut cfg.streams, &mut cfg.rosl, &mut cfg.hints, &mut cfg.baseline_dir] {
                    rebase(base, p);
                }
                if let Some(log) = cfg.log.as_mut() {
                    rebase(base, log);
                }
                cfg
            }
            None => SessionConfig::default(),
        };
        macro_rules! set {
            ($($field:ident).+ = $value:expr) => {
                if let Some(v) = $value {
                    cfg.$($field).+ = v;
                }
            };
        }
        set!(mode = self.mode);
        set!(cooldown_s = self.cooldown_s);
        set!(timeout_s = self.timeout_s);
        set!(calibration.k = self.k);
        set!(ipa.window_s = self.ipa_window_s);
        set!(ipa.hop_s = self.ipa_hop_s);
        set!(stress.window_s = self.stress_window_s);
        set!(stress.hop_s = self.stress_hop_s);
        set!(streams = self.streams);
        set!(rosl = self.rosl);
        set!(hints = self.hints);
        set!(baseline_dir = self.baseline_dir);
        set!(replay_speed = self.replay_speed);
        set!(time_scale = self.time_scale);
        if self.expertise.is_some() {
            cfg.expertise = self.expertise;
        }
        if self.hint_display_s.is_some() {
            cfg.hint_display_s = self.hint_display_s;
        }
        if self.log.is_some() {
            cfg.log = self.log;
        }
        if self.task_start_ms.is_some() {
            cfg.task_start_ms = self.task_start_ms;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn print_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json"));
}

fn summary_json(log: &SessionLog) -> serde_json::Value {
    log.summary()
        .map(|s| serde_json::to_value(s).expect("json"))
        .unwrap_or(serde_json::Value::Null)
}

fn load_rows(input: &Path) -> Result<Vec<SessionRow>, Failure> {
    if !input.is_dir() {
        return Ok(read_rows_csv(std::fs::File::open(input)?)?);
    }
    let mut paths: Vec<PathBuf> = std::fs::read_dir(input)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Failure {
            kind: "missing_input",
            message: format!("no .jsonl session logs in {}", input.display()),
        });
    }
    paths
        .iter()
        .map(|p| {
            let log = SessionLog::read(p)?;
            session_row(&log).map_err(|e| Failure {
                kind: e.kind(),
                message: format!("{}: {e}", p.display()),
            })
        })
        .collect()
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Calibrate(args) => {
            let cfg = args.resolve()?;
            let out = run_calibration(&cfg)?;
            print_json(&json!({
                "baseline_dir": cfg.baseline_dir,
                "profiles": [out.profiles.cognitive, out.profiles.stress],
                "reports": out.reports,
            }));
        }
        Command::Replay(args) => {
            let cfg = args.resolve()?;
            let log = run_replay(&cfg)?;
            if cfg.log.is_none() {
                print!("{}", log.to_jsonl());
            } else {
                print_json(&summary_json(&log));
            }
        }
        Command::Live {
            session,
            listen,
            response_wait_s,
        } => {
            let cfg = session.resolve()?;
            let listener = TcpListener::bind(&listen)?;
            eprintln!("{}", json!({ "listening": listener.local_addr()?.to_string() }));
            let opts = LiveOptions {
                response_wait: std::time::Duration::from_secs_f64(response_wait_s.max(0.0)),
                ..LiveOptions::default()
            };
            let log = run_live(&cfg, &listener, opts)?;
            print_json(&summary_json(&log));
        }
        Command::Simulate { spec, out, seed } => {
            let mut s = SyntheticSpec::from_toml(&std::fs::read_to_string(&spec)?)?;
            if let Some(seed) = seed {
                s.seed = seed;
            }
            let session = write_synthetic(&s, &out)?;
            print_json(&json!({
                "out": out,
                "seed": s.seed,
                "rosl": {"pupil": session.rosl.pupil.len(), "beats": session.rosl.beats.len(), "gaze": session.rosl.gaze.len()},
                "task": {"pupil": session.task.pupil.len(), "beats": session.task.beats.len(), "gaze": session.task.gaze.len()},
            }));
        }
        Command::Metrics { log } => {
            let log = SessionLog::read(&log)?;
            print_json(&serde_json::to_value(compute_metrics(&log)?).expect("json"));
        }
        Command::Analyze { input, csv } => {
            let rows = load_rows(&input)?;
            let report = analyze_sessions(&rows)?;
            print!("{}", report.render_text());
            if let Some(path) = csv {
                std::fs::write(path, report.render_csv())?;
            }
        }
    }
    Ok(())
}

fn fail(kind: &str, message: &str) {
    eprintln!("{}", json!({ "error": { "kind": kind, "message": message } }));
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            fail("usage", e.to_string().trim());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            fail(f.kind, &f.message);
            ExitCode::FAILURE
        }
    }
}
