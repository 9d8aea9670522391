//! Serves one session to one client over TCP. Sensor samples come from the
//! configured stream files; the client supplies participant actions.

use std::io::{BufRead, BufReader, Write};
use std::net::{Shutdown, TcpListener, TcpStream};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use crate::hints::HintDb;
use crate::signals::ClientEvent;
use crate::Millis;

use super::config::{ReplaySpeed, SessionConfig};
use super::log::SessionLog;
use super::protocol::{encode, parse_client_line, ClientMsg, ServerMsg};
use super::runner::{check_admitted_streams, compute_indices, timeline, Pacer, Profiles, SessionInputs, SessionRunner};
use super::SessionError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiveOptions {
    /// How long to wait for a connection and its hello.
    pub hello_wait: Duration,
    /// At max speed the stream pauses on each prompt until the client
    /// answers or this much wall-clock time passes.
    pub response_wait: Duration,
}

impl Default for LiveOptions {
    fn default() -> Self {
        Self {
            hello_wait: Duration::from_secs(60),
            response_wait: Duration::from_secs(10),
        }
    }
}

enum Incoming {
    Msg(ClientMsg),
    Bad(String),
    Closed,
}

fn spawn_reader(stream: TcpStream) -> Receiver<Incoming> {
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        for line in BufReader::new(stream).lines() {
            let Ok(line) = line else { break };
            if line.trim().is_empty() {
                continue;
            }
            let msg = match parse_client_line(&line) {
                Ok(m) => Incoming::Msg(m),
                Err(e) => Incoming::Bad(e),
            };
            if tx.send(msg).is_err() {
                return;
            }
        }
        let _ = tx.send(Incoming::Closed);
    });
    rx
}

struct Link {
    out: TcpStream,
    rx: Receiver<Incoming>,
    open: bool,
}

impl Link {
    fn send(&mut self, msgs: &[ServerMsg]) {
        if !self.open {
            return;
        }
        for m in msgs {
            if self.out.write_all(encode(m).as_bytes()).is_err() {
                self.open = false;
                return;
            }
        }
        let _ = self.out.flush();
    }
}

enum Flow {
    Continue,
    Bye,
    Disconnected,
}

fn apply(runner: &mut SessionRunner, link: &mut Link, incoming: Incoming, t: Millis) -> Flow {
    let replies = match incoming {
        Incoming::Closed => {
            link.open = false;
            return Flow::Disconnected;
        }
        Incoming::Bad(message) => runner.protocol_error(message),
        Incoming::Msg(ClientMsg::Bye) => return Flow::Bye,
        Incoming::Msg(ClientMsg::Hello { .. }) => runner.protocol_error("duplicate hello".into()),
        Incoming::Msg(ClientMsg::PromptResponse { prompt_id, accepted }) => {
            runner.on_client(t, &ClientEvent::PromptResponse { prompt_id, accepted })
        }
        Incoming::Msg(ClientMsg::HelpToggle { enabled }) => runner.on_client(t, &ClientEvent::HelpToggle { enabled }),
        // client clocks are not trusted; resolves land at the session clock
        Incoming::Msg(ClientMsg::BugResolved { bug_id, .. }) => runner.on_client(t, &ClientEvent::BugResolved { bug_id }),
    };
    link.send(&replies);
    Flow::Continue
}

/// Waits for the hello. Anything else first is answered with an error.
fn await_hello(link: &mut Link, runner: &mut SessionRunner, wait: Duration) -> Result<(), SessionError> {
    let deadline = Instant::now() + wait;
    loop {
        let left = deadline.saturating_duration_since(Instant::now());
        match link.rx.recv_timeout(left) {
            Ok(Incoming::Msg(ClientMsg::Hello { .. })) => return Ok(()),
            Ok(Incoming::Closed) | Err(RecvTimeoutError::Disconnected) => {
                return Err(SessionError::Protocol("client left before hello".into()))
            }
            Err(RecvTimeoutError::Timeout) => return Err(SessionError::Protocol("no hello from client".into())),
            Ok(Incoming::Bad(m)) => {
                let r = runner.protocol_error(m);
                link.send(&r);
            }
            Ok(Incoming::Msg(_)) => {
                let r = runner.protocol_error("expected hello".into());
                link.send(&r);
            }
        }
    }
}

/// Accepts one client on `listener` and runs the session to the end of the
/// stream files, a `bye`, or a disconnect. A disconnect yields a log whose
/// summary is flagged aborted.
pub fn run_live(cfg: &SessionConfig, listener: &TcpListener, opts: LiveOptions) -> Result<SessionLog, SessionError> {
    cfg.validate()?;
    let inputs = SessionInputs::load_dir(&cfg.streams)?;
    let profiles = Profiles::load_dir(&cfg.baseline_dir)?;
    let hints = HintDb::load(&cfg.hints)?;
    check_admitted_streams(cfg, &inputs)?;
    let indices = compute_indices(cfg, &inputs, &profiles)?;
    let events = timeline(&inputs, &indices);
    let task_start = cfg.task_start_ms.or(inputs.first_t()).unwrap_or(0);
    let mut runner = SessionRunner::new(cfg, &profiles, hints, task_start)?;

    let (stream, _) = listener.accept()?;
    stream.set_nodelay(true)?;
    let mut link = Link {
        rx: spawn_reader(stream.try_clone()?),
        out: stream,
        open: true,
    };
    await_hello(&mut link, &mut runner, opts.hello_wait)?;
    let hello = runner.session_config_msg();
    link.send(&[hello]);

    let realtime = cfg.replay_speed == ReplaySpeed::Realtime;
    let mut pacer = Pacer::new(cfg.replay_speed, cfg.time_scale);
    let mut flow = Flow::Continue;
    'events: for (t, ev) in &events {
        if realtime {
            let deadline = pacer.deadline(*t).unwrap_or_else(Instant::now);
            loop {
                let left = deadline.saturating_duration_since(Instant::now());
                match link.rx.recv_timeout(left) {
                    Ok(inc) => {
                        let now = pacer.stream_time(runner.now()).clamp(runner.now(), *t);
                        flow = apply(&mut runner, &mut link, inc, now);
                        if !matches!(flow, Flow::Continue) {
                            break 'events;
                        }
                    }
                    Err(RecvTimeoutError::Timeout) => break,
                    Err(RecvTimeoutError::Disconnected) => {
                        flow = Flow::Disconnected;
                        break 'events;
                    }
                }
            }
        } else {
            while let Ok(inc) = link.rx.try_recv() {
                let now = runner.now();
                flow = apply(&mut runner, &mut link, inc, now);
                if !matches!(flow, Flow::Continue) {
                    break 'events;
                }
            }
        }
        let out = runner.dispatch(*t, ev)?;
        let prompted = out.iter().any(|m| matches!(m, ServerMsg::Prompt { .. }));
        link.send(&out);
        if !link.open {
            flow = Flow::Disconnected;
            break;
        }
        if prompted && !realtime {
            let guard = Instant::now() + opts.response_wait;
            while runner.engine().open_prompt().is_some() {
                let left = guard.saturating_duration_since(Instant::now());
                match link.rx.recv_timeout(left) {
                    Ok(inc) => {
                        let now = runner.now();
                flow = apply(&mut runner, &mut link, inc, now);
                        if !matches!(flow, Flow::Continue) {
                            break 'events;
                        }
                    }
                    Err(RecvTimeoutError::Timeout) => break,
                    Err(RecvTimeoutError::Disconnected) => {
                        flow = Flow::Disconnected;
                        break 'events;
                    }
                }
            }
        }
    }
    let aborted = matches!(flow, Flow::Disconnected);
    let t_end = if matches!(flow, Flow::Continue) {
        events.iter().map(|e| e.0).chain(inputs.last_t()).max().unwrap_or(task_start)
    } else {
        runner.now()
    };
    let (log, summary) = runner.finish(t_end, aborted);
    link.send(&[summary]);
    let _ = link.out.shutdown(Shutdown::Both);
    if let Some(path) = &cfg.log {
        log.write_to(path)?;
    }
    Ok(log)
}
