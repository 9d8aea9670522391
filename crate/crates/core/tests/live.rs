mod common;

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::thread;
use std::time::Duration;

use common::{config, count, fixture};
use rtms_core::session::{run_live, Entry, LiveOptions, SessionLog};
use rtms_core::ConditionMode;
use serde_json::{json, Value};

struct Client {
    out: TcpStream,
    lines: std::io::Lines<BufReader<TcpStream>>,
}

impl Client {
    fn connect(addr: std::net::SocketAddr) -> Self {
        let out = TcpStream::connect(addr).unwrap();
        out.set_read_timeout(Some(Duration::from_secs(30))).unwrap();
        let lines = BufReader::new(out.try_clone().unwrap()).lines();
        Self { out, lines }
    }

    fn send(&mut self, v: Value) {
        self.send_raw(&v.to_string());
    }

    fn send_raw(&mut self, line: &str) {
        writeln!(self.out, "{line}").unwrap();
    }

    fn next(&mut self) -> Option<Value> {
        self.lines.next().and_then(|l| l.ok()).map(|l| serde_json::from_str(&l).unwrap())
    }
}

/// Runs a live session over loopback; `drive` plays the client and
/// returns whatever it observed.
fn session<T: Send + 'static>(
    mode: ConditionMode,
    drive: impl FnOnce(Client) -> T + Send + 'static,
) -> (SessionLog, T) {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let client = thread::spawn(move || drive(Client::connect(addr)));
    let opts = LiveOptions {
        hello_wait: Duration::from_secs(20),
        response_wait: Duration::from_secs(20),
    };
    let log = run_live(&config(dir.path(), mode), &listener, opts).unwrap();
    (log, client.join().unwrap())
}

fn hello(c: &mut Client) -> Value {
    c.send(json!({"type": "hello", "client": "test", "version": "1"}));
    let cfg = c.next().unwrap();
    assert_eq!(cfg["type"], "session_config");
    cfg
}

/// Reads to the summary, answering each prompt with `answer`.
fn play(mut c: Client, answer: impl Fn(u64) -> Option<bool>) -> Vec<Value> {
    let mut seen = Vec::new();
    while let Some(msg) = c.next() {
        if msg["type"] == "prompt" {
            let id = msg["prompt_id"].as_u64().unwrap();
            if let Some(accepted) = answer(id) {
                c.send(json!({"type": "prompt_response", "prompt_id": id, "accepted": accepted}));
            }
        }
        let done = msg["type"] == "session_summary";
        seen.push(msg);
        if done {
            break;
        }
    }
    seen
}

fn of_type<'a>(msgs: &'a [Value], t: &str) -> Vec<&'a Value> {
    msgs.iter().filter(|m| m["type"] == t).collect()
}

#[test]
fn session_config_describes_the_session() {
    let (_, cfg) = session(ConditionMode::Stress, |mut c| {
        let cfg = hello(&mut c);
        c.send(json!({"type": "bye"}));
        cfg
    });
    assert_eq!(cfg["protocol_version"], 1);
    assert_eq!(cfg["mode"], "stress");
    assert_eq!(cfg["help_enabled"], true);
    assert!(cfg["thresholds"]["stress"].as_f64().unwrap() > 0.0);
    assert_eq!(cfg["bugs"].as_array().unwrap().len(), 5);
    assert_eq!(cfg["bugs"][0]["lines"], json!([12, 12]));
}

#[test]
fn declining_every_prompt_sends_no_hints() {
    let (log, seen) = session(ConditionMode::Combined, |mut c| {
        hello(&mut c);
        play(c, |_| Some(false))
    });
    assert!(!of_type(&seen, "prompt").is_empty());
    assert!(of_type(&seen, "hint").is_empty());
    let summary = of_type(&seen, "session_summary")[0];
    assert_eq!(summary["metrics"]["feedback_count"], 0);
    assert_eq!(summary["aborted"], false);
    assert_eq!(count(&log, "hint"), 0);
    log.check_grammar().unwrap();
}

#[test]
fn accepting_the_first_prompt_delivers_a_labelled_hint() {
    let (log, seen) = session(ConditionMode::Stress, |mut c| {
        hello(&mut c);
        play(c, |id| Some(id == 1))
    });
    let prompt = of_type(&seen, "prompt")[0];
    assert_eq!(prompt["text"], "Hey! Do you need help?");
    assert_eq!(prompt["source"], "stress");
    let hints = of_type(&seen, "hint");
    assert_eq!(hints.len(), 1);
    assert_eq!(hints[0]["prompt_id"], 1);
    assert_eq!(hints[0]["source_label"], "Stress-Aware");
    assert_eq!(count(&log, "hint"), 1);
    assert!(of_type(&seen, "index_update").len() > 400);
}

#[test]
fn help_toggle_off_stops_prompts() {
    let (log, seen) = session(ConditionMode::Combined, |mut c| {
        hello(&mut c);
        c.send(json!({"type": "help_toggle", "enabled": false}));
        play(c, |_| Some(true))
    });
    assert!(of_type(&seen, "prompt").is_empty());
    assert_eq!(count(&log, "toggle"), 1);
    assert_eq!(count(&log, "trigger"), 0);
}

#[test]
fn unknown_types_get_an_error_and_the_session_continues() {
    let (log, seen) = session(ConditionMode::Cognitive, |mut c| {
        hello(&mut c);
        c.send(json!({"type": "teleport", "to": 3}));
        c.send_raw("not json");
        c.send(json!({"type": "bug_resolved", "bug_id": "B3-integer-division", "t": 1, "extra": "ignored"}));
        play(c, |_| Some(false))
    });
    let errors = of_type(&seen, "error");
    assert_eq!(errors.len(), 2);
    assert!(errors[0]["message"].as_str().unwrap().contains("teleport"));
    let summary = of_type(&seen, "session_summary")[0];
    assert_eq!(summary["protocol_errors"], 2);
    assert_eq!(summary["metrics"]["bugs_resolved"], 1);
    assert_eq!(count(&log, "resolve"), 1);
    // client timestamps never move the log backwards
    log.check_grammar().unwrap();
}

#[test]
fn disconnect_aborts_with_a_partial_log() {
    let (log, _) = session(ConditionMode::Cognitive, |mut c| {
        hello(&mut c);
        // leave at the first prompt without answering
        while let Some(m) = c.next() {
            if m["type"] == "prompt" {
                break;
            }
        }
    });
    match log.summary() {
        Some(Entry::Summary { aborted, task_end_ms, .. }) => {
            assert!(*aborted);
            assert!(*task_end_ms < 400_000);
        }
        _ => panic!("no summary"),
    }
    log.check_grammar().unwrap();
}

#[test]
fn bye_ends_the_session_normally() {
    let (log, _) = session(ConditionMode::Control, |mut c| {
        hello(&mut c);
        c.send(json!({"type": "bye"}));
        while c.next().is_some() {}
    });
    match log.summary() {
        Some(Entry::Summary { aborted, .. }) => assert!(!*aborted),
        _ => panic!("no summary"),
    }
}
