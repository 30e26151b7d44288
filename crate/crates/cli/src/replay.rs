//! Scripted sessions, replayed either against the kernel directly or
//! against running servers. Both paths print the same report.

use std::collections::HashMap;
use std::fmt;
use std::thread;
use std::time::{Duration, Instant};

use crossbeam_channel::{unbounded, Receiver, Sender};
use thiserror::Error;
use vrcad_core::proposal::ProposalError;
use vrcad_core::{CandidateSet, DistanceScope, Model, SelectionState};
use vrcad_protocol::{
    CommitRequest, Connection, HandUpdate, Hello, Inbound, Message, ProtocolError, ReleaseSelection, Role, SelectFace,
};

use crate::script::{Script, Step};

#[derive(Debug, Clone, PartialEq)]
pub enum ReportLine {
    /// The active candidate changed while handling the hand event at `t_ms`.
    Switch {
        t_ms: u64,
        set_id: u64,
        candidate_id: usize,
        value: f64,
    },
    Commit {
        set_id: u64,
        candidate_id: usize,
        param: String,
        value: f64,
    },
    Release {
        set_id: u64,
    },
}

impl fmt::Display for ReportLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReportLine::Switch {
                t_ms,
                set_id,
                candidate_id,
                value,
            } => write!(f, "{t_ms} {set_id} {candidate_id} {value}"),
            ReportLine::Commit {
                set_id,
                candidate_id,
                param,
                value,
            } => write!(f, "commit {set_id} {candidate_id} {param} {value}"),
            ReportLine::Release { set_id } => write!(f, "release {set_id}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    pub lines: Vec<ReportLine>,
}

impl Report {
    pub fn to_text(&self) -> String {
        self.lines.iter().map(|l| format!("{l}\n")).collect()
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// Compares a report against golden text. Blank lines and `#` comments in
/// the golden file are ignored. Returns the first differing line.
pub fn compare_expected(report: &Report, expected: &str) -> Result<(), String> {
    let want: Vec<&str> = expected
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .collect();
    let got: Vec<String> = report.lines.iter().map(|l| l.to_string()).collect();
    for i in 0..want.len().max(got.len()) {
        let w = want.get(i).copied();
        let g = got.get(i).map(String::as_str);
        if w != g {
            return Err(format!(
                "report line {}: expected {}, got {}",
                i + 1,
                w.map_or("<end>".to_string(), |s| format!("'{s}'")),
                g.map_or("<end>".to_string(), |s| format!("'{s}'")),
            ));
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct ReplayOptions {
    pub k: usize,
    pub hysteresis_margin: f64,
    pub scope: DistanceScope,
}

impl Default for ReplayOptions {
    fn default() -> Self {
        Self {
            k: vrcad_core::proposal::DEFAULT_SWEEP_STEPS,
            hysteresis_margin: 0.0,
            scope: DistanceScope::Handle,
        }
    }
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("script line {line}: {message}")]
    Step { line: usize, message: String },
    #[error("script line {line}: server error {code}: {message}")]
    Server { line: usize, code: String, message: String },
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("connection closed")]
    Closed,
    #[error("timed out waiting for {0}")]
    Timeout(String),
}

#[derive(Debug, Clone)]
pub struct CommitRecord {
    pub line: usize,
    pub param: String,
    pub value: f64,
    /// Model after the commit.
    pub model: Model,
}

#[derive(Debug, Clone)]
pub struct InProcessOutcome {
    pub report: Report,
    pub commits: Vec<CommitRecord>,
    pub model: Model,
}

struct Active {
    set: CandidateSet,
    state: SelectionState,
}

/// Replays `script` against the kernel with no sockets involved.
pub fn replay_in_process(model: Model, script: &Script, opts: &ReplayOptions) -> Result<InProcessOutcome, ReplayError> {
    let mut model = model;
    let mut report = Report::default();
    let mut commits = Vec::new();
    let mut active: Option<Active> = None;
    let mut next_set_id = 1u64;
    for ev in &script.events {
        let line = ev.line;
        let step_err = |e: ProposalError| ReplayError::Step {
            line,
            message: e.to_string(),
        };
        match &ev.step {
            Step::Select(tag) => {
                let set = CandidateSet::build(&model, tag, opts.k, next_set_id).map_err(step_err)?;
                next_set_id += 1;
                active = Some(Active {
                    set,
                    state: SelectionState::new(opts.hysteresis_margin, opts.scope),
                });
            }
            Step::Hand { t_ms, position } => {
                let a = active.as_mut().expect("script checked hand after select");
                let id = a.set.select_nearest(*position, &a.state).map_err(step_err)?;
                if a.state.active != Some(id) {
                    a.state.active = Some(id);
                    report.lines.push(ReportLine::Switch {
                        t_ms: *t_ms,
                        set_id: a.set.set_id,
                        candidate_id: id,
                        value: a.set.candidates[id].value,
                    });
                }
            }
            Step::Commit => {
                let a = active.take().expect("script checked commit after select");
                let id = commit_target(a.state.active, &a.set).ok_or(ReplayError::Step {
                    line,
                    message: "nothing to commit: no active candidate and the base value did not survive".into(),
                })?;
                let value = a.set.commit_value(id).map_err(step_err)?;
                model = model
                    .set_parameter(&a.set.param, value)
                    .map_err(|e| ReplayError::Step {
                        line,
                        message: e.to_string(),
                    })?;
                vrcad_core::model_mesh(&model, "model").map_err(|e| ReplayError::Step {
                    line,
                    message: e.to_string(),
                })?;
                report.lines.push(ReportLine::Commit {
                    set_id: a.set.set_id,
                    candidate_id: id,
                    param: a.set.param.clone(),
                    value,
                });
                commits.push(CommitRecord {
                    line,
                    param: a.set.param.clone(),
                    value,
                    model: model.clone(),
                });
            }
            Step::Release => {
                let a = active.take().expect("script checked release after select");
                report.lines.push(ReportLine::Release { set_id: a.set.set_id });
            }
        }
    }
    Ok(InProcessOutcome { report, commits, model })
}

/// A commit without any hand motion keeps the base value.
fn commit_target(active: Option<usize>, set: &CandidateSet) -> Option<usize> {
    active.or_else(|| set.base_candidate())
}

#[derive(Debug, Clone)]
pub struct LiveOptions {
    /// Follow the script's timestamps with wall-clock sleeps.
    pub realtime: bool,
    /// Minimum gap between hand updates so each pose reaches a tick.
    pub min_gap: Duration,
    /// Quiet period before a commit or release so pending switches land.
    pub settle: Duration,
    pub timeout: Duration,
}

impl Default for LiveOptions {
    fn default() -> Self {
        Self {
            realtime: false,
            min_gap: Duration::from_millis(20),
            settle: Duration::from_millis(200),
            timeout: Duration::from_secs(20),
        }
    }
}

struct LiveSet {
    set_id: u64,
    param: String,
    values: Vec<f64>,
    base_value: f64,
    active: Option<usize>,
}

struct LiveClient {
    tx: Sender<Message>,
    rx: Receiver<Inbound>,
    timeout: Duration,
    report: Report,
    set: Option<LiveSet>,
    /// hand seq -> script time
    seq_time: HashMap<u64, u64>,
    last_t: u64,
}

impl LiveClient {
    fn on_message(&mut self, line: usize, msg: Message) -> Result<Option<Message>, ReplayError> {
        match msg {
            Message::Error(e) => Err(ReplayError::Server {
                line,
                code: e.code,
                message: e.message,
            }),
            Message::ActiveCandidate(a) => {
                let Some(set) = self.set.as_mut() else { return Ok(None) };
                let id = a.candidate_id as usize;
                if a.set_id != set.set_id || set.active == Some(id) {
                    return Ok(None);
                }
                let Some(&value) = set.values.get(id) else {
                    return Ok(None);
                };
                set.active = Some(id);
                let t_ms = a
                    .hand_seq
                    .and_then(|s| self.seq_time.get(&s).copied())
                    .unwrap_or(self.last_t);
                self.report.lines.push(ReportLine::Switch {
                    t_ms,
                    set_id: a.set_id,
                    candidate_id: id,
                    value,
                });
                Ok(None)
            }
            other => Ok(Some(other)),
        }
    }

    fn recv(&mut self, line: usize, wait: Duration) -> Result<Option<Message>, ReplayError> {
        match self.rx.recv_timeout(wait) {
            Ok(Inbound::Message(m)) => self.on_message(line, m),
            Ok(Inbound::Invalid(e)) => Err(e.into()),
            Ok(Inbound::Closed) => Err(ReplayError::Closed),
            Err(crossbeam_channel::RecvTimeoutError::Timeout) => Ok(None),
            Err(crossbeam_channel::RecvTimeoutError::Disconnected) => Err(ReplayError::Closed),
        }
    }

    /// Processes traffic until a message matching `want` arrives.
    fn wait_for(&mut self, line: usize, what: &str, want: impl Fn(&Message) -> bool) -> Result<Message, ReplayError> {
        let deadline = Instant::now() + self.timeout;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            if left.is_zero() {
                return Err(ReplayError::Timeout(what.to_string()));
            }
            if let Some(m) = self.recv(line, left)? {
                if want(&m) {
                    return Ok(m);
                }
            }
        }
    }

    /// Processes traffic for `period`.
    fn drain_for(&mut self, line: usize, period: Duration) -> Result<(), ReplayError> {
        let until = Instant::now() + period;
        loop {
            let left = until.saturating_duration_since(Instant::now());
            if left.is_zero() {
                return Ok(());
            }
            self.recv(line, left)?;
        }
    }

    fn send(&self, m: Message) -> Result<(), ReplayError> {
        self.tx.send(m).map_err(|_| ReplayError::Closed)
    }
}

/// Replays `script` as a hand source connected to a CAD server at `addr`.
/// Switches are taken from the `active_candidate` messages the server
/// relays, so the VH server must be attached.
pub fn replay_live(addr: &str, script: &Script, opts: &LiveOptions) -> Result<Report, ReplayError> {
    let conn = Connection::connect_tcp(addr)?;
    let (in_tx, rx) = unbounded();
    let tx = conn.spawn(move |ev| {
        let _ = in_tx.send(ev);
    });
    let mut c = LiveClient {
        tx,
        rx,
        timeout: opts.timeout,
        report: Report::default(),
        set: None,
        seq_time: HashMap::new(),
        last_t: 0,
    };
    c.send(Message::Hello(Hello {
        role: Role::HandSource,
        name: Some("replay".into()),
    }))?;
    c.wait_for(0, "model_loaded", |m| matches!(m, Message::ModelLoaded(_)))?;

    let mut seq = 0u64;
    let mut prev_t: Option<u64> = None;
    for ev in &script.events {
        let line = ev.line;
        match &ev.step {
            Step::Select(tag) => {
                c.send(Message::SelectFace(SelectFace { face_tag: tag.clone() }))?;
                let Message::CandidateSet(cs) =
                    c.wait_for(line, "candidate_set", |m| matches!(m, Message::CandidateSet(_)))?
                else {
                    unreachable!()
                };
                c.set = Some(LiveSet {
                    set_id: cs.set_id,
                    param: cs.param.clone(),
                    values: cs.candidates.iter().map(|m| m.value).collect(),
                    base_value: cs.base_value,
                    active: None,
                });
                seq = 0;
                prev_t = None;
                c.seq_time.clear();
            }
            Step::Hand { t_ms, position } => {
                let mut gap = opts.min_gap;
                if opts.realtime {
                    if let Some(p) = prev_t {
                        gap = gap.max(Duration::from_millis(t_ms - p));
                    }
                }
                if prev_t.is_some() {
                    c.drain_for(line, gap)?;
                }
                prev_t = Some(*t_ms);
                seq += 1;
                c.seq_time.insert(seq, *t_ms);
                c.last_t = *t_ms;
                c.send(Message::HandUpdate(HandUpdate {
                    seq,
                    position: position.to_array(),
                    timestamp_ms: *t_ms,
                }))?;
            }
            Step::Commit => {
                c.drain_for(line, opts.settle)?;
                let set = c.set.take().expect("script checked commit after select");
                let id = set
                    .active
                    .or_else(|| set.values.iter().position(|v| *v == set.base_value))
                    .ok_or(ReplayError::Step {
                        line,
                        message: "nothing to commit: no active candidate and the base value did not survive".into(),
                    })?;
                c.send(Message::CommitRequest(CommitRequest {
                    set_id: set.set_id,
                    candidate_id: id as u64,
                }))?;
                c.wait_for(line, "model_updated", |m| matches!(m, Message::ModelUpdated(_)))?;
                c.report.lines.push(ReportLine::Commit {
                    set_id: set.set_id,
                    candidate_id: id,
                    param: set.param,
                    value: set.values[id],
                });
            }
            Step::Release => {
                c.drain_for(line, opts.settle)?;
                let set = c.set.take().expect("script checked release after select");
                c.send(Message::ReleaseSelection(ReleaseSelection {
                    set_id: Some(set.set_id),
                }))?;
                c.wait_for(line, "release_selection", |m| matches!(m, Message::ReleaseSelection(_)))?;
                c.report.lines.push(ReportLine::Release { set_id: set.set_id });
            }
        }
    }
    if c.set.is_some() {
        c.drain_for(0, opts.settle)?;
    }
    // give the writer a moment to flush before the socket drops
    thread::sleep(Duration::from_millis(10));
    Ok(c.report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_comparison_ignores_comments() {
        let r = Report {
            lines: vec![
                ReportLine::Switch {
                    t_ms: 0,
                    set_id: 1,
                    candidate_id: 5,
                    value: 10.0,
                },
                ReportLine::Commit {
                    set_id: 1,
                    candidate_id: 5,
                    param: "d".into(),
                    value: 10.0,
                },
            ],
        };
        assert_eq!(r.to_text(), "0 1 5 10\ncommit 1 5 d 10\n");
        assert!(compare_expected(&r, "# golden\n0 1 5 10\n\ncommit 1 5 d 10  # final\n").is_ok());
        let err = compare_expected(&r, "0 1 5 10\n").unwrap_err();
        assert!(err.contains("line 2"), "{err}");
    }
}
