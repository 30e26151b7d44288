//! Visuo-haptic server: a fixed-rate loop picks the candidate nearest to the
//! latest hand position and reports changes.

use std::collections::VecDeque;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use crossbeam_channel::{Receiver, Sender};
use vrcad_core::{import_obj, CandidateSet, DistanceScope, SelectionState, TriMesh, Vec3};
use vrcad_protocol::{
    ActiveCandidate, CandidateSetMsg, Connection, Hello, Inbound, LoopStats, MeshSource, Message, Role, Welcome,
};

use crate::mailbox::{Pose, PoseMailbox};
use crate::ServerError;

#[derive(Debug, Clone)]
pub struct VhConfig {
    pub cad_address: String,
    /// Where viewers and hand sources may connect directly.
    pub listen: Option<String>,
    pub tick_rate_hz: u32,
    pub hysteresis_margin: f64,
    pub scope: DistanceScope,
}

impl VhConfig {
    pub fn new(cad_address: impl Into<String>) -> Self {
        Self {
            cad_address: cad_address.into(),
            listen: None,
            tick_rate_hz: 1000,
            hysteresis_margin: 0.0,
            scope: DistanceScope::Handle,
        }
    }

    pub fn validate(&self) -> Result<(), ServerError> {
        if self.tick_rate_hz < 60 {
            return Err(ServerError::Config(format!(
                "tick rate must be at least 60 Hz, got {}",
                self.tick_rate_hz
            )));
        }
        if !(self.hysteresis_margin >= 0.0 && self.hysteresis_margin.is_finite()) {
            return Err(ServerError::Config(
                "hysteresis margin must be a finite value >= 0".into(),
            ));
        }
        Ok(())
    }
}

enum Command {
    Set(Arc<CandidateSet>),
    Release(Option<u64>),
}

const TIMING_WINDOW: usize = 4096;

#[derive(Default)]
struct Timings {
    micros: VecDeque<f64>,
}

impl Timings {
    fn push(&mut self, us: f64) {
        if self.micros.len() == TIMING_WINDOW {
            self.micros.pop_front();
        }
        self.micros.push_back(us);
    }

    fn percentiles(&self) -> (f64, f64) {
        if self.micros.is_empty() {
            return (0.0, 0.0);
        }
        let mut v: Vec<f64> = self.micros.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        (percentile(&v, 0.5), percentile(&v, 0.95))
    }
}

/// Nearest-rank percentile of sorted data.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

struct Shared {
    mailbox: PoseMailbox,
    commands: Sender<Command>,
    /// Current link to the CAD server.
    cad: Mutex<Option<Sender<Message>>>,
    /// Directly connected viewers and hand sources.
    direct: Mutex<Vec<Sender<Message>>>,
    stop: AtomicBool,
    started: Instant,
    ticks: AtomicU64,
    switches: AtomicU64,
    timings: Mutex<Timings>,
}

impl Shared {
    fn stats(&self) -> LoopStats {
        let ticks = self.ticks.load(Ordering::Relaxed);
        let elapsed = self.started.elapsed().as_secs_f64();
        let (p50, p95) = self.timings.lock().unwrap().percentiles();
        let (received, dropped) = self.mailbox.counters();
        LoopStats {
            ticks,
            ticks_per_second: if elapsed > 0.0 { ticks as f64 / elapsed } else { 0.0 },
            distance_query_micros_p50: p50,
            distance_query_micros_p95: p95,
            active_switch_count: self.switches.load(Ordering::Relaxed),
            hand_updates: received,
            dropped_hand_updates: dropped,
        }
    }

    fn publish(&self, msg: Message) {
        if let Some(tx) = self.cad.lock().unwrap().as_ref() {
            let _ = tx.send(msg.clone());
        }
        self.direct.lock().unwrap().retain(|tx| tx.send(msg.clone()).is_ok());
    }

    /// Handles a message from the CAD server or a direct client. Returns a
    /// reply for the sender, if any.
    fn on_message(&self, msg: Message, from_cad: bool) -> Option<Message> {
        match msg {
            Message::HandUpdate(h) => {
                self.mailbox.post(Pose {
                    seq: h.seq,
                    position: h.position,
                });
                None
            }
            Message::CandidateSet(cs) if from_cad => match load_set(cs) {
                Ok(set) => {
                    log::info!("loaded set {} ({} candidates)", set.set_id, set.len());
                    let _ = self.commands.send(Command::Set(Arc::new(set)));
                    None
                }
                Err(e) => {
                    log::error!("candidate set rejected: {e}");
                    Some(Message::error("invalid_candidate_set", e))
                }
            },
            Message::ReleaseSelection(r) if from_cad => {
                let _ = self.commands.send(Command::Release(r.set_id));
                None
            }
            Message::ModelUpdated(_) | Message::ModelLoaded(_) if from_cad => {
                let _ = self.commands.send(Command::Release(None));
                None
            }
            Message::StatsRequest(_) => Some(Message::Stats(self.stats())),
            Message::Hello(_) if !from_cad => Some(Message::Welcome(Welcome {
                session_id: 0,
                server: "vrcad-vh".into(),
            })),
            Message::Welcome(w) => {
                log::info!("handshake with {} complete", w.server);
                None
            }
            Message::Error(e) => {
                log::warn!("peer error {}: {}", e.code, e.message);
                None
            }
            _ => None,
        }
    }
}

fn load_set(cs: CandidateSetMsg) -> Result<CandidateSet, String> {
    let mut meshes: Vec<(f64, TriMesh)> = Vec::with_capacity(cs.candidates.len());
    for (i, c) in cs.candidates.iter().enumerate() {
        if c.id != i as u64 {
            return Err(format!("candidate ids must be dense, found {} at {i}", c.id));
        }
        let text = match &c.mesh {
            MeshSource::ObjText(t) => t.clone(),
            MeshSource::ObjPath(p) => std::fs::read_to_string(p).map_err(|e| format!("{p}: {e}"))?,
        };
        let mesh = import_obj(&text).map_err(|e| format!("candidate {i}: {e}"))?;
        meshes.push((c.value, mesh));
    }
    CandidateSet::from_meshes(cs.set_id, &cs.param, cs.base_value, cs.face_tag, cs.handle_tags, meshes)
        .map_err(|e| e.to_string())
}

/// Running VH server.
pub struct VhServer {
    shared: Arc<Shared>,
    listen_addr: Option<SocketAddr>,
    threads: Vec<JoinHandle<()>>,
}

impl VhServer {
    pub fn start(config: VhConfig) -> Result<VhServer, ServerError> {
        config.validate()?;
        let (cmd_tx, cmd_rx) = crossbeam_channel::unbounded();
        let shared = Arc::new(Shared {
            mailbox: PoseMailbox::new(),
            commands: cmd_tx,
            cad: Mutex::new(None),
            direct: Mutex::new(Vec::new()),
            stop: AtomicBool::new(false),
            started: Instant::now(),
            ticks: AtomicU64::new(0),
            switches: AtomicU64::new(0),
            timings: Mutex::new(Timings::default()),
        });
        let mut threads = Vec::new();
        let mut listen_addr = None;
        if let Some(listen) = &config.listen {
            let listener = TcpListener::bind(listen).map_err(|source| ServerError::Bind {
                addr: listen.clone(),
                source,
            })?;
            listen_addr = Some(listener.local_addr()?);
            let sh = shared.clone();
            threads.push(
                thread::Builder::new()
                    .name("vh-accept".into())
                    .spawn(move || accept_loop(listener, sh))?,
            );
        }
        {
            let sh = shared.clone();
            let cfg = config.clone();
            threads.push(
                thread::Builder::new()
                    .name("vh-loop".into())
                    .spawn(move || tick_loop(sh, cmd_rx, cfg))?,
            );
        }
        {
            let sh = shared.clone();
            let addr = config.cad_address.clone();
            threads.push(
                thread::Builder::new()
                    .name("vh-cad".into())
                    .spawn(move || cad_link(sh, addr))?,
            );
        }
        Ok(VhServer {
            shared,
            listen_addr,
            threads,
        })
    }

    pub fn listen_addr(&self) -> Option<SocketAddr> {
        self.listen_addr
    }

    pub fn stats(&self) -> LoopStats {
        self.shared.stats()
    }

    pub fn is_connected(&self) -> bool {
        self.shared.cad.lock().unwrap().is_some()
    }

    pub fn wait(mut self) {
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }

    pub fn shutdown(mut self) {
        self.shared.stop.store(true, Ordering::SeqCst);
        *self.shared.cad.lock().unwrap() = None;
        self.shared.direct.lock().unwrap().clear();
        if let Some(addr) = self.listen_addr {
            let _ = TcpStream::connect(addr);
        }
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}

fn tick_loop(shared: Arc<Shared>, commands: Receiver<Command>, config: VhConfig) {
    let period = Duration::from_secs_f64(1.0 / config.tick_rate_hz as f64);
    let mut set: Option<Arc<CandidateSet>> = None;
    let mut state = SelectionState::new(config.hysteresis_margin, config.scope);
    let mut emitted: Option<(u64, usize)> = None;
    let mut newest_set = 0u64;
    let mut next = Instant::now();
    while !shared.stop.load(Ordering::Relaxed) {
        // swap the set only between ticks
        let mut set_changed = false;
        for cmd in commands.try_iter() {
            match cmd {
                Command::Set(s) => {
                    if s.set_id < newest_set {
                        continue;
                    }
                    newest_set = s.set_id;
                    set = Some(s);
                    state.active = None;
                    set_changed = true;
                }
                Command::Release(id) => {
                    if id.is_none() || set.as_ref().map(|s| s.set_id) == id {
                        set = None;
                        state.active = None;
                        shared.mailbox.clear();
                    }
                }
            }
        }
        let fresh = shared.mailbox.take_fresh();
        let pose = fresh.or_else(|| if set_changed { shared.mailbox.latest() } else { None });
        if let (Some(s), Some(p)) = (&set, pose) {
            let hand = Vec3::from_array(p.position);
            let t0 = Instant::now();
            let picked = s.select_nearest(hand, &state);
            shared.timings.lock().unwrap().push(t0.elapsed().as_secs_f64() * 1e6);
            if let Ok(id) = picked {
                state.active = Some(id);
                if emitted != Some((s.set_id, id)) {
                    emitted = Some((s.set_id, id));
                    shared.switches.fetch_add(1, Ordering::Relaxed);
                    shared.publish(Message::ActiveCandidate(ActiveCandidate {
                        set_id: s.set_id,
                        candidate_id: id as u64,
                        hand_seq: Some(p.seq),
                    }));
                }
            }
        }
        shared.ticks.fetch_add(1, Ordering::Relaxed);
        next += period;
        let now = Instant::now();
        if next > now {
            thread::sleep(next - now);
        } else if now - next > period * 10 {
            // fell far behind; do not burst to catch up
            next = now;
        }
    }
}

fn cad_link(shared: Arc<Shared>, addr: String) {
    let mut backoff = Duration::from_millis(100);
    while !shared.stop.load(Ordering::SeqCst) {
        let conn = match Connection::connect_tcp(addr.as_str()) {
            Ok(c) => c,
            Err(e) => {
                log::warn!("cad server {addr} unreachable ({e}), retrying in {backoff:?}");
                thread::sleep(backoff);
                backoff = (backoff * 2).min(Duration::from_secs(2));
                continue;
            }
        };
        backoff = Duration::from_millis(100);
        let (in_tx, in_rx) = crossbeam_channel::unbounded();
        let tx = conn.spawn(move |ev| {
            let _ = in_tx.send(ev);
        });
        let _ = tx.send(Message::Hello(Hello {
            role: Role::VhServer,
            name: None,
        }));
        *shared.cad.lock().unwrap() = Some(tx.clone());
        loop {
            match in_rx.recv_timeout(Duration::from_millis(100)) {
                Ok(Inbound::Message(m)) => {
                    if let Some(reply) = shared.on_message(m, true) {
                        let _ = tx.send(reply);
                    }
                }
                Ok(Inbound::Invalid(e)) => log::warn!("from cad: {e}"),
                Ok(Inbound::Closed) | Err(crossbeam_channel::RecvTimeoutError::Disconnected) => break,
                Err(crossbeam_channel::RecvTimeoutError::Timeout) => {
                    if shared.stop.load(Ordering::SeqCst) {
                        break;
                    }
                }
            }
        }
        *shared.cad.lock().unwrap() = None;
        let _ = shared.commands.send(Command::Release(None));
        if !shared.stop.load(Ordering::SeqCst) {
            log::warn!("lost cad server, reconnecting");
        }
    }
}

fn accept_loop(listener: TcpListener, shared: Arc<Shared>) {
    for stream in listener.incoming() {
        if shared.stop.load(Ordering::SeqCst) {
            break;
        }
        let Ok(stream) = stream else { continue };
        let sh = shared.clone();
        thread::spawn(move || {
            let Ok(conn) = Connection::accept(stream) else { return };
            let (in_tx, in_rx) = crossbeam_channel::unbounded();
            let tx = conn.spawn(move |ev| {
                let _ = in_tx.send(ev);
            });
            sh.direct.lock().unwrap().push(tx.clone());
            for ev in in_rx {
                match ev {
                    Inbound::Message(m) => {
                        if let Some(reply) = sh.on_message(m, false) {
                            let _ = tx.send(reply);
                        }
                    }
                    Inbound::Invalid(e) => {
                        let _ = tx.send(e.to_message());
                    }
                    Inbound::Closed => break,
                }
            }
        });
    }
}
