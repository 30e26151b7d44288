//! CAD server: a single hub owns the model and the edit session; network
//! threads only move messages in and out.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};

use crossbeam_channel::{Receiver, Sender};
use vrcad_core::model::ModelError;
use vrcad_core::proposal::ProposalError;
use vrcad_core::{model_mesh, to_obj_string, BuildError, CandidateSet, Model};
use vrcad_protocol::{
    Advance, CandidateMesh, CandidateSetMsg, Connection, ErrorMsg, Inbound, MeshSource, Message, MessageType,
    ModelSnapshot, ParamValue, ParameterSelected, ProtocolError, ReleaseSelection, Role, Session, SessionState,
    Welcome,
};

use crate::{ClientId, ServerError};

#[derive(Debug, Clone)]
pub struct CadConfig {
    pub listen: String,
    pub model_path: PathBuf,
    /// Sweep half-width.
    pub k: usize,
    pub shared_folder: Option<PathBuf>,
    /// Reference candidates by shared-folder path instead of inline text.
    pub send_paths: bool,
    pub recenter: bool,
    pub recenter_hold_ticks: u32,
}

impl CadConfig {
    pub fn new(model_path: impl Into<PathBuf>) -> Self {
        Self {
            listen: "127.0.0.1:7010".into(),
            model_path: model_path.into(),
            k: vrcad_core::proposal::DEFAULT_SWEEP_STEPS,
            shared_folder: None,
            send_paths: false,
            recenter: false,
            recenter_hold_ticks: 60,
        }
    }

    pub fn validate(&self) -> Result<(), ServerError> {
        if self.k < 1 {
            return Err(ServerError::Config("K must be at least 1".into()));
        }
        if self.send_paths && self.shared_folder.is_none() {
            return Err(ServerError::Config("sending paths needs a shared folder".into()));
        }
        if let Some(dir) = &self.shared_folder {
            std::fs::create_dir_all(dir)?;
            // probe writability up front rather than mid-drag
            tempfile::NamedTempFile::new_in(dir)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    One(ClientId),
    All,
    /// Connected VH servers.
    Vh,
    /// Everyone except VH servers.
    Clients,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outgoing {
    pub to: Target,
    pub msg: Message,
}

fn out(to: Target, msg: Message) -> Outgoing {
    Outgoing { to, msg }
}

/// Model owner and session logic, free of any I/O.
pub struct CadCore {
    config: CadConfig,
    model: Model,
    model_obj: String,
    session: Session,
    roles: BTreeMap<ClientId, Role>,
    next_set_id: u64,
    set: Option<CandidateSet>,
    active: Option<u64>,
    /// Hand updates seen while the active candidate was an extreme.
    hold: u32,
}

pub fn snapshot(model: &Model, obj_text: &str) -> ModelSnapshot {
    ModelSnapshot {
        revision: model.revision,
        obj_text: obj_text.to_string(),
        parameters: model
            .parameters
            .iter()
            .map(|p| ParamValue {
                name: p.name.clone(),
                value: p.value,
                driven: p.driven,
            })
            .collect(),
    }
}

pub const MODEL_MESH_NAME: &str = "model";

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn proposal_error(e: &ProposalError) -> Message {
    Message::error(e.code(), e.to_string())
}

impl CadCore {
    pub fn new(config: CadConfig) -> Result<Self, ServerError> {
        config.validate()?;
        let model = Model::from_file(&config.model_path)?;
        Self::with_model(config, model)
    }

    pub fn with_model(config: CadConfig, model: Model) -> Result<Self, ServerError> {
        let model_obj = to_obj_string(&model_mesh(&model, MODEL_MESH_NAME)?);
        Ok(Self {
            config,
            model,
            model_obj,
            session: Session::new(),
            roles: BTreeMap::new(),
            next_set_id: 1,
            set: None,
            active: None,
            hold: 0,
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn model_obj(&self) -> &str {
        &self.model_obj
    }

    pub fn session_state(&self) -> SessionState {
        self.session.state
    }

    pub fn candidate_set(&self) -> Option<&CandidateSet> {
        self.set.as_ref()
    }

    pub fn role(&self, id: ClientId) -> Option<Role> {
        self.roles.get(&id).copied()
    }

    pub fn disconnect(&mut self, id: ClientId) {
        self.roles.remove(&id);
    }

    /// Writes `value` into `param` and rebuilds the model mesh. On failure
    /// nothing changes.
    pub fn apply_commit(&mut self, param: &str, value: f64) -> Result<ModelSnapshot, BuildError> {
        let next = self.model.set_parameter(param, value)?;
        let obj = to_obj_string(&model_mesh(&next, MODEL_MESH_NAME)?);
        self.model = next;
        self.model_obj = obj;
        Ok(snapshot(&self.model, &self.model_obj))
    }

    fn candidate_message(&self, set: &CandidateSet) -> Result<CandidateSetMsg, std::io::Error> {
        let mut candidates = Vec::with_capacity(set.len());
        for c in &set.candidates {
            let text = to_obj_string(&c.mesh);
            let mut mesh = MeshSource::ObjText(String::new());
            if let Some(dir) = &self.config.shared_folder {
                let path = dir.join(format!("set{}_cand{}.obj", set.set_id, c.id));
                write_atomic(&path, text.as_bytes())?;
                if self.config.send_paths {
                    mesh = MeshSource::ObjPath(path.to_string_lossy().into_owned());
                }
            }
            if let MeshSource::ObjText(t) = &mut mesh {
                *t = text;
            }
            candidates.push(CandidateMesh {
                id: c.id as u64,
                value: c.value,
                mesh,
            });
        }
        Ok(CandidateSetMsg {
            set_id: set.set_id,
            param: set.param.clone(),
            base_value: set.base_value,
            face_tag: set.face_tag.clone(),
            handle_tags: set.handle_tags.clone(),
            candidates,
        })
    }

    fn bad_state(&self, from: ClientId, kind: MessageType) -> Vec<Outgoing> {
        let e = ProtocolError::BadState {
            state: self.session.state,
            message: kind,
        };
        vec![out(Target::One(from), e.to_message())]
    }

    fn end_selection(&mut self) {
        self.set = None;
        self.active = None;
        self.hold = 0;
    }

    /// Processes one message from client `from`.
    pub fn handle(&mut self, from: ClientId, msg: Message) -> Vec<Outgoing> {
        let kind = msg.kind();
        if !self.roles.contains_key(&from) && kind != MessageType::Hello {
            return vec![out(
                Target::One(from),
                Message::error("bad_state", format!("{kind} before hello")),
            )];
        }
        match msg {
            Message::Hello(h) => self.on_hello(from, h.role),
            Message::LoadModel(m) => self.on_load_model(from, &m.model_text),
            Message::SelectFace(m) => self.on_select(from, m.face_tag),
            Message::HandUpdate(_) => match self.session.advance(&msg) {
                Ok(_) => {
                    let mut outs = vec![out(Target::Vh, msg)];
                    outs.extend(self.tick_recenter());
                    outs
                }
                Err(e) => vec![out(Target::One(from), e.to_message())],
            },
            Message::ActiveCandidate(ref a) => {
                let cid = a.candidate_id;
                match self.session.advance(&msg) {
                    Ok(Advance::Accepted { .. }) => {
                        let valid = self.set.as_ref().is_some_and(|s| (cid as usize) < s.len());
                        if !valid {
                            return vec![out(
                                Target::One(from),
                                Message::error("unknown_candidate", format!("no candidate {cid}")),
                            )];
                        }
                        if self.active != Some(cid) {
                            self.hold = 0;
                        }
                        self.active = Some(cid);
                        vec![out(Target::Clients, msg)]
                    }
                    Ok(Advance::Stale { .. }) => vec![],
                    Err(e) => vec![out(Target::One(from), e.to_message())],
                }
            }
            Message::CommitRequest(ref c) => {
                let cid = c.candidate_id;
                match self.session.advance(&msg) {
                    Ok(Advance::Accepted { .. }) => self.on_commit(from, cid),
                    Ok(Advance::Stale { .. }) => vec![],
                    Err(e) => vec![out(Target::One(from), e.to_message())],
                }
            }
            Message::ReleaseSelection(_) => match self.session.advance(&msg) {
                Ok(Advance::Accepted { from: prev, .. }) => {
                    let set_id = self.set.as_ref().map(|s| s.set_id);
                    self.end_selection();
                    if prev == SessionState::Idle {
                        vec![]
                    } else {
                        vec![out(Target::All, Message::ReleaseSelection(ReleaseSelection { set_id }))]
                    }
                }
                Ok(Advance::Stale { .. }) => vec![],
                Err(e) => vec![out(Target::One(from), e.to_message())],
            },
            Message::Error(ErrorMsg { code, message }) => {
                log::warn!("client {from} reported {code}: {message}");
                vec![]
            }
            Message::StatsRequest(_) => vec![out(
                Target::One(from),
                Message::error("unsupported", "loop statistics are served by the VH server"),
            )],
            other => self.bad_state(from, other.kind()),
        }
    }

    fn on_hello(&mut self, from: ClientId, role: Role) -> Vec<Outgoing> {
        if self.roles.insert(from, role).is_some() {
            return vec![out(Target::One(from), Message::error("bad_state", "duplicate hello"))];
        }
        log::info!("client {from} joined as {role:?}");
        let mut outs = vec![out(
            Target::One(from),
            Message::Welcome(Welcome {
                session_id: from,
                server: "vrcad-cad".into(),
            }),
        )];
        if role != Role::VhServer {
            outs.push(out(
                Target::One(from),
                Message::ModelLoaded(snapshot(&self.model, &self.model_obj)),
            ));
        }
        // late joiners get the live candidate set
        if let Some(set) = &self.set {
            match self.candidate_message(set) {
                Ok(m) => outs.push(out(Target::One(from), Message::CandidateSet(m))),
                Err(e) => log::error!("shared folder: {e}"),
            }
        }
        outs
    }

    fn on_load_model(&mut self, from: ClientId, text: &str) -> Vec<Outgoing> {
        if self.session.state != SessionState::Idle {
            return self.bad_state(from, MessageType::LoadModel);
        }
        let loaded = Model::from_json(text)
            .map_err(BuildError::from)
            .and_then(|m| Ok((to_obj_string(&model_mesh(&m, MODEL_MESH_NAME)?), m)));
        match loaded {
            Ok((obj, model)) => {
                self.model = model;
                self.model_obj = obj;
                let msg = Message::ModelLoaded(snapshot(&self.model, &self.model_obj));
                let _ = self.session.advance(&msg);
                log::info!("model replaced, revision {}", self.model.revision);
                vec![out(Target::All, msg)]
            }
            Err(e) => {
                let code = match &e {
                    BuildError::Model(m) => m.code(),
                    BuildError::Mesh(_) => "regeneration_failed",
                };
                vec![out(Target::One(from), Message::error(code, e.to_string()))]
            }
        }
    }

    fn on_select(&mut self, from: ClientId, tag: vrcad_core::FaceTag) -> Vec<Outgoing> {
        if vrcad_protocol::transition(self.session.state, MessageType::SelectFace).is_none() {
            return self.bad_state(from, MessageType::SelectFace);
        }
        let set_id = self.next_set_id;
        let set = match CandidateSet::build(&self.model, &tag, self.config.k, set_id) {
            Ok(s) => s,
            Err(e) => return vec![out(Target::One(from), proposal_error(&e))],
        };
        for d in &set.diagnostics {
            log::info!("set {set_id}: dropped {} = {}: {}", set.param, d.value, d.reason);
        }
        self.publish_set(set)
    }

    /// Announces a freshly built set and makes it current.
    fn publish_set(&mut self, set: CandidateSet) -> Vec<Outgoing> {
        self.next_set_id = set.set_id + 1;
        let cs = match self.candidate_message(&set) {
            Ok(m) => m,
            Err(e) => return vec![out(Target::All, Message::error("shared_folder", e.to_string()))],
        };
        let mut outs = Vec::new();
        if self.session.state == SessionState::Idle {
            let ps = Message::ParameterSelected(ParameterSelected {
                param: set.param.clone(),
                set_id: set.set_id,
                values: set.values(),
                face_tag: set.face_tag.clone(),
            });
            self.session.advance(&ps).expect("idle accepts parameter_selected");
            outs.push(out(Target::All, ps));
        }
        let cs = Message::CandidateSet(cs);
        self.session.advance(&cs).expect("fresh set id is accepted");
        outs.push(out(Target::All, cs));
        log::info!("set {}: {} over {:?}", set.set_id, set.param, set.values());
        self.set = Some(set);
        self.active = None;
        self.hold = 0;
        outs
    }

    fn tick_recenter(&mut self) -> Vec<Outgoing> {
        if !self.config.recenter {
            return vec![];
        }
        let (Some(set), Some(active)) = (&self.set, self.active) else {
            return vec![];
        };
        let id = active as usize;
        if !set.is_extreme(id) {
            self.hold = 0;
            return vec![];
        }
        self.hold += 1;
        if self.hold < self.config.recenter_hold_ticks {
            return vec![];
        }
        self.hold = 0;
        let center = set.candidates[id].value;
        if center == set.base_value {
            return vec![];
        }
        let rebuilt = CandidateSet::build_for_parameter(
            &self.model,
            &set.param,
            center,
            &set.face_tag,
            self.config.k,
            self.next_set_id,
        );
        match rebuilt {
            Ok(new_set) => self.publish_set(new_set),
            Err(e) => {
                log::warn!("recenter at {center} failed: {e}");
                vec![]
            }
        }
    }

    fn on_commit(&mut self, from: ClientId, cid: u64) -> Vec<Outgoing> {
        let set = self.set.take().expect("committing implies a bound set");
        let set_id = set.set_id;
        let result = match set.commit_value(cid as usize) {
            Err(e) => Err(proposal_error(&e)),
            Ok(v) => self.apply_commit(&set.param, v).map_err(|e| {
                let code = match &e {
                    BuildError::Model(ModelError::OutOfRange { .. }) => "out_of_range",
                    BuildError::Model(m) => m.code(),
                    BuildError::Mesh(_) => "regeneration_failed",
                };
                Message::error(code, e.to_string())
            }),
        };
        self.end_selection();
        match result {
            Ok(snap) => {
                let msg = Message::ModelUpdated(snap);
                self.session.advance(&msg).expect("committing accepts model_updated");
                log::info!(
                    "committed {} = {}, revision {}",
                    set.param,
                    self.param_value(&set.param),
                    self.model.revision
                );
                vec![out(Target::All, msg)]
            }
            Err(err) => {
                self.session.advance(&err).expect("error always accepted");
                vec![
                    out(Target::One(from), err),
                    out(
                        Target::All,
                        Message::ReleaseSelection(ReleaseSelection { set_id: Some(set_id) }),
                    ),
                ]
            }
        }
    }

    fn param_value(&self, name: &str) -> f64 {
        self.model.param(name).map_or(f64::NAN, |p| p.value)
    }
}

enum Event {
    Connected(ClientId, Sender<Message>),
    Inbound(ClientId, Inbound),
    Shutdown,
}

/// Running CAD server.
pub struct CadServer {
    addr: SocketAddr,
    events: Sender<Event>,
    stop: Arc<AtomicBool>,
    threads: Vec<JoinHandle<()>>,
}

impl CadServer {
    /// Loads the model, binds and starts serving in background threads.
    pub fn start(config: CadConfig) -> Result<CadServer, ServerError> {
        let core = CadCore::new(config.clone())?;
        let listener = TcpListener::bind(&config.listen).map_err(|source| ServerError::Bind {
            addr: config.listen.clone(),
            source,
        })?;
        let addr = listener.local_addr()?;
        log::info!(
            "cad server on {addr}, model {} revision {}",
            config.model_path.display(),
            core.model().revision
        );
        let (tx, rx) = crossbeam_channel::unbounded();
        let stop = Arc::new(AtomicBool::new(false));
        let hub = thread::Builder::new()
            .name("cad-hub".into())
            .spawn(move || hub_loop(core, rx))?;
        let acceptor = {
            let tx = tx.clone();
            let stop = stop.clone();
            thread::Builder::new()
                .name("cad-accept".into())
                .spawn(move || accept_loop(listener, tx, stop))?
        };
        Ok(CadServer {
            addr,
            events: tx,
            stop,
            threads: vec![hub, acceptor],
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Blocks until the server stops.
    pub fn wait(mut self) {
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }

    pub fn shutdown(mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = self.events.send(Event::Shutdown);
        // unblock accept()
        let _ = TcpStream::connect(self.addr);
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}

fn accept_loop(listener: TcpListener, events: Sender<Event>, stop: Arc<AtomicBool>) {
    let mut next_id: ClientId = 1;
    for stream in listener.incoming() {
        if stop.load(Ordering::SeqCst) {
            break;
        }
        let Ok(stream) = stream else { continue };
        let id = next_id;
        next_id += 1;
        let events = events.clone();
        thread::spawn(move || match Connection::accept(stream) {
            Ok(conn) => {
                log::debug!("client {id} connected from {}", conn.peer());
                let (conn_tx, conn_rx) = crossbeam_channel::unbounded::<Inbound>();
                // register before the first inbound event can reach the hub
                let ev = events.clone();
                let tx = conn.spawn(move |inbound| {
                    let _ = conn_tx.send(inbound);
                });
                if events.send(Event::Connected(id, tx)).is_err() {
                    return;
                }
                for inbound in conn_rx {
                    let closed = matches!(inbound, Inbound::Closed);
                    if ev.send(Event::Inbound(id, inbound)).is_err() || closed {
                        break;
                    }
                }
            }
            Err(e) => log::warn!("handshake with client {id} failed: {e}"),
        });
    }
}

fn hub_loop(mut core: CadCore, events: Receiver<Event>) {
    let mut clients: BTreeMap<ClientId, Sender<Message>> = BTreeMap::new();
    for ev in events {
        match ev {
            Event::Connected(id, tx) => {
                clients.insert(id, tx);
            }
            Event::Inbound(id, Inbound::Message(msg)) => {
                for o in core.handle(id, msg) {
                    dispatch(&core, &clients, o);
                }
            }
            Event::Inbound(id, Inbound::Invalid(e)) => {
                log::debug!("client {id}: {e}");
                if let Some(tx) = clients.get(&id) {
                    let _ = tx.send(e.to_message());
                }
            }
            Event::Inbound(id, Inbound::Closed) => {
                log::debug!("client {id} closed");
                clients.remove(&id);
                core.disconnect(id);
            }
            Event::Shutdown => break,
        }
    }
}

fn dispatch(core: &CadCore, clients: &BTreeMap<ClientId, Sender<Message>>, o: Outgoing) {
    let wanted = |id: ClientId| match o.to {
        Target::One(t) => t == id,
        Target::All => core.role(id).is_some(),
        Target::Vh => core.role(id) == Some(Role::VhServer),
        Target::Clients => core.role(id).is_some_and(|r| r != Role::VhServer),
    };
    for (&id, tx) in clients {
        if wanted(id) {
            let _ = tx.send(o.msg.clone());
        }
    }
}
