//! Message types. On the wire every message is a JSON object with a `type`
//! discriminator, `protocolVersion` and the payload fields in camelCase.

use serde::{Deserialize, Serialize};
use vrcad_core::FaceTag;

pub const PROTOCOL_VERSION: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Viewer,
    VhServer,
    HandSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Hello {
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Welcome {
    pub session_id: u64,
    pub server: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct LoadModel {
    pub model_text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ParamValue {
    pub name: String,
    pub value: f64,
    pub driven: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ModelSnapshot {
    pub revision: u64,
    pub obj_text: String,
    pub parameters: Vec<ParamValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SelectFace {
    pub face_tag: FaceTag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ParameterSelected {
    pub param: String,
    pub set_id: u64,
    pub values: Vec<f64>,
    pub face_tag: FaceTag,
}

/// Where a candidate's OBJ lives: inline or in the shared folder.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum MeshSource {
    ObjText(String),
    ObjPath(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CandidateMesh {
    pub id: u64,
    pub value: f64,
    #[serde(flatten)]
    pub mesh: MeshSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct CandidateSetMsg {
    pub set_id: u64,
    pub param: String,
    pub base_value: f64,
    pub face_tag: FaceTag,
    pub handle_tags: Vec<FaceTag>,
    pub candidates: Vec<CandidateMesh>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct HandUpdate {
    pub seq: u64,
    /// Model space, mm.
    pub position: [f64; 3],
    pub timestamp_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ActiveCandidate {
    pub set_id: u64,
    pub candidate_id: u64,
    /// Seq of the hand update that produced this selection.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hand_seq: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct CommitRequest {
    pub set_id: u64,
    pub candidate_id: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ReleaseSelection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub set_id: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ErrorMsg {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct StatsRequest {}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct LoopStats {
    pub ticks: u64,
    pub ticks_per_second: f64,
    pub distance_query_micros_p50: f64,
    pub distance_query_micros_p95: f64,
    pub active_switch_count: u64,
    pub hand_updates: u64,
    pub dropped_hand_updates: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Message {
    Hello(Hello),
    Welcome(Welcome),
    LoadModel(LoadModel),
    ModelLoaded(ModelSnapshot),
    SelectFace(SelectFace),
    ParameterSelected(ParameterSelected),
    CandidateSet(CandidateSetMsg),
    HandUpdate(HandUpdate),
    ActiveCandidate(ActiveCandidate),
    CommitRequest(CommitRequest),
    ModelUpdated(ModelSnapshot),
    ReleaseSelection(ReleaseSelection),
    Error(ErrorMsg),
    StatsRequest(StatsRequest),
    Stats(LoopStats),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MessageType {
    Hello,
    Welcome,
    LoadModel,
    ModelLoaded,
    SelectFace,
    ParameterSelected,
    CandidateSet,
    HandUpdate,
    ActiveCandidate,
    CommitRequest,
    ModelUpdated,
    ReleaseSelection,
    Error,
    StatsRequest,
    Stats,
}

impl MessageType {
    /// The thirteen types that take part in the session state machine.
    pub const SESSION: [MessageType; 13] = [
        MessageType::Hello,
        MessageType::Welcome,
        MessageType::LoadModel,
        MessageType::ModelLoaded,
        MessageType::SelectFace,
        MessageType::ParameterSelected,
        MessageType::CandidateSet,
        MessageType::HandUpdate,
        MessageType::ActiveCandidate,
        MessageType::CommitRequest,
        MessageType::ModelUpdated,
        MessageType::ReleaseSelection,
        MessageType::Error,
    ];

    pub const ALL: [MessageType; 15] = [
        MessageType::Hello,
        MessageType::Welcome,
        MessageType::LoadModel,
        MessageType::ModelLoaded,
        MessageType::SelectFace,
        MessageType::ParameterSelected,
        MessageType::CandidateSet,
        MessageType::HandUpdate,
        MessageType::ActiveCandidate,
        MessageType::CommitRequest,
        MessageType::ModelUpdated,
        MessageType::ReleaseSelection,
        MessageType::Error,
        MessageType::StatsRequest,
        MessageType::Stats,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MessageType::Hello => "hello",
            MessageType::Welcome => "welcome",
            MessageType::LoadModel => "load_model",
            MessageType::ModelLoaded => "model_loaded",
            MessageType::SelectFace => "select_face",
            MessageType::ParameterSelected => "parameter_selected",
            MessageType::CandidateSet => "candidate_set",
            MessageType::HandUpdate => "hand_update",
            MessageType::ActiveCandidate => "active_candidate",
            MessageType::CommitRequest => "commit_request",
            MessageType::ModelUpdated => "model_updated",
            MessageType::ReleaseSelection => "release_selection",
            MessageType::Error => "error",
            MessageType::StatsRequest => "stats_request",
            MessageType::Stats => "stats",
        }
    }

    pub fn from_name(s: &str) -> Option<MessageType> {
        MessageType::ALL.into_iter().find(|t| t.as_str() == s)
    }
}

impl std::fmt::Display for MessageType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Message {
    pub fn kind(&self) -> MessageType {
        match self {
            Message::Hello(_) => MessageType::Hello,
            Message::Welcome(_) => MessageType::Welcome,
            Message::LoadModel(_) => MessageType::LoadModel,
            Message::ModelLoaded(_) => MessageType::ModelLoaded,
            Message::SelectFace(_) => MessageType::SelectFace,
            Message::ParameterSelected(_) => MessageType::ParameterSelected,
            Message::CandidateSet(_) => MessageType::CandidateSet,
            Message::HandUpdate(_) => MessageType::HandUpdate,
            Message::ActiveCandidate(_) => MessageType::ActiveCandidate,
            Message::CommitRequest(_) => MessageType::CommitRequest,
            Message::ModelUpdated(_) => MessageType::ModelUpdated,
            Message::ReleaseSelection(_) => MessageType::ReleaseSelection,
            Message::Error(_) => MessageType::Error,
            Message::StatsRequest(_) => MessageType::StatsRequest,
            Message::Stats(_) => MessageType::Stats,
        }
    }

    /// Candidate-set id carried by the message, if any.
    pub fn set_id(&self) -> Option<u64> {
        match self {
            Message::ParameterSelected(m) => Some(m.set_id),
            Message::CandidateSet(m) => Some(m.set_id),
            Message::ActiveCandidate(m) => Some(m.set_id),
            Message::CommitRequest(m) => Some(m.set_id),
            Message::ReleaseSelection(m) => m.set_id,
            _ => None,
        }
    }

    pub fn error(code: impl Into<String>, message: impl Into<String>) -> Message {
        Message::Error(ErrorMsg {
            code: code.into(),
            message: message.into(),
        })
    }
}
