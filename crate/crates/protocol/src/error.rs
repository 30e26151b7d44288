use thiserror::Error;

use crate::message::{Message, MessageType};
use crate::session::SessionState;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("frame of {len} bytes exceeds the 64 MiB limit")]
    Oversize { len: u64 },
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("unknown message type '{0}'")]
    UnknownType(String),
    #[error("{message_type}: missing field '{field}'")]
    MissingField { message_type: String, field: String },
    #[error("{message_type}: {}", errors.join("; "))]
    Schema { message_type: String, errors: Vec<String> },
    #[error("protocol version {got} not supported (expected {expected})")]
    VersionMismatch { got: u64, expected: u64 },
    #[error("{message} not allowed in state {state}")]
    BadState { state: SessionState, message: MessageType },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("websocket: {0}")]
    WebSocket(String),
}

impl ProtocolError {
    pub fn code(&self) -> &'static str {
        match self {
            ProtocolError::Oversize { .. } => "oversize",
            ProtocolError::Malformed(_) => "malformed",
            ProtocolError::UnknownType(_) => "unknown_type",
            ProtocolError::MissingField { .. } => "missing_field",
            ProtocolError::Schema { .. } => "schema",
            ProtocolError::VersionMismatch { .. } => "version_mismatch",
            ProtocolError::BadState { .. } => "bad_state",
            ProtocolError::Io(_) | ProtocolError::WebSocket(_) => "transport",
        }
    }

    /// The `error` message to send back to the peer.
    pub fn to_message(&self) -> Message {
        Message::error(self.code(), self.to_string())
    }
}
