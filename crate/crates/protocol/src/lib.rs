//! Wire protocol shared by the CAD server, the VH server and clients.
//!
//! Messages are JSON objects tagged by `type`. Over TCP each message is a
//! 4-byte big-endian length followed by the JSON bytes; over WebSocket each
//! message is one text frame. See `docs/protocol.md` for examples.

pub mod codec;
#[cfg(feature = "corpus")]
pub mod corpus;
pub mod error;
pub mod message;
pub mod schema;
pub mod session;
pub mod transport;

pub use codec::{
    decode_frame, decode_json, encode_frame, encode_json, read_frame, write_frame, FrameRead, MAX_FRAME_LEN,
};
pub use error::ProtocolError;
pub use message::*;
pub use schema::validate_payload;
pub use session::{transition, Advance, Session, SessionState};
pub use transport::{Connection, Inbound};
