//! JSON encoding and TCP length-prefixed framing.
//!
//! A TCP frame is a 4-byte big-endian payload length followed by that many
//! bytes of UTF-8 JSON. WebSocket transports send the same JSON as one text
//! frame per message.

use std::io::{self, Read, Write};

use serde_json::{Map, Value};

use crate::error::ProtocolError;
use crate::message::{Message, PROTOCOL_VERSION};
use crate::schema::validate_payload;

pub const MAX_FRAME_LEN: u64 = 64 * 1024 * 1024;

/// JSON object for `msg` with `type` and `protocolVersion` first.
pub fn to_value(msg: &Message) -> Result<Value, ProtocolError> {
    let Value::Object(mut body) = serde_json::to_value(msg).map_err(|e| ProtocolError::Malformed(e.to_string()))?
    else {
        unreachable!("messages serialize to objects");
    };
    let ty = body.shift_remove("type").expect("tagged enum");
    let mut out = Map::with_capacity(body.len() + 2);
    out.insert("type".into(), ty.clone());
    out.insert("protocolVersion".into(), PROTOCOL_VERSION.into());
    // non-finite floats serialize as null and are caught here
    validate_payload(ty.as_str().unwrap_or_default(), &body)?;
    out.extend(body);
    Ok(Value::Object(out))
}

pub fn encode_json(msg: &Message) -> Result<String, ProtocolError> {
    Ok(to_value(msg)?.to_string())
}

pub fn from_value(value: Value) -> Result<Message, ProtocolError> {
    let Value::Object(mut obj) = value else {
        return Err(ProtocolError::Malformed("expected a JSON object".into()));
    };
    let ty = match obj.shift_remove("type") {
        Some(Value::String(s)) => s,
        Some(_) => return Err(ProtocolError::Malformed("'type' must be a string".into())),
        None => {
            return Err(ProtocolError::MissingField {
                message_type: "?".into(),
                field: "type".into(),
            })
        }
    };
    if crate::message::MessageType::from_name(&ty).is_none() {
        return Err(ProtocolError::UnknownType(ty));
    }
    match obj.shift_remove("protocolVersion") {
        Some(v) => match v.as_u64() {
            Some(PROTOCOL_VERSION) => {}
            Some(got) => {
                return Err(ProtocolError::VersionMismatch {
                    got,
                    expected: PROTOCOL_VERSION,
                })
            }
            None => return Err(ProtocolError::Malformed("'protocolVersion' must be an integer".into())),
        },
        None => {
            return Err(ProtocolError::MissingField {
                message_type: ty,
                field: "protocolVersion".into(),
            })
        }
    }
    validate_payload(&ty, &obj)?;
    obj.insert("type".into(), Value::String(ty));
    serde_json::from_value(Value::Object(obj)).map_err(|e| ProtocolError::Malformed(e.to_string()))
}

pub fn decode_json(text: &str) -> Result<Message, ProtocolError> {
    let value: Value = serde_json::from_str(text).map_err(|e| ProtocolError::Malformed(e.to_string()))?;
    from_value(value)
}

/// Length-prefixed frame for `msg`.
pub fn encode_frame(msg: &Message) -> Result<Vec<u8>, ProtocolError> {
    let json = encode_json(msg)?;
    let len = json.len() as u64;
    if len > MAX_FRAME_LEN {
        return Err(ProtocolError::Oversize { len });
    }
    let mut out = Vec::with_capacity(4 + json.len());
    out.extend_from_slice(&(len as u32).to_be_bytes());
    out.extend_from_slice(json.as_bytes());
    Ok(out)
}

/// Decodes one complete frame. Trailing bytes are an error.
pub fn decode_frame(frame: &[u8]) -> Result<Message, ProtocolError> {
    let Some((head, body)) = frame.split_first_chunk::<4>() else {
        return Err(ProtocolError::Malformed("frame shorter than its length prefix".into()));
    };
    let len = u32::from_be_bytes(*head) as u64;
    check_len(len)?;
    if body.len() as u64 != len {
        return Err(ProtocolError::Malformed(format!(
            "length prefix says {len} bytes, frame carries {}",
            body.len()
        )));
    }
    decode_body(body)
}

fn check_len(len: u64) -> Result<(), ProtocolError> {
    if len == 0 {
        return Err(ProtocolError::Malformed("zero-length frame".into()));
    }
    if len > MAX_FRAME_LEN {
        return Err(ProtocolError::Oversize { len });
    }
    Ok(())
}

fn decode_body(body: &[u8]) -> Result<Message, ProtocolError> {
    let text = std::str::from_utf8(body).map_err(|e| ProtocolError::Malformed(e.to_string()))?;
    decode_json(text)
}

/// Outcome of reading one frame from a stream.
#[derive(Debug)]
pub enum FrameRead {
    Message(Message),
    /// The frame was delimited correctly but its content is invalid; the
    /// stream is still in sync.
    Invalid(ProtocolError),
    /// Clean end of stream at a frame boundary.
    Eof,
}

/// Reads one frame. Errors returned here (I/O, oversize) leave the stream
/// out of sync and the connection should be closed.
pub fn read_frame<R: Read>(r: &mut R) -> Result<FrameRead, ProtocolError> {
    let mut head = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        match r.read(&mut head[got..]) {
            Ok(0) if got == 0 => return Ok(FrameRead::Eof),
            Ok(0) => return Err(io::Error::from(io::ErrorKind::UnexpectedEof).into()),
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    let len = u32::from_be_bytes(head) as u64;
    if len == 0 {
        return Ok(FrameRead::Invalid(ProtocolError::Malformed("zero-length frame".into())));
    }
    if len > MAX_FRAME_LEN {
        return Err(ProtocolError::Oversize { len });
    }
    let mut body = vec![0u8; len as usize];
    r.read_exact(&mut body)?;
    Ok(match decode_body(&body) {
        Ok(m) => FrameRead::Message(m),
        Err(e) => FrameRead::Invalid(e),
    })
}

pub fn write_frame<W: Write>(w: &mut W, msg: &Message) -> Result<(), ProtocolError> {
    w.write_all(&encode_frame(msg)?)?;
    Ok(())
}
