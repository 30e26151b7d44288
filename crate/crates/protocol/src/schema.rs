//! Structural validation of message payloads, run on the raw JSON before
//! typed decoding so errors can name the offending field.

use serde_json::{Map, Value};
use vrcad_core::FaceRole;

use crate::error::ProtocolError;
use crate::message::MessageType;

#[derive(Debug, Clone, Copy)]
enum Kind {
    UInt,
    Number,
    Str,
    Role,
    Position,
    Numbers,
    Tag,
    Tags,
    Params,
    Candidates,
}

struct Field {
    name: &'static str,
    kind: Kind,
    required: bool,
}

const fn req(name: &'static str, kind: Kind) -> Field {
    Field {
        name,
        kind,
        required: true,
    }
}

const fn opt(name: &'static str, kind: Kind) -> Field {
    Field {
        name,
        kind,
        required: false,
    }
}

const SNAPSHOT: &[Field] = &[
    req("revision", Kind::UInt),
    req("objText", Kind::Str),
    req("parameters", Kind::Params),
];

fn fields(ty: MessageType) -> &'static [Field] {
    use Kind::*;
    match ty {
        MessageType::Hello => const { &[req("role", Role), opt("name", Str)] },
        MessageType::Welcome => const { &[req("sessionId", UInt), req("server", Str)] },
        MessageType::LoadModel => const { &[req("modelText", Str)] },
        MessageType::ModelLoaded | MessageType::ModelUpdated => SNAPSHOT,
        MessageType::SelectFace => const { &[req("faceTag", Tag)] },
        MessageType::ParameterSelected => {
            const {
                &[
                    req("param", Str),
                    req("setId", UInt),
                    req("values", Numbers),
                    req("faceTag", Tag),
                ]
            }
        }
        MessageType::CandidateSet => {
            const {
                &[
                    req("setId", UInt),
                    req("param", Str),
                    req("baseValue", Number),
                    req("faceTag", Tag),
                    req("handleTags", Tags),
                    req("candidates", Candidates),
                ]
            }
        }
        MessageType::HandUpdate => const { &[req("seq", UInt), req("position", Position), req("timestampMs", UInt)] },
        MessageType::ActiveCandidate => const { &[req("setId", UInt), req("candidateId", UInt), opt("handSeq", UInt)] },
        MessageType::CommitRequest => const { &[req("setId", UInt), req("candidateId", UInt)] },
        MessageType::ReleaseSelection => const { &[opt("setId", UInt)] },
        MessageType::Error => const { &[req("code", Str), req("message", Str)] },
        MessageType::StatsRequest => const { &[] },
        MessageType::Stats => {
            const {
                &[
                    req("ticks", UInt),
                    req("ticksPerSecond", Number),
                    req("distanceQueryMicrosP50", Number),
                    req("distanceQueryMicrosP95", Number),
                    req("activeSwitchCount", UInt),
                    req("handUpdates", UInt),
                    req("droppedHandUpdates", UInt),
                ]
            }
        }
    }
}

fn is_number(v: &Value) -> bool {
    v.as_f64().is_some_and(f64::is_finite)
}

fn check_tag(v: &Value, at: &str, errs: &mut Vec<String>) {
    let Some(obj) = v.as_object() else {
        errs.push(format!("{at}: expected object {{featureId, role}}"));
        return;
    };
    match obj.get("featureId") {
        Some(Value::String(s)) if !s.is_empty() => {}
        Some(_) => errs.push(format!("{at}.featureId: expected non-empty string")),
        None => errs.push(format!("{at}.featureId: missing")),
    }
    match obj.get("role") {
        Some(Value::String(s)) if s.parse::<FaceRole>().is_ok() => {}
        Some(_) => errs.push(format!("{at}.role: expected cap_start, cap_end or side_<i>")),
        None => errs.push(format!("{at}.role: missing")),
    }
    for k in obj.keys() {
        if k != "featureId" && k != "role" {
            errs.push(format!("{at}: unknown field '{k}'"));
        }
    }
}

fn check(kind: Kind, v: &Value, at: &str, errs: &mut Vec<String>) {
    match kind {
        Kind::UInt => {
            if v.as_u64().is_none() {
                errs.push(format!("{at}: expected non-negative integer"));
            }
        }
        Kind::Number => {
            if !is_number(v) {
                errs.push(format!("{at}: expected number"));
            }
        }
        Kind::Str => {
            if !v.is_string() {
                errs.push(format!("{at}: expected string"));
            }
        }
        Kind::Role => {
            if !matches!(v.as_str(), Some("viewer" | "vh-server" | "hand-source")) {
                errs.push(format!("{at}: expected viewer, vh-server or hand-source"));
            }
        }
        Kind::Position => match v.as_array() {
            Some(a) if a.len() == 3 && a.iter().all(is_number) => {}
            _ => errs.push(format!("{at}: expected [x, y, z]")),
        },
        Kind::Numbers => match v.as_array() {
            Some(a) if a.iter().all(is_number) => {}
            _ => errs.push(format!("{at}: expected array of numbers")),
        },
        Kind::Tag => check_tag(v, at, errs),
        Kind::Tags => match v.as_array() {
            Some(a) => {
                for (i, t) in a.iter().enumerate() {
                    check_tag(t, &format!("{at}[{i}]"), errs);
                }
            }
            None => errs.push(format!("{at}: expected array")),
        },
        Kind::Params => match v.as_array() {
            Some(a) => {
                for (i, p) in a.iter().enumerate() {
                    let at = format!("{at}[{i}]");
                    let Some(o) = p.as_object() else {
                        errs.push(format!("{at}: expected object"));
                        continue;
                    };
                    check_object(
                        o,
                        &[req("name", Kind::Str), req("value", Kind::Number)],
                        &["driven"],
                        &at,
                        errs,
                    );
                    if !o.get("driven").is_some_and(Value::is_boolean) {
                        errs.push(format!("{at}.driven: expected boolean"));
                    }
                }
            }
            None => errs.push(format!("{at}: expected array")),
        },
        Kind::Candidates => match v.as_array() {
            Some(a) => {
                for (i, c) in a.iter().enumerate() {
                    let at = format!("{at}[{i}]");
                    let Some(o) = c.as_object() else {
                        errs.push(format!("{at}: expected object"));
                        continue;
                    };
                    check_object(
                        o,
                        &[
                            req("id", Kind::UInt),
                            req("value", Kind::Number),
                            opt("objText", Kind::Str),
                            opt("objPath", Kind::Str),
                        ],
                        &[],
                        &at,
                        errs,
                    );
                    match (o.contains_key("objText"), o.contains_key("objPath")) {
                        (true, true) => errs.push(format!("{at}: exclusive fields objText and objPath")),
                        (false, false) => errs.push(format!("{at}: one of objText or objPath is required")),
                        _ => {}
                    }
                }
            }
            None => errs.push(format!("{at}: expected array")),
        },
    }
}

fn check_object(obj: &Map<String, Value>, table: &[Field], extra: &[&str], at: &str, errs: &mut Vec<String>) {
    for f in table {
        let path = if at.is_empty() {
            f.name.to_string()
        } else {
            format!("{at}.{}", f.name)
        };
        match obj.get(f.name) {
            Some(v) => check(f.kind, v, &path, errs),
            None if f.required => errs.push(format!("{path}: missing")),
            None => {}
        }
    }
    for k in obj.keys() {
        if !table.iter().any(|f| f.name == k) && !extra.contains(&k.as_str()) {
            let path = if at.is_empty() { k.clone() } else { format!("{at}.{k}") };
            errs.push(format!("{path}: unknown field"));
        }
    }
}

/// Checks a payload (the message object minus `type` and
/// `protocolVersion`) against the schema of `ty`.
pub fn validate_payload(ty: &str, payload: &Map<String, Value>) -> Result<MessageType, ProtocolError> {
    let kind = MessageType::from_name(ty).ok_or_else(|| ProtocolError::UnknownType(ty.to_string()))?;
    let table = fields(kind);
    // a missing top-level field gets its own error kind
    if let Some(f) = table.iter().find(|f| f.required && !payload.contains_key(f.name)) {
        return Err(ProtocolError::MissingField {
            message_type: ty.to_string(),
            field: f.name.to_string(),
        });
    }
    let mut errs = Vec::new();
    check_object(payload, table, &[], "", &mut errs);
    if errs.is_empty() {
        Ok(kind)
    } else {
        Err(ProtocolError::Schema {
            message_type: ty.to_string(),
            errors: errs,
        })
    }
}
