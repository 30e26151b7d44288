//! Random well-formed messages for round-trip testing.

use rand::seq::SliceRandom;
use rand::Rng;
use vrcad_core::{FaceRole, FaceTag};

use crate::message::*;

fn text<R: Rng>(rng: &mut R) -> String {
    const PIECES: &[&str] = &[
        "a", "Z", "0", " ", "_", "\"", "\\", "\n", "\t", "é", "→", "𝄞", "{", "]", "\u{0}", "\u{1f}", "v 1 2 3",
    ];
    let n = rng.gen_range(0..12);
    (0..n).map(|_| *PIECES.choose(rng).unwrap()).collect()
}

fn ident<R: Rng>(rng: &mut R) -> String {
    let n = rng.gen_range(1..8);
    let mut s = String::from("p");
    for _ in 0..n {
        s.push(*b"abcxyz_019".choose(rng).unwrap() as char);
    }
    s
}

fn real<R: Rng>(rng: &mut R) -> f64 {
    match rng.gen_range(0..6) {
        0 => 0.0,
        1 => -0.0,
        2 => rng.gen_range(-1e3..1e3),
        3 => rng.gen_range(-1.0..1.0) * 10f64.powi(rng.gen_range(-300..300)),
        4 => f64::from_bits(rng.gen::<u64>() & !(0x7ff << 52) | (rng.gen_range(1u64..0x7fe) << 52)),
        _ => rng.gen_range(-100i32..100) as f64 * 0.1,
    }
}

fn uint<R: Rng>(rng: &mut R) -> u64 {
    if rng.gen_bool(0.2) {
        rng.gen()
    } else {
        rng.gen_range(0..10_000)
    }
}

fn tag<R: Rng>(rng: &mut R) -> FaceTag {
    let role = match rng.gen_range(0..3) {
        0 => FaceRole::CapStart,
        1 => FaceRole::CapEnd,
        _ => FaceRole::Side(rng.gen_range(0..200)),
    };
    FaceTag::new(format!("f{}", rng.gen_range(0..50)), role)
}

fn params<R: Rng>(rng: &mut R) -> Vec<ParamValue> {
    (0..rng.gen_range(0..5))
        .map(|_| ParamValue {
            name: ident(rng),
            value: real(rng),
            driven: rng.gen(),
        })
        .collect()
}

fn snapshot<R: Rng>(rng: &mut R) -> ModelSnapshot {
    ModelSnapshot {
        revision: uint(rng),
        obj_text: text(rng),
        parameters: params(rng),
    }
}

fn maybe<R: Rng, T>(rng: &mut R, f: impl FnOnce(&mut R) -> T) -> Option<T> {
    if rng.gen() {
        Some(f(rng))
    } else {
        None
    }
}

/// A random valid message of type `ty`.
pub fn random_message<R: Rng>(rng: &mut R, ty: MessageType) -> Message {
    match ty {
        MessageType::Hello => Message::Hello(Hello {
            role: *[Role::Viewer, Role::VhServer, Role::HandSource].choose(rng).unwrap(),
            name: maybe(rng, text),
        }),
        MessageType::Welcome => Message::Welcome(Welcome {
            session_id: uint(rng),
            server: text(rng),
        }),
        MessageType::LoadModel => Message::LoadModel(LoadModel { model_text: text(rng) }),
        MessageType::ModelLoaded => Message::ModelLoaded(snapshot(rng)),
        MessageType::SelectFace => Message::SelectFace(SelectFace { face_tag: tag(rng) }),
        MessageType::ParameterSelected => Message::ParameterSelected(ParameterSelected {
            param: ident(rng),
            set_id: uint(rng),
            values: (0..rng.gen_range(0..12)).map(|_| real(rng)).collect(),
            face_tag: tag(rng),
        }),
        MessageType::CandidateSet => Message::CandidateSet(CandidateSetMsg {
            set_id: uint(rng),
            param: ident(rng),
            base_value: real(rng),
            face_tag: tag(rng),
            handle_tags: (0..rng.gen_range(0..4)).map(|_| tag(rng)).collect(),
            candidates: (0..rng.gen_range(0..6))
                .map(|i| CandidateMesh {
                    id: i,
                    value: real(rng),
                    mesh: if rng.gen() {
                        MeshSource::ObjText(text(rng))
                    } else {
                        MeshSource::ObjPath(text(rng))
                    },
                })
                .collect(),
        }),
        MessageType::HandUpdate => Message::HandUpdate(HandUpdate {
            seq: uint(rng),
            position: [real(rng), real(rng), real(rng)],
            timestamp_ms: uint(rng),
        }),
        MessageType::ActiveCandidate => Message::ActiveCandidate(ActiveCandidate {
            set_id: uint(rng),
            candidate_id: uint(rng),
            hand_seq: maybe(rng, uint),
        }),
        MessageType::CommitRequest => Message::CommitRequest(CommitRequest {
            set_id: uint(rng),
            candidate_id: uint(rng),
        }),
        MessageType::ModelUpdated => Message::ModelUpdated(snapshot(rng)),
        MessageType::ReleaseSelection => Message::ReleaseSelection(ReleaseSelection {
            set_id: maybe(rng, uint),
        }),
        MessageType::Error => Message::Error(ErrorMsg {
            code: ident(rng),
            message: text(rng),
        }),
        MessageType::StatsRequest => Message::StatsRequest(StatsRequest {}),
        MessageType::Stats => Message::Stats(LoopStats {
            ticks: uint(rng),
            ticks_per_second: real(rng),
            distance_query_micros_p50: real(rng),
            distance_query_micros_p95: real(rng),
            active_switch_count: uint(rng),
            hand_updates: uint(rng),
            dropped_hand_updates: uint(rng),
        }),
    }
}
