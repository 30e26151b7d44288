//! Session state machine for one edit interaction:
//! select a face, drag, then commit or release.

use std::fmt;

use crate::error::ProtocolError;
use crate::message::{Message, MessageType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum SessionState {
    #[default]
    Idle,
    Selected,
    Dragging,
    Committing,
}

impl SessionState {
    pub const ALL: [SessionState; 4] = [
        SessionState::Idle,
        SessionState::Selected,
        SessionState::Dragging,
        SessionState::Committing,
    ];
}

impl fmt::Display for SessionState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SessionState::Idle => "idle",
            SessionState::Selected => "selected",
            SessionState::Dragging => "dragging",
            SessionState::Committing => "committing",
        })
    }
}

/// Next state for `msg` arriving in `state`, or `None` if the pair is
/// illegal. Messages outside the session (stats) never change state.
pub fn transition(state: SessionState, msg: MessageType) -> Option<SessionState> {
    use MessageType as M;
    use SessionState::*;
    match (state, msg) {
        (s, M::Hello | M::Welcome | M::StatsRequest | M::Stats) => Some(s),
        (Idle, M::LoadModel | M::ModelLoaded | M::SelectFace) => Some(Idle),
        (Idle, M::ParameterSelected) => Some(Selected),
        (Selected | Dragging, M::CandidateSet | M::ActiveCandidate) => Some(state),
        (Selected | Dragging, M::HandUpdate) => Some(Dragging),
        (Selected | Dragging, M::CommitRequest) => Some(Committing),
        (Committing, M::ModelUpdated) => Some(Idle),
        (_, M::ReleaseSelection | M::Error) => Some(Idle),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Advance {
    /// The message was legal; `from` → `to`.
    Accepted { from: SessionState, to: SessionState },
    /// The message names a superseded or finished candidate set and was
    /// dropped without effect.
    Stale { set_id: u64 },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Session {
    pub state: SessionState,
    /// Candidate set the current drag is bound to.
    pub bound_set_id: Option<u64>,
    newest_set_id: Option<u64>,
    /// Sets up to and including this id were committed or released.
    retired_through: Option<u64>,
}

impl Session {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn newest_set_id(&self) -> Option<u64> {
        self.newest_set_id
    }

    /// True when `set_id` is older than the newest announced set or
    /// belongs to a finished interaction.
    pub fn is_stale(&self, set_id: u64) -> bool {
        self.newest_set_id.is_some_and(|n| set_id < n) || self.retired_through.is_some_and(|r| set_id <= r)
    }

    fn retire(&mut self) {
        if let Some(b) = self.bound_set_id.take().or(self.newest_set_id) {
            self.retired_through = Some(self.retired_through.map_or(b, |r| r.max(b)));
        }
    }

    /// Applies `msg`. Illegal messages yield `BadState` and leave the
    /// session untouched; stale ones are reported and ignored.
    pub fn advance(&mut self, msg: &Message) -> Result<Advance, ProtocolError> {
        let kind = msg.kind();
        if let Some(id) = msg.set_id() {
            // a fresh set only ever arrives as parameter_selected or candidate_set
            let announces = matches!(kind, MessageType::ParameterSelected | MessageType::CandidateSet);
            if self.is_stale(id) || (!announces && self.newest_set_id.is_some_and(|n| id > n)) {
                return Ok(Advance::Stale { set_id: id });
            }
        }
        let from = self.state;
        let to = transition(from, kind).ok_or(ProtocolError::BadState {
            state: from,
            message: kind,
        })?;
        match msg {
            Message::ParameterSelected(m) => {
                self.bound_set_id = Some(m.set_id);
                self.newest_set_id = Some(m.set_id);
            }
            Message::CandidateSet(m) => {
                // a newer set (re-centred sweep) rebinds the drag
                self.bound_set_id = Some(m.set_id);
                self.newest_set_id = Some(m.set_id);
            }
            _ => {}
        }
        if to == SessionState::Idle && from != SessionState::Idle {
            self.retire();
        }
        self.state = to;
        Ok(Advance::Accepted { from, to })
    }
}
