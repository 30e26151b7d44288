//! Trajectory scripts: a line-oriented record of one scripted session.
//!
//! ```text
//! # comment
//! select f2 cap_end
//! hand 0 15 10 10.1      # t_ms x y z
//! commit
//! release
//! ```

use std::fmt;
use std::str::FromStr;

use vrcad_core::{FaceRole, FaceTag, Vec3};

#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    Select(FaceTag),
    Hand { t_ms: u64, position: Vec3 },
    Commit,
    Release,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    /// 1-based source line.
    pub line: usize,
    pub step: Step,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ScriptError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for ScriptError {}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Script {
    pub events: Vec<Event>,
}

fn number<T: FromStr>(tok: &str, what: &str, line: usize) -> Result<T, ScriptError> {
    tok.parse().map_err(|_| ScriptError {
        line,
        message: format!("bad {what} '{tok}'"),
    })
}

impl Script {
    /// Parses and checks ordering: non-decreasing times, hand events and
    /// commit/release only inside a selection, one selection at a time.
    pub fn parse(text: &str) -> Result<Script, ScriptError> {
        let mut events = Vec::new();
        let mut selected = false;
        let mut last_t: Option<u64> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |message: String| ScriptError { line, message };
            let toks: Vec<&str> = content.split_whitespace().collect();
            let step = match toks[0] {
                "select" => {
                    let [_, feature, role] = toks[..] else {
                        return Err(err("expected: select <featureId> <role>".into()));
                    };
                    let role: FaceRole = role.parse().map_err(|e| err(format!("{e}")))?;
                    if selected {
                        return Err(err(
                            "select while a selection is active (release or commit first)".into()
                        ));
                    }
                    selected = true;
                    Step::Select(FaceTag::new(feature, role))
                }
                "hand" => {
                    let [_, t, x, y, z] = toks[..] else {
                        return Err(err("expected: hand <t_ms> <x> <y> <z>".into()));
                    };
                    let t_ms: u64 = number(t, "time", line)?;
                    let p = Vec3::new(number(x, "x", line)?, number(y, "y", line)?, number(z, "z", line)?);
                    if !p.is_finite() {
                        return Err(err("hand position must be finite".into()));
                    }
                    if !selected {
                        return Err(err("hand event before select".into()));
                    }
                    if last_t.is_some_and(|l| t_ms < l) {
                        return Err(err(format!("time {t_ms} goes backwards")));
                    }
                    last_t = Some(t_ms);
                    Step::Hand { t_ms, position: p }
                }
                "commit" | "release" => {
                    if toks.len() != 1 {
                        return Err(err(format!("{} takes no arguments", toks[0])));
                    }
                    if !selected {
                        return Err(err(format!("{} before select", toks[0])));
                    }
                    selected = false;
                    if toks[0] == "commit" {
                        Step::Commit
                    } else {
                        Step::Release
                    }
                }
                other => return Err(err(format!("unknown event '{other}'"))),
            };
            events.push(Event { line, step });
        }
        Ok(Script { events })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_events_and_comments() {
        let s = Script::parse("# pull\nselect f2 cap_end\n\nhand 0 1 2 3.5 # start\nhand 0 1 2 4\ncommit\n").unwrap();
        assert_eq!(s.events.len(), 4);
        assert_eq!(s.events[1].line, 4);
        assert_eq!(
            s.events[1].step,
            Step::Hand {
                t_ms: 0,
                position: Vec3::new(1.0, 2.0, 3.5)
            }
        );
    }

    #[test]
    fn ordering_errors_carry_line_numbers() {
        let e = Script::parse("commit\n").unwrap_err();
        assert_eq!(e.line, 1);
        let e = Script::parse("# x\nhand 0 0 0 0\n").unwrap_err();
        assert_eq!(e.line, 2);
        let e = Script::parse("select f2 cap_end\nhand 5 0 0 0\nhand 4 0 0 0\n").unwrap_err();
        assert_eq!(e.line, 3);
        let e = Script::parse("select f2 cap_end\nselect f2 cap_end\n").unwrap_err();
        assert_eq!(e.line, 2);
        let e = Script::parse("select f2 lid\n").unwrap_err();
        assert_eq!(e.line, 1);
        let e = Script::parse("select f2 cap_end\nhand 1 a 0 0\n").unwrap_err();
        assert_eq!(e.line, 2);
        assert!(Script::parse("select f2 cap_end\nrelease\nselect f2 cap_end\ncommit\n").is_ok());
    }
}
