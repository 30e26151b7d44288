//! Persistent face handles: a feature id plus the role of the face within
//! that feature. Tags survive regeneration, so a face picked on one shape
//! names the same surface on every swept variant.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Role of a face within an extrusion. Ordering is the emission order
/// used by regeneration: start cap, end cap, then sides by edge index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FaceRole {
    CapStart,
    CapEnd,
    Side(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid face role '{0}' (expected cap_start, cap_end or side_<n>)")]
pub struct RoleParseError(pub String);

impl fmt::Display for FaceRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FaceRole::CapStart => f.write_str("cap_start"),
            FaceRole::CapEnd => f.write_str("cap_end"),
            FaceRole::Side(i) => write!(f, "side_{i}"),
        }
    }
}

impl FromStr for FaceRole {
    type Err = RoleParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cap_start" => Ok(FaceRole::CapStart),
            "cap_end" => Ok(FaceRole::CapEnd),
            _ => {
                let idx = s
                    .strip_prefix("side_")
                    .filter(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()))
                    .filter(|d| d.len() == 1 || !d.starts_with('0'))
                    .and_then(|d| d.parse().ok())
                    .ok_or_else(|| RoleParseError(s.to_string()))?;
                Ok(FaceRole::Side(idx))
            }
        }
    }
}

impl Serialize for FaceRole {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FaceRole {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FaceTag {
    pub feature_id: String,
    pub role: FaceRole,
}

impl FaceTag {
    pub fn new(feature_id: impl Into<String>, role: FaceRole) -> Self {
        Self {
            feature_id: feature_id.into(),
            role,
        }
    }

    /// OBJ group name, `feature_<id>_<role>`.
    pub fn group_name(&self) -> String {
        format!("feature_{}_{}", self.feature_id, self.role)
    }

    /// Inverse of [`FaceTag::group_name`]. The role is matched as a suffix so
    /// feature ids may themselves contain underscores.
    pub fn from_group_name(name: &str) -> Option<FaceTag> {
        let rest = name.strip_prefix("feature_")?;
        for suffix in ["_cap_start", "_cap_end"] {
            if let Some(id) = rest.strip_suffix(suffix) {
                if !id.is_empty() {
                    return Some(FaceTag::new(id, suffix[1..].parse().ok()?));
                }
            }
        }
        let at = rest.rfind("_side_")?;
        let (id, role) = (&rest[..at], &rest[at + 1..]);
        if id.is_empty() {
            return None;
        }
        Some(FaceTag::new(id, role.parse().ok()?))
    }
}

impl fmt::Display for FaceTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.feature_id, self.role)
    }
}
