//! Candidate shapes for one selected parameter, and nearest-candidate
//! selection against a hand position.
//!
//! Selecting a face resolves to a free parameter. The parameter is swept
//! over a few discrete offsets around its current value; every swept value
//! is regenerated and tessellated up front, so following the hand only needs
//! distance queries.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bvh::Bvh;
use crate::distance::{point_mesh_distance, DistanceResult};
use crate::geom::Vec3;
use crate::mesh::{TagFilter, TriMesh};
use crate::model::{Model, ModelError};
use crate::tag::FaceTag;
use crate::{model_mesh, BuildError};

/// Sweep half-width used when none is configured.
pub const DEFAULT_SWEEP_STEPS: usize = 5;

/// `{v0 + k·delta : k ∈ [-steps, steps]}` clamped to `[min, max]`,
/// deduplicated and ascending. Always contains `v0`.
pub fn sweep_values(v0: f64, delta: f64, steps: usize, min: f64, max: f64) -> Vec<f64> {
    let k = steps as i64;
    let mut out: Vec<f64> = (-k..=k)
        .map(|i| {
            if i == 0 {
                v0
            } else {
                (v0 + i as f64 * delta).clamp(min, max)
            }
        })
        .collect();
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceScope {
    /// Only faces bound to the selected parameter.
    #[default]
    Handle,
    /// Every triangle of the candidate.
    Full,
}

impl std::str::FromStr for DistanceScope {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "handle" => Ok(DistanceScope::Handle),
            "full" => Ok(DistanceScope::Full),
            _ => Err(format!("unknown distance scope '{s}' (expected handle or full)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Candidate {
    pub id: usize,
    pub value: f64,
    pub mesh: TriMesh,
    pub bvh: Bvh,
    handle: TagFilter,
}

impl Candidate {
    pub fn new(id: usize, value: f64, mesh: TriMesh, handle_tags: &[FaceTag]) -> Option<Candidate> {
        let bvh = Bvh::build(&mesh)?;
        let handle = TagFilter::new(&mesh, handle_tags);
        Some(Candidate {
            id,
            value,
            mesh,
            bvh,
            handle,
        })
    }

    pub fn handle_filter(&self) -> &TagFilter {
        &self.handle
    }

    /// Distance from `hand` under `scope`; `None` when the handle faces are
    /// absent from this candidate.
    pub fn distance(&self, hand: Vec3, scope: DistanceScope) -> Option<DistanceResult> {
        let filter = match scope {
            DistanceScope::Handle => Some(&self.handle),
            DistanceScope::Full => None,
        };
        point_mesh_distance(hand, &self.mesh, &self.bvh, filter).ok()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DroppedValue {
    pub value: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProposalError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("sweep of '{param}' collapsed to {survivors} candidate(s)")]
    SweepCollapsed { param: String, survivors: usize },
    #[error("handle vanished from every candidate")]
    HandleVanished,
    #[error("no candidate with id {0}")]
    UnknownCandidate(usize),
    #[error("candidate values must be strictly ascending")]
    Unordered,
}

impl ProposalError {
    pub fn code(&self) -> &'static str {
        match self {
            ProposalError::Model(e) => e.code(),
            ProposalError::SweepCollapsed { .. } => "sweep_collapsed",
            ProposalError::HandleVanished => "handle_vanished",
            ProposalError::UnknownCandidate(_) => "unknown_candidate",
            ProposalError::Unordered => "invalid_candidate_set",
        }
    }
}

/// Immutable family of candidate shapes for one parameter.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    pub set_id: u64,
    pub param: String,
    pub base_value: f64,
    pub face_tag: FaceTag,
    /// Faces whose selection resolves to `param`.
    pub handle_tags: Vec<FaceTag>,
    /// Ascending by value; `candidates[i].id == i`.
    pub candidates: Vec<Candidate>,
    pub model_revision: u64,
    pub diagnostics: Vec<DroppedValue>,
}

/// Active candidate and selection policy for one drag.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SelectionState {
    pub active: Option<usize>,
    /// A challenger must be closer than the active candidate by more than
    /// this (mm) before the selection switches.
    pub hysteresis_margin: f64,
    pub scope: DistanceScope,
}

impl SelectionState {
    pub fn new(hysteresis_margin: f64, scope: DistanceScope) -> Self {
        Self {
            active: None,
            hysteresis_margin,
            scope,
        }
    }
}

impl CandidateSet {
    /// Sweeps the parameter bound to `face_tag` and regenerates every value.
    /// Values whose regeneration fails are reported in `diagnostics`.
    pub fn build(model: &Model, face_tag: &FaceTag, steps: usize, set_id: u64) -> Result<CandidateSet, ProposalError> {
        let param = model.face_to_parameter(face_tag)?;
        let def = model.param(&param).expect("resolved parameter exists");
        Self::build_for_parameter(model, &param, def.value, face_tag, steps, set_id)
    }

    /// Like [`CandidateSet::build`] but centred on `center` instead of the
    /// parameter's current value.
    pub fn build_for_parameter(
        model: &Model,
        param: &str,
        center: f64,
        face_tag: &FaceTag,
        steps: usize,
        set_id: u64,
    ) -> Result<CandidateSet, ProposalError> {
        let def = model
            .param(param)
            .ok_or_else(|| ModelError::UnknownParameter(param.to_string()))?;
        if def.driven {
            return Err(ModelError::ParameterDriven(param.to_string()).into());
        }
        let handle_tags = model.handle_tags(param);
        let mut candidates = Vec::new();
        let mut diagnostics = Vec::new();
        for value in sweep_values(center, def.delta, steps, def.min, def.max) {
            let name = format!("candidate_{}", candidates.len());
            let attempt = model
                .set_parameter(param, value)
                .map_err(BuildError::from)
                .and_then(|m| model_mesh(&m, &name))
                .map_err(|e| e.to_string());
            match attempt {
                Ok(mesh) => match Candidate::new(candidates.len(), value, mesh, &handle_tags) {
                    Some(c) => candidates.push(c),
                    None => diagnostics.push(DroppedValue {
                        value,
                        reason: "empty mesh".into(),
                    }),
                },
                Err(reason) => diagnostics.push(DroppedValue { value, reason }),
            }
        }
        if candidates.len() < 2 {
            return Err(ProposalError::SweepCollapsed {
                param: param.to_string(),
                survivors: candidates.len(),
            });
        }
        Ok(CandidateSet {
            set_id,
            param: param.to_string(),
            base_value: center,
            face_tag: face_tag.clone(),
            handle_tags,
            candidates,
            model_revision: model.revision,
            diagnostics,
        })
    }

    /// Assembles a set from already tessellated meshes, e.g. received over
    /// the wire. Values must be strictly ascending.
    pub fn from_meshes(
        set_id: u64,
        param: &str,
        base_value: f64,
        face_tag: FaceTag,
        handle_tags: Vec<FaceTag>,
        meshes: Vec<(f64, TriMesh)>,
    ) -> Result<CandidateSet, ProposalError> {
        if meshes
            .windows(2)
            .any(|w| w[0].0.partial_cmp(&w[1].0) != Some(Ordering::Less))
        {
            return Err(ProposalError::Unordered);
        }
        let mut candidates = Vec::with_capacity(meshes.len());
        for (value, mesh) in meshes {
            let c =
                Candidate::new(candidates.len(), value, mesh, &handle_tags).ok_or(ProposalError::SweepCollapsed {
                    param: param.to_string(),
                    survivors: candidates.len(),
                })?;
            candidates.push(c);
        }
        if candidates.len() < 2 {
            return Err(ProposalError::SweepCollapsed {
                param: param.to_string(),
                survivors: candidates.len(),
            });
        }
        Ok(CandidateSet {
            set_id,
            param: param.to_string(),
            base_value,
            face_tag,
            handle_tags,
            candidates,
            model_revision: 0,
            diagnostics: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn values(&self) -> Vec<f64> {
        self.candidates.iter().map(|c| c.value).collect()
    }

    /// Id of the candidate carrying the base value, if it survived.
    pub fn base_candidate(&self) -> Option<usize> {
        self.candidates.iter().position(|c| c.value == self.base_value)
    }

    pub fn is_extreme(&self, id: usize) -> bool {
        id == 0 || id + 1 == self.candidates.len()
    }

    /// Per-candidate distances under `scope`, `None` where the handle vanished.
    pub fn distances(&self, hand: Vec3, scope: DistanceScope) -> Vec<Option<f64>> {
        self.candidates
            .iter()
            .map(|c| c.distance(hand, scope).map(|r| r.distance))
            .collect()
    }

    /// Nearest candidate to `hand`. Exact ties go to the lower id. With a
    /// positive margin the active candidate is kept unless a challenger is
    /// closer by more than the margin.
    pub fn select_nearest(&self, hand: Vec3, state: &SelectionState) -> Result<usize, ProposalError> {
        let d = self.distances(hand, state.scope);
        let mut best: Option<(usize, f64)> = None;
        for (id, dist) in d.iter().enumerate() {
            if let Some(dist) = *dist {
                if best.is_none_or(|(_, b)| dist < b) {
                    best = Some((id, dist));
                }
            }
        }
        let (best_id, best_d) = best.ok_or(ProposalError::HandleVanished)?;
        if state.hysteresis_margin <= 0.0 {
            return Ok(best_id);
        }
        match state.active.and_then(|a| d.get(a).copied().flatten().map(|da| (a, da))) {
            Some((a, da)) if best_d.partial_cmp(&(da - state.hysteresis_margin)) != Some(Ordering::Less) => Ok(a),
            _ => Ok(best_id),
        }
    }

    /// Value to write back for `candidate_id`.
    pub fn commit_value(&self, candidate_id: usize) -> Result<f64, ProposalError> {
        self.candidates
            .get(candidate_id)
            .map(|c| c.value)
            .ok_or(ProposalError::UnknownCandidate(candidate_id))
    }
}
