//! Parametric extrusion kernel with tagged tessellation and candidate-shape
//! proposal.
//!
//! A [`Model`] holds parameters, constraint expressions and an ordered list
//! of sketch/extrude features. Regeneration yields planar faces tagged with
//! their feature and role; tessellation keeps those tags per triangle. A
//! picked face resolves to a free parameter, which [`CandidateSet`] sweeps
//! into a family of shapes that can be ranked against a hand position.

pub mod bvh;
pub mod distance;
pub mod expr;
pub mod geom;
pub mod mesh;
pub mod model;
pub mod obj;
pub mod proposal;
pub mod tag;
pub mod triangulate;

pub use bvh::Bvh;
pub use distance::{brute_force_distance, point_mesh_distance, DistanceError, DistanceResult};
pub use expr::{parse_expression, Expr};
pub use geom::Vec3;
pub use mesh::{tessellate, TagFilter, TriMesh};
pub use model::{BRep, Model, ModelError};
pub use obj::{import_obj, to_obj_string, ObjError};
pub use proposal::{sweep_values, CandidateSet, DistanceScope, SelectionState};
pub use tag::{FaceRole, FaceTag};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BuildError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Mesh(#[from] mesh::MeshError),
}

/// Regenerates and tessellates the whole model into one assembly mesh.
pub fn model_mesh(model: &Model, name: &str) -> Result<TriMesh, BuildError> {
    Ok(tessellate(&model.regenerate()?, name)?)
}
