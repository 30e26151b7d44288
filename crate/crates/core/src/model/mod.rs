//! Constructive history: parameters, constraint expressions and the ordered
//! feature list that regenerates into tagged planar faces.

mod eval;
mod parse;
mod regen;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::expr::{EvalError, Expr, ParseError};
use crate::geom::Vec3;
use crate::tag::{FaceRole, FaceTag};

pub use eval::Valuation;
pub use regen::{BRep, BRepFace};

#[derive(Debug, Clone, PartialEq)]
pub struct ParamDef {
    pub name: String,
    /// Current value in model units. For driven parameters this is the last
    /// evaluation of the constraint.
    pub value: f64,
    pub min: f64,
    pub max: f64,
    /// Sweep offset used when proposing candidate shapes.
    pub delta: f64,
    pub driven: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub target: String,
    pub expr: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sketch {
    /// Closed CCW polygon, vertex coordinates as expressions.
    pub profile: Vec<[Expr; 2]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extrude {
    pub sketch: String,
    pub depth: Expr,
    pub origin: Vec3,
    pub bindings: BTreeMap<FaceRole, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureKind {
    Sketch(Sketch),
    Extrude(Extrude),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Feature {
    pub id: String,
    pub kind: FeatureKind,
}

/// A validated parametric model. Cheap to clone; every mutation returns a
/// new value.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub version: u32,
    pub units: String,
    /// Free parameters in document order, followed by driven parameters in
    /// constraint order.
    pub parameters: Vec<ParamDef>,
    pub constraints: Vec<Constraint>,
    pub features: Vec<Feature>,
    pub revision: u64,
    /// Constraint indices in dependency order.
    eval_order: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("{location}: {source}")]
    Expression {
        location: String,
        #[source]
        source: ParseError,
    },
    #[error("{location}: unknown parameter '{name}'")]
    UnknownReference { location: String, name: String },
    #[error("{location}: duplicate name '{name}'")]
    DuplicateName { location: String, name: String },
    #[error("{location}: invalid identifier '{name}'")]
    InvalidIdentifier { location: String, name: String },
    #[error("parameter '{0}' is both free and driven")]
    FreeAndDriven(String),
    #[error("parameter '{name}': {message}")]
    InvalidParameter { name: String, message: String },
    #[error("feature '{feature}': {message}")]
    InvalidFeature { feature: String, message: String },
    #[error("feature '{feature}': binding {role} targets driven parameter '{param}'")]
    BindingToDriven {
        feature: String,
        role: FaceRole,
        param: String,
    },
    #[error("constraint cycle through parameters [{}]", .0.join(", "))]
    Cycle(Vec<String>),
    #[error("{location}: {source}")]
    Evaluation {
        location: String,
        #[source]
        source: EvalError,
    },
    #[error("unknown parameter '{0}'")]
    UnknownParameter(String),
    #[error("parameter '{0}' is driven")]
    ParameterDriven(String),
    #[error("value {value} for parameter '{name}' outside [{min}, {max}]")]
    OutOfRange {
        name: String,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("feature '{feature}': profile is not a simple polygon")]
    NonSimpleProfile { feature: String },
    #[error("feature '{feature}': profile is clockwise (profiles must be CCW)")]
    ClockwiseProfile { feature: String },
    #[error("feature '{feature}': degenerate geometry: {reason}")]
    Degenerate { feature: String, reason: String },
    #[error("face {0} not selectable")]
    FaceNotSelectable(FaceTag),
    #[error("face {0} does not exist in the model")]
    UnknownFace(FaceTag),
}

impl ModelError {
    /// Short machine-readable code for wire error replies.
    pub fn code(&self) -> &'static str {
        match self {
            ModelError::FaceNotSelectable(_) | ModelError::UnknownFace(_) => "face_not_selectable",
            ModelError::ParameterDriven(_) => "parameter_driven",
            ModelError::OutOfRange { .. } => "out_of_range",
            ModelError::UnknownParameter(_) => "unknown_parameter",
            ModelError::Cycle(_) => "constraint_cycle",
            ModelError::NonSimpleProfile { .. }
            | ModelError::ClockwiseProfile { .. }
            | ModelError::Degenerate { .. }
            | ModelError::Evaluation { .. } => "regeneration_failed",
            _ => "invalid_model",
        }
    }
}

impl Model {
    pub fn param(&self, name: &str) -> Option<&ParamDef> {
        self.parameters.iter().find(|p| p.name == name)
    }

    pub fn feature(&self, id: &str) -> Option<&Feature> {
        self.features.iter().find(|f| f.id == id)
    }

    pub fn free_parameters(&self) -> impl Iterator<Item = &ParamDef> {
        self.parameters.iter().filter(|p| !p.driven)
    }

    pub fn driven_parameters(&self) -> impl Iterator<Item = &ParamDef> {
        self.parameters.iter().filter(|p| p.driven)
    }

    /// Constraint indices in the order they are evaluated.
    pub fn evaluation_order(&self) -> &[usize] {
        &self.eval_order
    }

    /// Extrusions paired with their sketch, in history order.
    pub fn extrusions(&self) -> impl Iterator<Item = (&str, &Extrude, &Sketch)> {
        self.features.iter().filter_map(move |f| match &f.kind {
            FeatureKind::Extrude(e) => match self.feature(&e.sketch).map(|s| &s.kind) {
                Some(FeatureKind::Sketch(s)) => Some((f.id.as_str(), e, s)),
                _ => None,
            },
            FeatureKind::Sketch(_) => None,
        })
    }

    /// All face tags the model regenerates into, in emission order.
    pub fn face_tags(&self) -> Vec<FaceTag> {
        let mut out = Vec::new();
        for (id, _, sketch) in self.extrusions() {
            out.push(FaceTag::new(id, FaceRole::CapStart));
            out.push(FaceTag::new(id, FaceRole::CapEnd));
            out.extend((0..sketch.profile.len()).map(|i| FaceTag::new(id, FaceRole::Side(i))));
        }
        out
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}
