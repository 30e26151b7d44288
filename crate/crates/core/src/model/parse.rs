//! JSON model documents (`"version": 1`).

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    eval::topological_order, is_identifier, Constraint, Extrude, Feature, FeatureKind, Model, ModelError, ParamDef,
    Sketch,
};
use crate::expr::{parse_expression, Expr};
use crate::geom::Vec3;
use crate::tag::FaceRole;

pub const SCHEMA_VERSION: u32 = 1;

/// Expressions may be written as JSON strings or bare numbers.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum ExprSrc {
    Num(f64),
    Text(String),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    version: u32,
    units: String,
    parameters: Vec<RawParam>,
    #[serde(default)]
    constraints: Vec<RawConstraint>,
    features: Vec<RawFeature>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParam {
    name: String,
    value: f64,
    min: f64,
    max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    delta: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConstraint {
    target: String,
    expr: ExprSrc,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum RawFeature {
    Sketch {
        id: String,
        profile: Vec<[ExprSrc; 2]>,
    },
    Extrude {
        id: String,
        sketch: String,
        depth: ExprSrc,
        origin: [f64; 3],
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        bindings: BTreeMap<String, String>,
    },
}

fn parse_src(src: &ExprSrc, location: impl Fn() -> String) -> Result<Expr, ModelError> {
    match src {
        ExprSrc::Num(v) if v.is_finite() => Ok(Expr::Num(*v)),
        ExprSrc::Num(_) => Err(ModelError::Schema(format!("{}: non-finite number", location()))),
        ExprSrc::Text(t) => parse_expression(t).map_err(|source| ModelError::Expression {
            location: location(),
            source,
        }),
    }
}

/// Default sweep step when a parameter omits `delta`.
pub fn default_delta(min: f64, max: f64) -> f64 {
    let d = (max - min) / 50.0;
    if d > 0.0 {
        d
    } else {
        1.0
    }
}

impl Model {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Model, ModelError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ModelError::Schema(format!("{}: {e}", path.display())))?;
        Model::from_json(&text)
    }

    /// Parses and fully validates a model document, including a trial
    /// regeneration at the stored parameter values.
    pub fn from_json(text: &str) -> Result<Model, ModelError> {
        let raw: RawModel = serde_json::from_str(text).map_err(|e| ModelError::Schema(e.to_string()))?;
        if raw.version != SCHEMA_VERSION {
            return Err(ModelError::Schema(format!(
                "unsupported version {} (expected {SCHEMA_VERSION})",
                raw.version
            )));
        }

        let mut parameters = Vec::new();
        let mut names = HashSet::new();
        for (i, p) in raw.parameters.iter().enumerate() {
            let location = format!("parameters[{i}]");
            if !is_identifier(&p.name) {
                return Err(ModelError::InvalidIdentifier {
                    location,
                    name: p.name.clone(),
                });
            }
            if !names.insert(p.name.clone()) {
                return Err(ModelError::DuplicateName {
                    location,
                    name: p.name.clone(),
                });
            }
            let bad = |message: &str| ModelError::InvalidParameter {
                name: p.name.clone(),
                message: message.to_string(),
            };
            if !(p.value.is_finite() && p.min.is_finite() && p.max.is_finite()) {
                return Err(bad("value and bounds must be finite"));
            }
            if p.min > p.max {
                return Err(bad("min exceeds max"));
            }
            if p.value < p.min || p.value > p.max {
                return Err(bad("value outside [min, max]"));
            }
            let delta = p.delta.unwrap_or_else(|| default_delta(p.min, p.max));
            if !(delta > 0.0 && delta.is_finite()) {
                return Err(bad("delta must be > 0"));
            }
            parameters.push(ParamDef {
                name: p.name.clone(),
                value: p.value,
                min: p.min,
                max: p.max,
                delta,
                driven: false,
            });
        }

        let mut constraints = Vec::new();
        for (i, c) in raw.constraints.iter().enumerate() {
            let location = format!("constraints[{i}]");
            if !is_identifier(&c.target) {
                return Err(ModelError::InvalidIdentifier {
                    location,
                    name: c.target.clone(),
                });
            }
            if parameters.iter().any(|p| p.name == c.target) {
                return Err(ModelError::FreeAndDriven(c.target.clone()));
            }
            if !names.insert(c.target.clone()) {
                return Err(ModelError::DuplicateName {
                    location,
                    name: c.target.clone(),
                });
            }
            let expr = parse_src(&c.expr, || format!("{location}.expr"))?;
            constraints.push(Constraint {
                target: c.target.clone(),
                expr,
            });
        }
        for (i, c) in constraints.iter().enumerate() {
            if let Some(r) = c.expr.references().into_iter().find(|r| !names.contains(*r)) {
                return Err(ModelError::UnknownReference {
                    location: format!("constraints[{i}].expr"),
                    name: r.to_string(),
                });
            }
        }
        let eval_order = topological_order(&constraints)?;
        parameters.extend(constraints.iter().map(|c| ParamDef {
            name: c.target.clone(),
            value: 0.0,
            min: f64::NEG_INFINITY,
            max: f64::INFINITY,
            delta: 1.0,
            driven: true,
        }));
        let driven: HashSet<&str> = constraints.iter().map(|c| c.target.as_str()).collect();

        let check_refs = |e: &Expr, location: &dyn Fn() -> String| -> Result<(), ModelError> {
            match e.references().into_iter().find(|r| !names.contains(*r)) {
                Some(r) => Err(ModelError::UnknownReference {
                    location: location(),
                    name: r.to_string(),
                }),
                None => Ok(()),
            }
        };

        let mut features: Vec<Feature> = Vec::new();
        for (i, f) in raw.features.iter().enumerate() {
            let (id, kind) = match f {
                RawFeature::Sketch { id, profile } => {
                    if profile.len() < 3 {
                        return Err(ModelError::InvalidFeature {
                            feature: id.clone(),
                            message: format!("profile needs at least 3 vertices, got {}", profile.len()),
                        });
                    }
                    let mut pts = Vec::with_capacity(profile.len());
                    for (k, [x, y]) in profile.iter().enumerate() {
                        let loc_x = || format!("features[{i}].profile[{k}][0]");
                        let loc_y = || format!("features[{i}].profile[{k}][1]");
                        let ex = parse_src(x, loc_x)?;
                        let ey = parse_src(y, loc_y)?;
                        check_refs(&ex, &loc_x)?;
                        check_refs(&ey, &loc_y)?;
                        pts.push([ex, ey]);
                    }
                    (id, FeatureKind::Sketch(Sketch { profile: pts }))
                }
                RawFeature::Extrude {
                    id,
                    sketch,
                    depth,
                    origin,
                    bindings,
                } => {
                    let edge_count = match features.iter().find(|g| &g.id == sketch).map(|g| &g.kind) {
                        Some(FeatureKind::Sketch(s)) => s.profile.len(),
                        _ => {
                            return Err(ModelError::InvalidFeature {
                                feature: id.clone(),
                                message: format!("'{sketch}' is not an earlier sketch"),
                            })
                        }
                    };
                    let loc = || format!("features[{i}].depth");
                    let depth = parse_src(depth, loc)?;
                    check_refs(&depth, &loc)?;
                    if !origin.iter().all(|v| v.is_finite()) {
                        return Err(ModelError::Schema(format!("features[{i}].origin: non-finite")));
                    }
                    let mut b = BTreeMap::new();
                    for (role_text, param) in bindings {
                        let role: FaceRole = role_text.parse().map_err(|e| ModelError::InvalidFeature {
                            feature: id.clone(),
                            message: format!("{e}"),
                        })?;
                        if let FaceRole::Side(k) = role {
                            if k >= edge_count {
                                return Err(ModelError::InvalidFeature {
                                    feature: id.clone(),
                                    message: format!("binding {role} exceeds profile edge count {edge_count}"),
                                });
                            }
                        }
                        if driven.contains(param.as_str()) {
                            return Err(ModelError::BindingToDriven {
                                feature: id.clone(),
                                role,
                                param: param.clone(),
                            });
                        }
                        if !names.contains(param) {
                            return Err(ModelError::UnknownReference {
                                location: format!("features[{i}].bindings.{role_text}"),
                                name: param.clone(),
                            });
                        }
                        b.insert(role, param.clone());
                    }
                    (
                        id,
                        FeatureKind::Extrude(Extrude {
                            sketch: sketch.clone(),
                            depth,
                            origin: Vec3::from_array(*origin),
                            bindings: b,
                        }),
                    )
                }
            };
            let location = format!("features[{i}]");
            if !is_identifier(id) {
                return Err(ModelError::InvalidIdentifier {
                    location,
                    name: id.clone(),
                });
            }
            if features.iter().any(|g| &g.id == id) {
                return Err(ModelError::DuplicateName {
                    location,
                    name: id.clone(),
                });
            }
            features.push(Feature { id: id.clone(), kind });
        }

        let mut model = Model {
            version: raw.version,
            units: raw.units,
            parameters,
            constraints,
            features,
            revision: 0,
            eval_order,
        };
        model.refresh_driven()?;
        model.regenerate()?;
        Ok(model)
    }

    /// Serializes back to the document schema. Driven parameters are implied
    /// by constraints and not written; the revision is not persisted.
    pub fn to_json(&self) -> String {
        let raw = RawModel {
            version: self.version,
            units: self.units.clone(),
            parameters: self
                .free_parameters()
                .map(|p| RawParam {
                    name: p.name.clone(),
                    value: p.value,
                    min: p.min,
                    max: p.max,
                    delta: Some(p.delta),
                })
                .collect(),
            constraints: self
                .constraints
                .iter()
                .map(|c| RawConstraint {
                    target: c.target.clone(),
                    expr: ExprSrc::Text(c.expr.to_string()),
                })
                .collect(),
            features: self
                .features
                .iter()
                .map(|f| match &f.kind {
                    FeatureKind::Sketch(s) => RawFeature::Sketch {
                        id: f.id.clone(),
                        profile: s
                            .profile
                            .iter()
                            .map(|[x, y]| [ExprSrc::Text(x.to_string()), ExprSrc::Text(y.to_string())])
                            .collect(),
                    },
                    FeatureKind::Extrude(e) => RawFeature::Extrude {
                        id: f.id.clone(),
                        sketch: e.sketch.clone(),
                        depth: ExprSrc::Text(e.depth.to_string()),
                        origin: e.origin.to_array(),
                        bindings: e.bindings.iter().map(|(r, p)| (r.to_string(), p.clone())).collect(),
                    },
                })
                .collect(),
        };
        serde_json::to_string_pretty(&raw).expect("model serializes")
    }
}
