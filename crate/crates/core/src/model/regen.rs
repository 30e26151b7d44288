use super::{Extrude, Model, ModelError, Sketch, Valuation};
use crate::geom::{is_simple, newell_normal, signed_area, Vec2, Vec3};
use crate::tag::{FaceRole, FaceTag};

/// Planar face of a regenerated solid. Vertices wind counter-clockwise when
/// viewed from outside, so the Newell normal points outward.
#[derive(Debug, Clone, PartialEq)]
pub struct BRepFace {
    pub tag: FaceTag,
    pub vertices: Vec<Vec3>,
    /// Unit outward normal.
    pub normal: Vec3,
}

/// Boundary representation of the regenerated model: one closed set of
/// faces per extrusion, in history order, with no boolean merge between
/// extrusions.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BRep {
    pub faces: Vec<BRepFace>,
}

impl BRep {
    pub fn face(&self, tag: &FaceTag) -> Option<&BRepFace> {
        self.faces.iter().find(|f| &f.tag == tag)
    }
}

fn eval_profile(id: &str, sketch: &Sketch, vals: &Valuation) -> Result<Vec<Vec2>, ModelError> {
    let lookup = |n: &str| vals.get(n).copied();
    sketch
        .profile
        .iter()
        .enumerate()
        .map(|(k, [x, y])| {
            let ev = |e: &crate::expr::Expr| {
                e.eval(&lookup).map_err(|source| ModelError::Evaluation {
                    location: format!("feature '{id}' profile vertex {k}"),
                    source,
                })
            };
            Ok(Vec2::new(ev(x)?, ev(y)?))
        })
        .collect()
}

fn check_profile(id: &str, pts: &[Vec2]) -> Result<(), ModelError> {
    let degenerate = |reason: &str| ModelError::Degenerate {
        feature: id.to_string(),
        reason: reason.to_string(),
    };
    if !is_simple(pts) {
        return Err(ModelError::NonSimpleProfile {
            feature: id.to_string(),
        });
    }
    let area = signed_area(pts);
    if area == 0.0 {
        return Err(degenerate("zero-area profile"));
    }
    if area < 0.0 {
        return Err(ModelError::ClockwiseProfile {
            feature: id.to_string(),
        });
    }
    let n = pts.len();
    for i in 0..n {
        let a = pts[(i + n - 1) % n];
        let b = pts[i];
        let c = pts[(i + 1) % n];
        if (b - a).cross(c - b) == 0.0 {
            return Err(degenerate(&format!("collinear profile vertex {i}")));
        }
    }
    Ok(())
}

fn extrude_faces(id: &str, ext: &Extrude, pts: &[Vec2], depth: f64) -> Vec<BRepFace> {
    let n = pts.len();
    let o = ext.origin;
    let bottom: Vec<Vec3> = pts.iter().map(|p| Vec3::new(o.x + p.x, o.y + p.y, o.z)).collect();
    let top: Vec<Vec3> = pts
        .iter()
        .map(|p| Vec3::new(o.x + p.x, o.y + p.y, o.z + depth))
        .collect();

    let mut faces = Vec::with_capacity(n + 2);
    // start cap faces -z: reversed winding, starting at profile vertex 0
    let mut start: Vec<Vec3> = Vec::with_capacity(n);
    start.push(bottom[0]);
    start.extend(bottom[1..].iter().rev());
    faces.push((FaceRole::CapStart, start));
    faces.push((FaceRole::CapEnd, top.clone()));
    for i in 0..n {
        let j = (i + 1) % n;
        faces.push((FaceRole::Side(i), vec![bottom[i], bottom[j], top[j], top[i]]));
    }
    faces
        .into_iter()
        .map(|(role, vertices)| BRepFace {
            tag: FaceTag::new(id, role),
            normal: newell_normal(&vertices).normalized(),
            vertices,
        })
        .collect()
}

impl Model {
    /// Regenerates the feature history into planar tagged faces.
    pub fn regenerate(&self) -> Result<BRep, ModelError> {
        let vals = self.evaluate_params()?;
        let mut brep = BRep::default();
        for (id, ext, sketch) in self.extrusions() {
            let pts = eval_profile(id, sketch, &vals)?;
            check_profile(id, &pts)?;
            let depth = ext
                .depth
                .eval(&|n: &str| vals.get(n).copied())
                .map_err(|source| ModelError::Evaluation {
                    location: format!("feature '{id}' depth"),
                    source,
                })?;
            if depth <= 0.0 {
                return Err(ModelError::Degenerate {
                    feature: id.to_string(),
                    reason: format!("depth {depth} is not positive"),
                });
            }
            brep.faces.extend(extrude_faces(id, ext, &pts, depth));
        }
        Ok(brep)
    }

    /// Resolves a picked face to the free parameter that drives it.
    ///
    /// Explicit bindings win. Without one, an end cap resolves to the
    /// extrusion depth when the depth is a bare parameter reference.
    pub fn face_to_parameter(&self, tag: &FaceTag) -> Result<String, ModelError> {
        let (_, ext, sketch) = self
            .extrusions()
            .find(|(id, _, _)| *id == tag.feature_id)
            .ok_or_else(|| ModelError::UnknownFace(tag.clone()))?;
        if let FaceRole::Side(i) = tag.role {
            if i >= sketch.profile.len() {
                return Err(ModelError::UnknownFace(tag.clone()));
            }
        }
        let param = match ext.bindings.get(&tag.role) {
            Some(p) => p.as_str(),
            None => match (tag.role, ext.depth.as_var()) {
                (FaceRole::CapEnd, Some(p)) => p,
                _ => return Err(ModelError::FaceNotSelectable(tag.clone())),
            },
        };
        match self.param(param) {
            Some(p) if p.driven => Err(ModelError::ParameterDriven(param.to_string())),
            Some(_) => Ok(param.to_string()),
            None => Err(ModelError::UnknownParameter(param.to_string())),
        }
    }

    /// Every face tag whose selection resolves to `param`.
    pub fn handle_tags(&self, param: &str) -> Vec<FaceTag> {
        self.face_tags()
            .into_iter()
            .filter(|t| self.face_to_parameter(t).as_deref() == Ok(param))
            .collect()
    }
}
