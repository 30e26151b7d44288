//! File-level commands: tessellation export and model validation.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use vrcad_core::model::FeatureKind;
use vrcad_core::{mesh, to_obj_string, BuildError, Model};

use crate::CliError;

/// Writes `model.obj` for the whole assembly and `feature_<id>.obj` for
/// each extrusion into `out_dir`. Returns the written paths.
pub fn tessellate_to_dir(model: &Model, out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let brep = model.regenerate().map_err(CliError::invalid)?;
    std::fs::create_dir_all(out_dir).map_err(io_err)?;
    let mut written = Vec::new();
    let whole = mesh::tessellate(&brep, "model").map_err(CliError::invalid)?;
    let path = out_dir.join("model.obj");
    std::fs::write(&path, to_obj_string(&whole)).map_err(io_err)?;
    written.push(path);
    for f in &model.features {
        if !matches!(f.kind, FeatureKind::Extrude(_)) {
            continue;
        }
        let part = vrcad_core::model::BRep {
            faces: brep
                .faces
                .iter()
                .filter(|face| face.tag.feature_id == f.id)
                .cloned()
                .collect(),
        };
        let m = mesh::tessellate(&part, &format!("feature_{}", f.id)).map_err(CliError::invalid)?;
        let path = out_dir.join(format!("feature_{}.obj", f.id));
        std::fs::write(&path, to_obj_string(&m)).map_err(io_err)?;
        written.push(path);
    }
    Ok(written)
}

fn io_err(e: std::io::Error) -> CliError {
    CliError::Runtime(format!("write failed: {e}"))
}

/// Human-readable summary of a loaded model, or the load error.
pub fn validate_summary(model: &Model) -> Result<String, BuildError> {
    let brep = model.regenerate()?;
    let whole = mesh::tessellate(&brep, "model")?;
    let mut s = String::new();
    writeln!(s, "parameters:").unwrap();
    for p in &model.parameters {
        if p.driven {
            writeln!(s, "  {} = {} (driven)", p.name, p.value).unwrap();
        } else {
            writeln!(
                s,
                "  {} = {} in [{}, {}] step {}",
                p.name, p.value, p.min, p.max, p.delta
            )
            .unwrap();
        }
    }
    let order: Vec<&str> = model
        .evaluation_order()
        .iter()
        .map(|&i| model.constraints[i].target.as_str())
        .collect();
    writeln!(s, "constraint order: [{}]", order.join(", ")).unwrap();
    writeln!(s, "selectable faces:").unwrap();
    for tag in model.face_tags() {
        if let Ok(p) = model.face_to_parameter(&tag) {
            writeln!(s, "  {tag} -> {p}").unwrap();
        }
    }
    write!(
        s,
        "mesh: {} vertices, {} triangles, volume {:.6}",
        whole.vertices.len(),
        whole.triangle_count(),
        whole.volume()
    )
    .unwrap();
    Ok(s)
}
