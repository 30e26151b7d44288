#![allow(dead_code)]

use std::path::PathBuf;

use vrcad_core::Model;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

pub fn fixture(name: &str) -> Model {
    Model::from_file(fixture_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// Star-shaped single extrusion with `n` profile vertices.
pub fn star_model(n: usize, depth: f64) -> Model {
    let mut pts = Vec::with_capacity(n);
    for i in 0..n {
        let a = std::f64::consts::TAU * i as f64 / n as f64;
        let r = if i % 2 == 0 { 50.0 } else { 47.0 };
        pts.push(format!("[{:.9}, {:.9}]", r * a.cos(), r * a.sin()));
    }
    let json = format!(
        r#"{{"version":1,"units":"mm",
            "parameters":[{{"name":"d","value":{depth},"min":1,"max":100,"delta":1}}],
            "features":[{{"id":"f1","kind":"sketch","profile":[{}]}},
                        {{"id":"f2","kind":"extrude","sketch":"f1","depth":"d","origin":[0,0,0]}}]}}"#,
        pts.join(",")
    );
    Model::from_json(&json).expect("star model")
}
