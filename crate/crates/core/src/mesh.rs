//! Tagged triangle meshes: tessellation of regenerated faces, volume and
//! topology metrics.

use std::collections::HashMap;

use thiserror::Error;

use crate::geom::{Aabb, Vec2, Vec3};
use crate::model::BRep;
use crate::tag::FaceTag;
use crate::triangulate::{triangulate_polygon, TriangulateError};

/// Triangle mesh whose triangles carry the face tag they were cut from.
/// Triangles wind counter-clockwise seen from outside.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriMesh {
    pub name: String,
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
    /// Distinct tags in order of first appearance.
    pub tags: Vec<FaceTag>,
    /// Index into `tags`, one per triangle.
    pub triangle_tags: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeshError {
    #[error("face {tag}: {source}")]
    Triangulation {
        tag: FaceTag,
        #[source]
        source: TriangulateError,
    },
    #[error("face {tag}: degenerate triangle")]
    DegenerateTriangle { tag: FaceTag },
    #[error("face {tag}: polygon normal is zero")]
    DegenerateFace { tag: FaceTag },
}

impl TriMesh {
    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn tag_of(&self, tri: usize) -> &FaceTag {
        &self.tags[self.triangle_tags[tri] as usize]
    }

    pub fn triangle(&self, tri: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[tri];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    pub fn bounds(&self) -> Aabb {
        Aabb::from_points(self.vertices.iter().copied())
    }

    /// Signed enclosed volume by the divergence theorem; positive for
    /// outward-oriented closed surfaces.
    pub fn volume(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.triangle(t);
                a.dot(b.cross(c))
            })
            .sum::<f64>()
            / 6.0
    }

    /// Copy with every triangle's winding reversed.
    pub fn inverted(&self) -> TriMesh {
        let mut m = self.clone();
        for t in &mut m.triangles {
            t.swap(1, 2);
        }
        m
    }

    /// Triangle count per tag, in tag-table order.
    pub fn tag_histogram(&self) -> Vec<(FaceTag, usize)> {
        let mut counts = vec![0usize; self.tags.len()];
        for &t in &self.triangle_tags {
            counts[t as usize] += 1;
        }
        self.tags.iter().cloned().zip(counts).collect()
    }

    /// Groups triangles into vertex-connected components.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut parent: Vec<u32> = (0..self.vertices.len() as u32).collect();
        fn find(parent: &mut [u32], mut x: u32) -> u32 {
            while parent[x as usize] != x {
                parent[x as usize] = parent[parent[x as usize] as usize];
                x = parent[x as usize];
            }
            x
        }
        for t in &self.triangles {
            let r0 = find(&mut parent, t[0]);
            for &v in &t[1..] {
                let r = find(&mut parent, v);
                if r != r0 {
                    parent[r as usize] = r0;
                }
            }
        }
        let mut by_root: Vec<(u32, Vec<usize>)> = Vec::new();
        let mut index: HashMap<u32, usize> = HashMap::new();
        for (i, t) in self.triangles.iter().enumerate() {
            let r = find(&mut parent, t[0]);
            let slot = *index.entry(r).or_insert_with(|| {
                by_root.push((r, Vec::new()));
                by_root.len() - 1
            });
            by_root[slot].1.push(i);
        }
        by_root.into_iter().map(|(_, tris)| tris).collect()
    }

    /// Per-component closed-manifold statistics.
    pub fn topology(&self) -> Vec<ComponentTopology> {
        self.components()
            .into_iter()
            .map(|tris| {
                let mut undirected: HashMap<(u32, u32), usize> = HashMap::new();
                let mut directed: HashMap<(u32, u32), usize> = HashMap::new();
                let mut verts = std::collections::HashSet::new();
                for &t in &tris {
                    let tri = self.triangles[t];
                    for k in 0..3 {
                        let (a, b) = (tri[k], tri[(k + 1) % 3]);
                        verts.insert(a);
                        *undirected.entry((a.min(b), a.max(b))).or_default() += 1;
                        *directed.entry((a, b)).or_default() += 1;
                    }
                }
                ComponentTopology {
                    vertices: verts.len(),
                    edges: undirected.len(),
                    faces: tris.len(),
                    edges_not_shared_by_two: undirected.values().filter(|&&c| c != 2).count(),
                    repeated_directed_edges: directed.values().filter(|&&c| c > 1).count(),
                }
            })
            .collect()
    }

    /// Indices in range and no zero-area triangles.
    pub fn check_indices_and_areas(&self) -> Result<(), String> {
        if self.triangle_tags.len() != self.triangles.len() {
            return Err("tag count differs from triangle count".into());
        }
        let n = self.vertices.len() as u32;
        for (i, t) in self.triangles.iter().enumerate() {
            if t.iter().any(|&v| v >= n) {
                return Err(format!("triangle {i} has out-of-range index"));
            }
            let [a, b, c] = self.triangle(i);
            if (b - a).cross(c - a).norm_squared() == 0.0 {
                return Err(format!("triangle {i} is degenerate"));
            }
        }
        if self.triangle_tags.iter().any(|&t| t as usize >= self.tags.len()) {
            return Err("tag index out of range".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComponentTopology {
    pub vertices: usize,
    pub edges: usize,
    pub faces: usize,
    /// Edges with other than exactly two incident triangles.
    pub edges_not_shared_by_two: usize,
    /// Directed edges used twice, i.e. inconsistent winding.
    pub repeated_directed_edges: usize,
}

impl ComponentTopology {
    pub fn euler_characteristic(&self) -> i64 {
        self.vertices as i64 - self.edges as i64 + self.faces as i64
    }

    /// Closed, consistently oriented genus-0 surface.
    pub fn is_closed_sphere(&self) -> bool {
        self.edges_not_shared_by_two == 0 && self.repeated_directed_edges == 0 && self.euler_characteristic() == 2
    }
}

/// Projects a planar polygon to 2D by dropping the dominant normal axis.
fn project(poly: &[Vec3], normal: Vec3) -> Vec<Vec2> {
    let (ax, ay, az) = (normal.x.abs(), normal.y.abs(), normal.z.abs());
    poly.iter()
        .map(|p| {
            if az >= ax && az >= ay {
                Vec2::new(p.x, p.y)
            } else if ay >= ax {
                Vec2::new(p.z, p.x)
            } else {
                Vec2::new(p.y, p.z)
            }
        })
        .collect()
}

/// Tessellates regenerated faces. Vertices are welded within each feature
/// and never across features, so each extrusion is its own component.
/// Output order follows the face order of `brep`.
pub fn tessellate(brep: &BRep, name: &str) -> Result<TriMesh, MeshError> {
    let mut mesh = TriMesh {
        name: name.to_string(),
        ..TriMesh::default()
    };
    let mut weld: HashMap<[u64; 3], u32> = HashMap::new();
    let mut current_feature: Option<&str> = None;
    for face in &brep.faces {
        if current_feature != Some(face.tag.feature_id.as_str()) {
            weld.clear();
            current_feature = Some(face.tag.feature_id.as_str());
        }
        let normal = crate::geom::newell_normal(&face.vertices);
        if normal.norm_squared() == 0.0 {
            return Err(MeshError::DegenerateFace { tag: face.tag.clone() });
        }
        let flat = project(&face.vertices, normal);
        let tris = triangulate_polygon(&flat).map_err(|source| MeshError::Triangulation {
            tag: face.tag.clone(),
            source,
        })?;
        let ids: Vec<u32> = face
            .vertices
            .iter()
            .map(|p| {
                // +0.0 folds negative zero so welding is by value
                let key = [(p.x + 0.0).to_bits(), (p.y + 0.0).to_bits(), (p.z + 0.0).to_bits()];
                *weld.entry(key).or_insert_with(|| {
                    mesh.vertices.push(*p);
                    (mesh.vertices.len() - 1) as u32
                })
            })
            .collect();
        let tag_index = match mesh.tags.iter().position(|t| t == &face.tag) {
            Some(i) => i as u32,
            None => {
                mesh.tags.push(face.tag.clone());
                (mesh.tags.len() - 1) as u32
            }
        };
        for [a, b, c] in tris {
            let t = [ids[a], ids[b], ids[c]];
            let (pa, pb, pc) = (
                mesh.vertices[t[0] as usize],
                mesh.vertices[t[1] as usize],
                mesh.vertices[t[2] as usize],
            );
            if (pb - pa).cross(pc - pa).norm_squared() == 0.0 {
                return Err(MeshError::DegenerateTriangle { tag: face.tag.clone() });
            }
            mesh.triangles.push(t);
            mesh.triangle_tags.push(tag_index);
        }
    }
    Ok(mesh)
}

/// Triangle mask selecting the triangles whose tag is in a given set.
#[derive(Debug, Clone, PartialEq)]
pub struct TagFilter {
    accept: Vec<bool>,
    matching_triangles: usize,
}

impl TagFilter {
    pub fn new<'a, I>(mesh: &TriMesh, tags: I) -> TagFilter
    where
        I: IntoIterator<Item = &'a FaceTag>,
    {
        let mut accept = vec![false; mesh.tags.len()];
        for tag in tags {
            if let Some(i) = mesh.tags.iter().position(|t| t == tag) {
                accept[i] = true;
            }
        }
        let matching_triangles = mesh.triangle_tags.iter().filter(|&&t| accept[t as usize]).count();
        TagFilter {
            accept,
            matching_triangles,
        }
    }

    #[inline]
    pub fn accepts(&self, mesh: &TriMesh, tri: usize) -> bool {
        self.accept[mesh.triangle_tags[tri] as usize]
    }

    pub fn matching_triangles(&self) -> usize {
        self.matching_triangles
    }

    pub fn is_empty(&self) -> bool {
        self.matching_triangles == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Model;
    use crate::tag::FaceRole;

    fn extrusion(profile: &str, depth: f64) -> Model {
        Model::from_json(&format!(
            r#"{{"version":1,"units":"mm",
                "parameters":[{{"name":"d","value":{depth},"min":0.5,"max":100,"delta":1}}],
                "features":[{{"id":"f1","kind":"sketch","profile":{profile}}},
                            {{"id":"f2","kind":"extrude","sketch":"f1","depth":"d","origin":[0,0,0]}}]}}"#
        ))
        .unwrap()
    }

    const SQUARE: &str = "[[0,0],[20,0],[20,20],[0,20]]";
    const L: &str = "[[0,0],[4,0],[4,1],[1,1],[1,4],[0,4]]";

    #[test]
    fn box_mesh_counts() {
        let m = tessellate(&extrusion(SQUARE, 10.0).regenerate().unwrap(), "box").unwrap();
        assert_eq!(m.vertices.len(), 8);
        assert_eq!(m.triangle_count(), 12);
        assert_eq!(m.tags.len(), 6);
        assert!(m.tag_histogram().iter().all(|(_, c)| *c == 2));
        assert_eq!(m.volume(), 4000.0);
        assert_eq!(m.inverted().volume(), -4000.0);
        let topo = m.topology();
        assert_eq!(topo.len(), 1);
        assert!(topo[0].is_closed_sphere(), "{topo:?}");
        m.check_indices_and_areas().unwrap();
    }

    #[test]
    fn l_mesh_counts_and_volume() {
        // caps: n-2 = 4 triangles each; sides: 6 quads × 2
        let m = tessellate(&extrusion(L, 10.0).regenerate().unwrap(), "l").unwrap();
        assert_eq!(m.triangle_count(), 2 * 4 + 6 * 2);
        assert!((m.volume() - 70.0).abs() <= 1e-9 * 70.0);
        assert!(m.topology()[0].is_closed_sphere());
        let cap_end = FaceTag::new("f2", FaceRole::CapEnd);
        let hist = m.tag_histogram();
        assert_eq!(hist.iter().find(|(t, _)| *t == cap_end).unwrap().1, 4);
    }

    #[test]
    fn tag_filter_counts() {
        let m = tessellate(&extrusion(L, 3.0).regenerate().unwrap(), "l").unwrap();
        let f = TagFilter::new(&m, &[FaceTag::new("f2", FaceRole::CapEnd)]);
        assert_eq!(f.matching_triangles(), 4);
        let none = TagFilter::new(&m, &[FaceTag::new("zz", FaceRole::CapEnd)]);
        assert!(none.is_empty());
    }

    #[test]
    fn tessellation_is_deterministic() {
        let b = extrusion(L, 7.5).regenerate().unwrap();
        assert_eq!(tessellate(&b, "a").unwrap(), tessellate(&b, "a").unwrap());
    }
}
