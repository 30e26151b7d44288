//! Point-to-mesh distance: exact point-triangle closest points, a linear
//! scan, and the BVH-accelerated query.

use thiserror::Error;

use crate::bvh::Bvh;
use crate::geom::Vec3;
use crate::mesh::{TagFilter, TriMesh};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceResult {
    pub distance: f64,
    pub closest_point: Vec3,
    pub triangle_index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DistanceError {
    #[error("mesh has no triangles")]
    EmptyMesh,
    #[error("no selectable triangles")]
    NoSelectableTriangles,
}

/// Closest point to `p` on triangle `abc`, classified by Voronoi region
/// (vertex, edge or interior).
pub fn closest_point_on_triangle(p: Vec3, a: Vec3, b: Vec3, c: Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(ap);
    let d2 = ac.dot(ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }

    let bp = p - b;
    let d3 = ab.dot(bp);
    let d4 = ac.dot(bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }

    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }

    let cp = p - c;
    let d5 = ab.dot(cp);
    let d6 = ac.dot(cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }

    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }

    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }

    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

/// Squared distance and closest point for one triangle of `mesh`.
#[inline]
pub(crate) fn triangle_query(p: Vec3, mesh: &TriMesh, tri: usize) -> (f64, Vec3) {
    let [a, b, c] = mesh.triangle(tri);
    let q = closest_point_on_triangle(p, a, b, c);
    ((p - q).norm_squared(), q)
}

/// Running minimum with the lowest-index tie rule.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Best {
    pub d2: f64,
    pub point: Vec3,
    pub tri: usize,
}

impl Best {
    pub const NONE: Best = Best {
        d2: f64::INFINITY,
        point: Vec3::ZERO,
        tri: usize::MAX,
    };

    #[inline]
    pub fn offer(&mut self, d2: f64, point: Vec3, tri: usize) {
        if d2 < self.d2 || (d2 == self.d2 && tri < self.tri) {
            *self = Best { d2, point, tri };
        }
    }

    pub fn finish(self) -> Option<DistanceResult> {
        (self.tri != usize::MAX).then(|| DistanceResult {
            distance: self.d2.sqrt(),
            closest_point: self.point,
            triangle_index: self.tri,
        })
    }
}

fn check(mesh: &TriMesh, filter: Option<&TagFilter>) -> Result<(), DistanceError> {
    if mesh.triangles.is_empty() {
        return Err(DistanceError::EmptyMesh);
    }
    if filter.is_some_and(TagFilter::is_empty) {
        return Err(DistanceError::NoSelectableTriangles);
    }
    Ok(())
}

/// Linear scan over all (filtered) triangles. Reference for the BVH query.
pub fn brute_force_distance(
    query: Vec3,
    mesh: &TriMesh,
    filter: Option<&TagFilter>,
) -> Result<DistanceResult, DistanceError> {
    check(mesh, filter)?;
    let mut best = Best::NONE;
    for tri in 0..mesh.triangles.len() {
        if filter.is_some_and(|f| !f.accepts(mesh, tri)) {
            continue;
        }
        let (d2, q) = triangle_query(query, mesh, tri);
        best.offer(d2, q, tri);
    }
    best.finish().ok_or(DistanceError::NoSelectableTriangles)
}

/// Exact unsigned distance from `query` to the (filtered) surface, using
/// `bvh` for pruning. Results match [`brute_force_distance`] exactly.
pub fn point_mesh_distance(
    query: Vec3,
    mesh: &TriMesh,
    bvh: &Bvh,
    filter: Option<&TagFilter>,
) -> Result<DistanceResult, DistanceError> {
    check(mesh, filter)?;
    bvh.nearest(query, mesh, filter)
        .ok_or(DistanceError::NoSelectableTriangles)
}
