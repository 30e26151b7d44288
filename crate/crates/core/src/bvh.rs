//! Bounding volume hierarchy over mesh triangles.
//!
//! Nodes split at the median triangle along the longest axis of the node's
//! bounds; leaves hold at most [`MAX_LEAF_SIZE`] triangles. Construction is
//! deterministic: equal centroids are ordered by triangle index.

use crate::distance::{triangle_query, Best, DistanceResult};
use crate::geom::{Aabb, Vec3};
use crate::mesh::{TagFilter, TriMesh};

pub const MAX_LEAF_SIZE: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    /// Triangles `order[start..start + count]`.
    Leaf {
        start: usize,
        count: usize,
    },
    Inner {
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub bounds: Aabb,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bvh {
    pub nodes: Vec<Node>,
    /// Triangle indices permuted so every leaf covers a contiguous range.
    pub order: Vec<usize>,
}

fn tri_bounds(mesh: &TriMesh, t: usize) -> Aabb {
    Aabb::from_points(mesh.triangle(t))
}

impl Bvh {
    /// Builds the hierarchy; `None` for an empty mesh.
    pub fn build(mesh: &TriMesh) -> Option<Bvh> {
        let n = mesh.triangles.len();
        if n == 0 {
            return None;
        }
        let centroids: Vec<Vec3> = (0..n)
            .map(|t| {
                let [a, b, c] = mesh.triangle(t);
                (a + b + c) * (1.0 / 3.0)
            })
            .collect();
        let mut bvh = Bvh {
            nodes: Vec::with_capacity(2 * n / MAX_LEAF_SIZE + 1),
            order: (0..n).collect(),
        };
        bvh.build_node(mesh, &centroids, 0, n);
        Some(bvh)
    }

    fn build_node(&mut self, mesh: &TriMesh, centroids: &[Vec3], start: usize, end: usize) -> usize {
        let bounds = self.order[start..end]
            .iter()
            .fold(Aabb::EMPTY, |b, &t| b.union(tri_bounds(mesh, t)));
        let id = self.nodes.len();
        let count = end - start;
        self.nodes.push(Node {
            bounds,
            kind: NodeKind::Leaf { start, count },
        });
        if count <= MAX_LEAF_SIZE {
            return id;
        }
        let axis = bounds.longest_axis();
        self.order[start..end].sort_by(|&a, &b| {
            centroids[a]
                .axis(axis)
                .total_cmp(&centroids[b].axis(axis))
                .then(a.cmp(&b))
        });
        let mid = start + count / 2;
        let left = self.build_node(mesh, centroids, start, mid);
        let right = self.build_node(mesh, centroids, mid, end);
        self.nodes[id].kind = NodeKind::Inner { left, right };
        id
    }

    pub fn depth(&self) -> usize {
        fn go(b: &Bvh, n: usize) -> usize {
            match b.nodes[n].kind {
                NodeKind::Leaf { .. } => 1,
                NodeKind::Inner { left, right } => 1 + go(b, left).max(go(b, right)),
            }
        }
        go(self, 0)
    }

    pub fn leaves(&self) -> impl Iterator<Item = (&Aabb, &[usize])> {
        self.nodes.iter().filter_map(move |n| match n.kind {
            NodeKind::Leaf { start, count } => Some((&n.bounds, &self.order[start..start + count])),
            NodeKind::Inner { .. } => None,
        })
    }

    /// Nearest (filtered) triangle to `p`. Subtrees are pruned only when
    /// strictly farther than the current best, so exact ties are still
    /// visited and resolved toward the lowest triangle index.
    pub fn nearest(&self, p: Vec3, mesh: &TriMesh, filter: Option<&TagFilter>) -> Option<DistanceResult> {
        let mut best = Best::NONE;
        let mut stack: Vec<(usize, f64)> = Vec::with_capacity(64);
        stack.push((0, self.nodes[0].bounds.distance_squared(p)));
        while let Some((n, box_d2)) = stack.pop() {
            // slack keeps rounding in the closest-point routine from
            // pruning a box whose triangle would win
            if box_d2 * (1.0 - 1e-9) > best.d2 {
                continue;
            }
            match self.nodes[n].kind {
                NodeKind::Leaf { start, count } => {
                    for &tri in &self.order[start..start + count] {
                        if filter.is_some_and(|f| !f.accepts(mesh, tri)) {
                            continue;
                        }
                        let (d2, q) = triangle_query(p, mesh, tri);
                        best.offer(d2, q, tri);
                    }
                }
                NodeKind::Inner { left, right } => {
                    let dl = self.nodes[left].bounds.distance_squared(p);
                    let dr = self.nodes[right].bounds.distance_squared(p);
                    // push the farther child first so the nearer pops first
                    if dl <= dr {
                        stack.push((right, dr));
                        stack.push((left, dl));
                    } else {
                        stack.push((left, dl));
                        stack.push((right, dr));
                    }
                }
            }
        }
        best.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tag::{FaceRole, FaceTag};

    fn single_triangle() -> TriMesh {
        TriMesh {
            name: "t".into(),
            vertices: vec![Vec3::ZERO, Vec3::new(1., 0., 0.), Vec3::new(0., 1., 0.)],
            triangles: vec![[0, 1, 2]],
            tags: vec![FaceTag::new("f", FaceRole::CapEnd)],
            triangle_tags: vec![0],
        }
    }

    #[test]
    fn one_triangle_is_one_leaf() {
        let b = Bvh::build(&single_triangle()).unwrap();
        assert_eq!(b.nodes.len(), 1);
        assert_eq!(b.depth(), 1);
    }

    #[test]
    fn empty_mesh_has_no_bvh() {
        assert!(Bvh::build(&TriMesh::default()).is_none());
    }
}
