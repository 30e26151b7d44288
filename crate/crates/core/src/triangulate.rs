//! Ear-clipping triangulation of simple planar polygons.

use thiserror::Error;

use crate::geom::{is_simple, signed_area, Vec2};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TriangulateError {
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("polygon has non-finite coordinates")]
    NonFinite,
    #[error("polygon is self-intersecting")]
    SelfIntersecting,
    #[error("polygon has collinear vertex {0}")]
    Collinear(usize),
    #[error("polygon has zero area")]
    ZeroArea,
    #[error("no ear found with {0} vertices remaining")]
    NoEar(usize),
}

fn cross3(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (b - a).cross(c - a)
}

/// Inside or on the boundary of CCW triangle abc.
fn in_triangle(p: Vec2, a: Vec2, b: Vec2, c: Vec2) -> bool {
    cross3(a, b, p) >= 0.0 && cross3(b, c, p) >= 0.0 && cross3(c, a, p) >= 0.0
}

/// Triangulates a simple polygon into exactly `n - 2` triangles of indices
/// into `poly`. Triangles keep the winding of the input.
pub fn triangulate_polygon(poly: &[Vec2]) -> Result<Vec<[usize; 3]>, TriangulateError> {
    let n = poly.len();
    if n < 3 {
        return Err(TriangulateError::TooFewVertices(n));
    }
    if poly.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return Err(TriangulateError::NonFinite);
    }
    for i in 0..n {
        let a = poly[(i + n - 1) % n];
        let c = poly[(i + 1) % n];
        if cross3(a, poly[i], c) == 0.0 && poly[i] != a && poly[i] != c {
            return Err(TriangulateError::Collinear(i));
        }
    }
    if !is_simple(poly) {
        return Err(TriangulateError::SelfIntersecting);
    }
    let area = signed_area(poly);
    if area == 0.0 {
        return Err(TriangulateError::ZeroArea);
    }
    let ccw = area > 0.0;
    // work on a CCW view of the polygon
    let at = |k: usize| if ccw { k } else { n - 1 - k };
    let pt = |k: usize| poly[at(k)];

    let mut prev: Vec<usize> = (0..n).map(|i| (i + n - 1) % n).collect();
    let mut next: Vec<usize> = (0..n).map(|i| (i + 1) % n).collect();
    let mut alive = vec![true; n];
    let mut remaining = n;
    let mut out = Vec::with_capacity(n - 2);

    let is_ear = |i: usize, prev: &[usize], next: &[usize], alive: &[bool]| -> bool {
        let (a, b, c) = (pt(prev[i]), pt(i), pt(next[i]));
        if cross3(a, b, c) <= 0.0 {
            return false;
        }
        let mut k = next[next[i]];
        while k != prev[i] {
            debug_assert!(alive[k]);
            let p = pt(k);
            // only reflex (or flat) vertices can lie inside an ear
            if cross3(pt(prev[k]), p, pt(next[k])) <= 0.0 && in_triangle(p, a, b, c) {
                return false;
            }
            k = next[k];
        }
        true
    };

    let mut i = 0;
    let mut misses = 0;
    while remaining > 3 {
        if is_ear(i, &prev, &next, &alive) {
            let (p, q) = (prev[i], next[i]);
            out.push([at(p), at(i), at(q)]);
            next[p] = q;
            prev[q] = p;
            alive[i] = false;
            remaining -= 1;
            misses = 0;
            i = p;
        } else {
            misses += 1;
            if misses > remaining {
                return Err(TriangulateError::NoEar(remaining));
            }
            i = next[i];
        }
    }
    let (p, q) = (prev[i], next[i]);
    if cross3(pt(p), pt(i), pt(q)) <= 0.0 {
        return Err(TriangulateError::NoEar(3));
    }
    out.push([at(p), at(i), at(q)]);
    if !ccw {
        for t in &mut out {
            t.swap(1, 2);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pts(v: &[(f64, f64)]) -> Vec<Vec2> {
        v.iter().map(|&(x, y)| Vec2::new(x, y)).collect()
    }

    fn area_sum(poly: &[Vec2], tris: &[[usize; 3]]) -> f64 {
        tris.iter()
            .map(|t| cross3(poly[t[0]], poly[t[1]], poly[t[2]]) * 0.5)
            .sum()
    }

    #[test]
    fn unit_square() {
        let p = pts(&[(0., 0.), (1., 0.), (1., 1.), (0., 1.)]);
        let t = triangulate_polygon(&p).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(area_sum(&p, &t), 1.0);
    }

    #[test]
    fn convex_pentagon() {
        let p = pts(&[(0., 0.), (2., 0.), (3., 1.5), (1., 3.), (-1., 1.5)]);
        assert_eq!(triangulate_polygon(&p).unwrap().len(), 3);
    }

    #[test]
    fn l_hexagon_matches_shoelace() {
        let p = pts(&[(0., 0.), (4., 0.), (4., 1.), (1., 1.), (1., 3.), (0., 3.)]);
        let t = triangulate_polygon(&p).unwrap();
        assert_eq!(t.len(), 4);
        let shoelace = signed_area(&p);
        assert_eq!(shoelace, 6.0);
        assert!((area_sum(&p, &t) - shoelace).abs() <= 1e-9 * shoelace);
        for tri in &t {
            assert!(cross3(p[tri[0]], p[tri[1]], p[tri[2]]) > 0.0);
        }
    }

    #[test]
    fn clockwise_input_keeps_winding() {
        let mut p = pts(&[(0., 0.), (4., 0.), (4., 1.), (1., 1.), (1., 3.), (0., 3.)]);
        p.reverse();
        let t = triangulate_polygon(&p).unwrap();
        assert_eq!(t.len(), 4);
        assert!((area_sum(&p, &t) + 6.0).abs() < 1e-12);
        for tri in &t {
            assert!(cross3(p[tri[0]], p[tri[1]], p[tri[2]]) < 0.0);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(
            triangulate_polygon(&pts(&[(0., 0.), (1., 0.)])),
            Err(TriangulateError::TooFewVertices(2))
        );
        assert_eq!(
            triangulate_polygon(&pts(&[(0., 0.), (1., 1.), (1., 0.), (0., 1.)])),
            Err(TriangulateError::SelfIntersecting)
        );
        assert_eq!(
            triangulate_polygon(&pts(&[(0., 0.), (1., 0.), (2., 0.), (1., 1.)])),
            Err(TriangulateError::Collinear(1))
        );
    }

    /// Star polygons: alternating outer/inner radii, always simple.
    fn star(radii: &[f64]) -> Vec<Vec2> {
        let n = radii.len();
        radii
            .iter()
            .enumerate()
            .map(|(k, r)| {
                let t = std::f64::consts::TAU * k as f64 / n as f64;
                Vec2::new(r * t.cos(), r * t.sin())
            })
            .collect()
    }

    proptest! {
        #[test]
        fn star_polygons_triangulate(radii in prop::collection::vec(1.0f64..10.0, 3..64)) {
            let p = star(&radii);
            let r = triangulate_polygon(&p);
            // exactly-collinear draws are rejected by contract
            prop_assume!(!matches!(r, Err(TriangulateError::Collinear(_))));
            let t = r.unwrap();
            prop_assert_eq!(t.len(), p.len() - 2);
            let a = signed_area(&p);
            prop_assert!((area_sum(&p, &t) - a).abs() <= 1e-9 * a.abs());
            for tri in &t {
                prop_assert!(cross3(p[tri[0]], p[tri[1]], p[tri[2]]) > 0.0);
            }
        }
    }
}
