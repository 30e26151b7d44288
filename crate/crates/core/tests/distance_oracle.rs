mod common;

use common::{fixture, star_model};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vrcad_core::bvh::{NodeKind, MAX_LEAF_SIZE};
use vrcad_core::geom::Aabb;
use vrcad_core::{
    brute_force_distance, model_mesh, point_mesh_distance, Bvh, DistanceError, FaceRole, FaceTag, TagFilter, TriMesh,
    Vec3,
};

fn unit_cube() -> TriMesh {
    let m = vrcad_core::Model::from_json(
        r#"{"version":1,"units":"mm","parameters":[{"name":"d","value":1,"min":0.5,"max":2}],
            "features":[{"id":"f1","kind":"sketch","profile":[[0,0],[1,0],[1,1],[0,1]]},
                        {"id":"f2","kind":"extrude","sketch":"f1","depth":"d","origin":[0,0,0]}]}"#,
    )
    .unwrap();
    model_mesh(&m, "cube").unwrap()
}

fn random_point(rng: &mut ChaCha8Rng, b: &Aabb) -> Vec3 {
    // twice the bounding box about its centre
    let c = b.center();
    let e = b.extent();
    Vec3::new(
        c.x + e.x * rng.gen_range(-1.0..1.0),
        c.y + e.y * rng.gen_range(-1.0..1.0),
        c.z + e.z * rng.gen_range(-1.0..1.0),
    )
}

#[test]
fn unit_cube_examples() {
    let mesh = unit_cube();
    let bvh = Bvh::build(&mesh).unwrap();
    let r = point_mesh_distance(Vec3::new(2.0, 0.5, 0.5), &mesh, &bvh, None).unwrap();
    assert_eq!(r.distance, 1.0);
    assert_eq!(r.closest_point, Vec3::new(1.0, 0.5, 0.5));
    assert_eq!(r, brute_force_distance(Vec3::new(2.0, 0.5, 0.5), &mesh, None).unwrap());
    let r = point_mesh_distance(Vec3::new(0.5, 0.5, 0.5), &mesh, &bvh, None).unwrap();
    assert_eq!(r.distance, 0.5);
    assert_eq!(r, brute_force_distance(Vec3::new(0.5, 0.5, 0.5), &mesh, None).unwrap());
}

#[test]
fn empty_filter_reports_no_selectable_triangles() {
    let mesh = unit_cube();
    let bvh = Bvh::build(&mesh).unwrap();
    let none = TagFilter::new(&mesh, &[FaceTag::new("nope", FaceRole::CapEnd)]);
    assert_eq!(
        point_mesh_distance(Vec3::ZERO, &mesh, &bvh, Some(&none)),
        Err(DistanceError::NoSelectableTriangles)
    );
    assert_eq!(
        brute_force_distance(Vec3::ZERO, &mesh, Some(&none)),
        Err(DistanceError::NoSelectableTriangles)
    );
    assert_eq!(
        brute_force_distance(Vec3::ZERO, &TriMesh::default(), None),
        Err(DistanceError::EmptyMesh)
    );
}

#[test]
fn bvh_shapes() {
    let cube = unit_cube();
    let bvh = Bvh::build(&cube).unwrap();
    assert!(bvh.depth() <= 3);

    let one = TriMesh {
        name: "t".into(),
        vertices: vec![Vec3::ZERO, Vec3::new(1., 0., 0.), Vec3::new(0., 1., 0.)],
        triangles: vec![[0, 1, 2]],
        tags: vec![FaceTag::new("f", FaceRole::CapEnd)],
        triangle_tags: vec![0],
    };
    let bvh = Bvh::build(&one).unwrap();
    assert_eq!(bvh.nodes.len(), 1);
    assert_eq!(bvh.depth(), 1);
    assert!(Bvh::build(&TriMesh::default()).is_none());
}

#[test]
fn dense_mesh_leaves_and_containment() {
    let mesh = model_mesh(&star_model(2502, 10.0), "star").unwrap();
    assert!(mesh.triangle_count() >= 10_000);
    let bvh = Bvh::build(&mesh).unwrap();
    let mut seen = vec![0u32; mesh.triangle_count()];
    for (bounds, tris) in bvh.leaves() {
        assert!(!tris.is_empty() && tris.len() <= MAX_LEAF_SIZE);
        for &t in tris {
            seen[t] += 1;
            assert!(bounds.contains(&Aabb::from_points(mesh.triangle(t))));
        }
    }
    assert!(seen.iter().all(|&c| c == 1), "every triangle in exactly one leaf");
    for node in &bvh.nodes {
        if let NodeKind::Inner { left, right } = node.kind {
            assert!(node.bounds.contains(&bvh.nodes[left].bounds));
            assert!(node.bounds.contains(&bvh.nodes[right].bounds));
        }
    }
    assert_eq!(Bvh::build(&mesh).unwrap(), bvh, "construction is deterministic");
}

#[test]
fn bvh_matches_brute_force_on_fixtures() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut checked = 0usize;
    for name in ["box.json", "lshape.json", "bracket.json", "gear.json"] {
        let m = fixture(name);
        let mesh = model_mesh(&m, name).unwrap();
        let bvh = Bvh::build(&mesh).unwrap();
        let bounds = mesh.bounds();
        let mut filters: Vec<Option<TagFilter>> = vec![None];
        for param in ["d", "w"] {
            let tags = m.handle_tags(param);
            if !tags.is_empty() {
                filters.push(Some(TagFilter::new(&mesh, &tags)));
            }
        }
        for _ in 0..3000 {
            let p = random_point(&mut rng, &bounds);
            for f in &filters {
                let fast = point_mesh_distance(p, &mesh, &bvh, f.as_ref()).unwrap();
                let slow = brute_force_distance(p, &mesh, f.as_ref()).unwrap();
                assert_eq!(fast, slow, "{name} at {p:?}");
                assert!(fast.distance >= 0.0);
                assert_eq!(fast.distance, (p - fast.closest_point).norm());
                checked += 1;
            }
        }
    }
    assert!(checked >= 10_000, "{checked}");
}

#[test]
fn l_solid_cap_filter_matches_brute_force() {
    let mesh = model_mesh(&fixture("lshape.json"), "l").unwrap();
    let bvh = Bvh::build(&mesh).unwrap();
    let filter = TagFilter::new(&mesh, &[FaceTag::new("f2", FaceRole::CapEnd)]);
    assert_eq!(filter.matching_triangles(), 4);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1000 {
        let p = random_point(&mut rng, &mesh.bounds());
        let r = point_mesh_distance(p, &mesh, &bvh, Some(&filter)).unwrap();
        assert_eq!(r, brute_force_distance(p, &mesh, Some(&filter)).unwrap());
        assert!(filter.accepts(&mesh, r.triangle_index));
    }
}

#[test]
fn ties_go_to_lowest_triangle_index() {
    let mesh = unit_cube();
    let bvh = Bvh::build(&mesh).unwrap();
    // a cube corner touches several triangles at distance zero
    for corner in [Vec3::ZERO, Vec3::new(1., 1., 1.), Vec3::new(1., 0., 1.)] {
        let r = point_mesh_distance(corner, &mesh, &bvh, None).unwrap();
        assert_eq!(r.distance, 0.0);
        let lowest = (0..mesh.triangle_count())
            .find(|&t| mesh.triangle(t).contains(&corner))
            .unwrap();
        assert_eq!(r.triangle_index, lowest);
    }
}

#[test]
fn zero_distance_only_on_surface() {
    let mesh = unit_cube();
    let bvh = Bvh::build(&mesh).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..500 {
        // points on the top cap
        let p = Vec3::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0), 1.0);
        assert!(point_mesh_distance(p, &mesh, &bvh, None).unwrap().distance <= 1e-12);
        let q = Vec3::new(p.x, p.y, 1.0 + rng.gen_range(1e-6..1.0));
        assert!(point_mesh_distance(q, &mesh, &bvh, None).unwrap().distance > 1e-12);
    }
}
