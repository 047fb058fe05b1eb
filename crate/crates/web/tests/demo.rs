use jacfield::VertexMap;
use jacfield_web::Demo;

fn max_offset(a: &VertexMap, b: &VertexMap) -> f64 {
    a.to_points().iter().zip(b.to_points()).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max)
}

#[test]
fn zero_twist_and_zero_bend_are_the_identity() {
    let d = Demo::build("bar").unwrap();
    let rest = VertexMap::from_points(d.mesh().vertices());
    assert!(max_offset(&d.twist_map(0.0).unwrap(), &rest) < 1e-9);
    assert!(max_offset(&d.bend_map(0.0, 10).unwrap(), &rest) < 1e-9);
}

#[test]
fn twist_keeps_distances_to_the_axis_on_a_cylinder() {
    let d = Demo::build("cylinder").unwrap();
    let phi = d.twist_map(90.0).unwrap().to_points();
    let src = d.mesh().vertices();
    let n = phi.len() as f64;
    let (cy, cz) = (phi.iter().map(|p| p.y).sum::<f64>() / n, phi.iter().map(|p| p.z).sum::<f64>() / n);
    let (sy, sz) = (src.iter().map(|p| p.y).sum::<f64>() / n, src.iter().map(|p| p.z).sum::<f64>() / n);
    let mut moved = 0.0f64;
    for (p, q) in phi.iter().zip(src) {
        let r = (p.y - cy).hypot(p.z - cz);
        let r0 = (q.y - sy).hypot(q.z - sz);
        // Pure rotations carry no twist shear, so the least-squares fit
        // pulls the surface in slightly.
        assert!((r - r0).abs() < 0.1 * r0.max(0.1), "{r} vs {r0}");
        moved = moved.max((p - q).norm());
    }
    assert!(moved > 0.2, "{moved}");
}

#[test]
fn bend_holds_the_left_end_and_moves_the_tip() {
    let d = Demo::build("bar").unwrap();
    let phi = d.bend_map(45.0, 30).unwrap().to_points();
    let src = d.mesh().vertices();
    let (lo, hi) = src.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.x), b.max(p.x)));
    let left: Vec<usize> = (0..src.len()).filter(|&i| (src[i].x - lo) / (hi - lo) < 0.1).collect();
    assert!(!left.is_empty());
    for i in left {
        assert!((phi[i] - src[i]).norm() < 1e-12);
    }
    let tip = (0..src.len()).max_by(|&a, &b| src[a].x.total_cmp(&src[b].x)).unwrap();
    assert!((phi[tip] - src[tip]).norm() > 0.05);
}

#[test]
fn verify_reports_four_passing_checks() {
    let d = Demo::build("torus").unwrap();
    let json: serde_json::Value = serde_json::from_str(&d.verify(3).unwrap()).unwrap();
    let checks = json["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 4);
    assert!(checks.iter().all(|c| c["passed"] == true), "{json}");
    assert_eq!(d.triangles().len(), 3 * d.triangle_count());
    assert_eq!(d.positions().len(), 3 * d.vertex_count());
}

#[test]
fn unknown_shapes_are_rejected() {
    assert!(Demo::build("teapot").is_err());
}
