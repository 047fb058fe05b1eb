mod support;

use jacfield::{shapes, Mesh, Vec3};
use rand::{Rng, SeedableRng};
use support::remesh::{closest_barycentric, closest_points, decimate, loop_subdivide};

fn creature() -> Mesh {
    shapes::creature(2).unwrap()
}

#[test]
fn loop_subdivision_quadruples_triangles_and_keeps_topology() {
    let m = creature();
    let s = loop_subdivide(&m);
    assert_eq!(s.num_triangles(), 4 * m.num_triangles());
    assert_eq!(s.num_vertices(), m.num_vertices() + m.edges().len());
    assert_eq!(s.euler_characteristic(), m.euler_characteristic());
}

#[test]
fn loop_subdivision_keeps_planar_interiors_planar_and_boundaries_fixed_in_plane() {
    let grid = shapes::unit_square_grid(4).unwrap();
    let s = loop_subdivide(&grid);
    assert!(s.vertices().iter().all(|p| p.z.abs() < 1e-15));
    assert_eq!(s.boundary_loops().len(), 1);
}

#[test]
fn loop_vertex_rule_matches_hand_value_on_an_octahedron() {
    let v = |x: f64, y: f64, z: f64| Vec3::new(x, y, z);
    let pts = vec![v(1., 0., 0.), v(-1., 0., 0.), v(0., 1., 0.), v(0., -1., 0.), v(0., 0., 1.), v(0., 0., -1.)];
    let tris = vec![[0, 2, 4], [2, 1, 4], [1, 3, 4], [3, 0, 4], [2, 0, 5], [1, 2, 5], [3, 1, 5], [0, 3, 5]];
    let oct = Mesh::new(pts, tris).unwrap();
    let s = loop_subdivide(&oct);
    // valence 4: beta = 3/32, neighbors sum to zero
    let expect = 1.0 - 4.0 * 3.0 / 32.0;
    assert!((s.vertices()[0] - v(expect, 0., 0.)).norm() < 1e-15);
    // edge (0, 2): 3/8 (e0 + e2) + 1/8 (e4 + e5)
    let e = v(0.375, 0.375, 0.0);
    assert!(s.vertices()[6..].iter().any(|p| (p - e).norm() < 1e-15));
}

#[test]
fn decimation_halves_the_mesh_and_stays_valid() {
    let m = shapes::creature(3).unwrap();
    let d = decimate(&m, m.num_triangles() / 2);
    assert!(d.num_triangles() <= m.num_triangles() / 2 + 2);
    assert!(d.num_triangles() >= m.num_triangles() / 2 - 2);
    assert_eq!(d.euler_characteristic(), m.euler_characteristic());
    for p in d.vertices() {
        let nearest = m.vertices().iter().map(|q| (p - q).norm()).fold(f64::INFINITY, f64::min);
        assert!(nearest < 0.2 * m.bounding_box_diagonal());
    }
}

#[test]
fn closest_point_matches_dense_sampling() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let mut r = || Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    for _ in 0..50 {
        let (a, b, c, p) = (r(), r(), r(), r());
        let w = closest_barycentric(&p, &a, &b, &c);
        assert!(w.iter().all(|&x| x >= -1e-12) && (w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let best = a * w[0] + b * w[1] + c * w[2];
        let n = 200;
        let mut brute = f64::INFINITY;
        for i in 0..=n {
            for j in 0..=n - i {
                let (u, v) = (i as f64 / n as f64, j as f64 / n as f64);
                let q = a * (1.0 - u - v) + b * u + c * v;
                brute = brute.min((q - p).norm());
            }
        }
        assert!((best - p).norm() <= brute + 1e-12);
        assert!(brute - (best - p).norm() < 1e-2);
    }
}

#[test]
fn mesh_vertices_are_their_own_closest_points() {
    let m = creature();
    for (k, (t, w)) in closest_points(&m, m.vertices()).into_iter().enumerate() {
        let tri = m.triangles()[t];
        let p = m.vertices()[tri[0]] * w[0] + m.vertices()[tri[1]] * w[1] + m.vertices()[tri[2]] * w[2];
        assert!((p - m.vertices()[k]).norm() < 1e-12);
    }
}
