mod common;

use common::*;
use jacfield::operators::{FrameSet, GradientOperator, OperatorCache, PinnedSolver};
use jacfield::{shapes, Mesh};
use nalgebra::{Matrix2, Rotation3, Unit, Vector3};
use proptest::prelude::*;
use rand::Rng;

/// Cotangent weights from corner angles measured with `acos`.
fn cot_laplacian_dense(mesh: &Mesh) -> Vec<Vec<f64>> {
    let n = mesh.num_vertices();
    let mut l = vec![vec![0.0; n]; n];
    let p = mesh.vertices();
    for t in mesh.triangles() {
        for k in 0..3 {
            let (o, i, j) = (t[k], t[(k + 1) % 3], t[(k + 2) % 3]);
            let (a, b) = (p[i] - p[o], p[j] - p[o]);
            let angle = (a.dot(&b) / (a.norm() * b.norm())).clamp(-1.0, 1.0).acos();
            let w = 0.5 / angle.tan();
            l[i][j] -= w;
            l[j][i] -= w;
            l[i][i] += w;
            l[j][j] += w;
        }
    }
    l
}

fn max_rel_dense_diff(cache: &OperatorCache, oracle: &[Vec<f64>]) -> f64 {
    let dense = cache.laplacian().to_dense();
    let scale = oracle.iter().flatten().map(|x| x.abs()).fold(0.0, f64::max);
    let mut worst = 0.0f64;
    for (r, row) in dense.iter().enumerate() {
        for (c, x) in row.iter().enumerate() {
            worst = worst.max((x - oracle[r][c]).abs());
        }
    }
    worst / scale
}

#[test]
fn axis_aligned_triangle_frame() {
    let m = Mesh::new(vec![v(0., 0., 0.), v(1., 0., 0.), v(0., 1., 0.)], vec![[0, 1, 2]]).unwrap();
    let f = FrameSet::first_edge(&m);
    let [c1, c2] = f.get(0);
    assert!((c1 - v(1., 0., 0.)).norm() < 1e-15);
    assert!((c2 - v(0., 1., 0.)).norm() < 1e-15);
}

#[test]
fn yz_plane_frame_by_hand() {
    let m = Mesh::new(vec![v(0., 0., 0.), v(0., 2., 0.), v(0., 0., 2.)], vec![[0, 1, 2]]).unwrap();
    let [c1, c2] = FrameSet::first_edge(&m).get(0).to_owned();
    assert!((c1 - v(0., 1., 0.)).norm() < 1e-15);
    // n = (1,0,0); n × (0,1,0) = (0,0,1).
    assert!((c2 - v(0., 0., 1.)).norm() < 1e-15);
}

#[test]
fn frames_rotate_with_the_mesh() {
    let mut r = rng(1);
    let mesh = lumpy_sphere(1, &mut r);
    let q = Rotation3::from_axis_angle(&Unit::new_normalize(Vector3::new(0.3, -1.0, 0.5)), 0.7);
    let rotated = mesh.map_vertices(|p| q * p).unwrap();
    let (f, g) = (FrameSet::first_edge(&mesh), FrameSet::first_edge(&rotated));
    for i in 0..mesh.num_triangles() {
        for a in 0..2 {
            assert!((q * f.get(i)[a] - g.get(i)[a]).norm() < 1e-12);
        }
    }
}

#[test]
fn frames_are_oriented_orthonormal_tangent_bases() {
    for mesh in random_meshes(6, 2) {
        let f = FrameSet::first_edge(&mesh);
        for ([c1, c2], n) in f.iter().zip(mesh.normals()) {
            assert!((c1.norm() - 1.0).abs() < 1e-12 && (c2.norm() - 1.0).abs() < 1e-12);
            assert!(c1.dot(c2).abs() < 1e-12);
            assert!(c1.dot(n).abs() < 1e-12 && c2.dot(n).abs() < 1e-12);
            assert!(c1.cross(c2).dot(n) > 0.0);
        }
    }
}

#[test]
fn gradient_of_linear_function_is_the_projected_ambient_gradient() {
    let a = v(0.7, -1.3, 2.1);
    for mesh in random_meshes(6, 3) {
        let frames = FrameSet::first_edge(&mesh);
        let grad = GradientOperator::build(&mesh, &frames).unwrap();
        let g: Vec<f64> = mesh.vertices().iter().map(|p| a.dot(p) + 4.0).collect();
        let out = grad.matrix().mul_dense(&g, 1);
        for (i, [c1, c2]) in frames.iter().enumerate() {
            // Only the tangential part of `a` is visible on the triangle.
            assert!((out[2 * i] - a.dot(c1)).abs() < 1e-10);
            assert!((out[2 * i + 1] - a.dot(c2)).abs() < 1e-10);
        }
    }
}

#[test]
fn planar_gradient_of_3x_plus_2y() {
    let mut r = rng(4);
    let mesh = jittered_square(6, 0.3, &mut r);
    let frames = FrameSet::first_edge(&mesh);
    let grad = GradientOperator::build(&mesh, &frames).unwrap();
    let g: Vec<f64> = mesh.vertices().iter().map(|p| 3.0 * p.x + 2.0 * p.y).collect();
    let out = grad.matrix().mul_dense(&g, 1);
    let aligned = FrameSet::from_columns(&mesh, vec![[v(1., 0., 0.), v(0., 1., 0.)]; mesh.num_triangles()]).unwrap();
    let out_aligned = GradientOperator::build(&mesh, &aligned).unwrap().matrix().mul_dense(&g, 1);
    for (i, [c1, c2]) in frames.iter().enumerate() {
        assert!((out_aligned[2 * i] - 3.0).abs() < 1e-10 && (out_aligned[2 * i + 1] - 2.0).abs() < 1e-10);
        assert!((out[2 * i] - (3.0 * c1.x + 2.0 * c1.y)).abs() < 1e-10);
        assert!((out[2 * i + 1] - (3.0 * c2.x + 2.0 * c2.y)).abs() < 1e-10);
    }
}

#[test]
fn gradient_rows_sum_to_zero() {
    for mesh in random_meshes(6, 5) {
        let grad = GradientOperator::build(&mesh, &FrameSet::first_edge(&mesh)).unwrap();
        let ones = vec![1.0; mesh.num_vertices()];
        let out = grad.matrix().mul_dense(&ones, 1);
        assert!(out.iter().all(|x| x.abs() < 1e-10));
    }
}

#[test]
fn gradient_blocks_match_per_triangle_edge_solve() {
    let mut r = rng(6);
    for mesh in random_meshes(6, 7) {
        let cache = OperatorCache::build(&mesh).unwrap();
        let phi = random_map(mesh.num_vertices(), 3, &mut r);
        let out = cache.grad().matrix().mul_dense(phi.as_slice(), 3);
        let p = mesh.vertices();
        for (i, t) in mesh.triangles().iter().enumerate() {
            let [c1, c2] = cache.frames().get(i);
            let (e1, e2) = (p[t[1]] - p[t[0]], p[t[2]] - p[t[0]]);
            // Edge vectors in frame coordinates, column-wise.
            let eb = Matrix2::new(e1.dot(c1), e2.dot(c1), e1.dot(c2), e2.dot(c2));
            let inv = eb.try_inverse().unwrap();
            for c in 0..3 {
                let de = [phi.row(t[1])[c] - phi.row(t[0])[c], phi.row(t[2])[c] - phi.row(t[0])[c]];
                let j0 = de[0] * inv[(0, 0)] + de[1] * inv[(1, 0)];
                let j1 = de[0] * inv[(0, 1)] + de[1] * inv[(1, 1)];
                let (g0, g1) = (out[(2 * i) * 3 + c], out[(2 * i + 1) * 3 + c]);
                let scale = j0.abs().max(j1.abs()).max(1.0);
                assert!((g0 - j0).abs() < 1e-9 * scale && (g1 - j1).abs() < 1e-9 * scale);
            }
        }
    }
}

#[test]
fn mass_repeats_each_area_twice() {
    let mesh = lumpy_sphere(1, &mut rng(8));
    let cache = OperatorCache::build(&mesh).unwrap();
    for (i, a) in mesh.areas().iter().enumerate() {
        assert_eq!(cache.mass()[2 * i], *a);
        assert_eq!(cache.mass()[2 * i + 1], *a);
    }
}

#[test]
fn laplacian_matches_edgewise_cotangent_assembly_on_random_meshes() {
    for mesh in random_meshes(10, 9) {
        let cache = OperatorCache::build(&mesh).unwrap();
        let err = max_rel_dense_diff(&cache, &cot_laplacian_dense(&mesh));
        assert!(err < 1e-9, "relative difference {err:.3e}");
    }
}

#[test]
fn unit_square_diagonal_weight_and_hand_values() {
    let mesh = unit_square();
    let cache = OperatorCache::build(&mesh).unwrap();
    let l = cache.laplacian();
    // Both angles opposite the diagonal are 90°.
    assert!(l.get(0, 2).abs() < 1e-15);
    // Outer edges see one 45° corner: -cot(45°)/2.
    for (i, j) in [(0, 1), (1, 2), (2, 3), (3, 0)] {
        assert!((l.get(i, j) + 0.5).abs() < 1e-14);
    }
    assert!((l.get(0, 0) - 1.0).abs() < 1e-14);
}

#[test]
fn equilateral_off_diagonals() {
    let cache = OperatorCache::build(&equilateral()).unwrap();
    let expect = -1.0 / (2.0 * 3f64.sqrt());
    for (i, j) in [(0, 1), (1, 2), (0, 2)] {
        assert!((cache.laplacian().get(i, j) - expect).abs() < 1e-14);
    }
}

#[test]
fn laplacian_is_symmetric_psd_with_constant_null_space() {
    let mut r = rng(10);
    for mesh in random_meshes(6, 11) {
        let cache = OperatorCache::build(&mesh).unwrap();
        let l = cache.laplacian();
        assert!(l.asymmetry() < 1e-10);
        let ones = vec![1.0; mesh.num_vertices()];
        assert!(l.mul_dense(&ones, 1).iter().all(|x| x.abs() < 1e-9));
        for _ in 0..5 {
            let x: Vec<f64> = (0..mesh.num_vertices()).map(|_| r.random_range(-1.0..1.0)).collect();
            assert!(dot(&x, &l.mul_dense(&x, 1)) >= -1e-12);
        }
    }
}

#[test]
fn pinned_solve_inverts_the_laplacian_up_to_the_pin() {
    let mut r = rng(12);
    for mesh in random_meshes(6, 13) {
        let cache = OperatorCache::build(&mesh).unwrap();
        let n = mesh.num_vertices();
        let y: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
        let b = cache.laplacian().mul_dense(&y, 1);
        let x = cache.solver().solve(&b, 1);
        let expect: Vec<f64> = y.iter().map(|t| t - y[cache.pin()]).collect();
        assert!(rel_diff(&x, &expect) < 1e-9);
    }
}

#[test]
fn pinned_residual_on_random_right_hand_sides() {
    let mut r = rng(14);
    for mesh in random_meshes(6, 15) {
        let cache = OperatorCache::build(&mesh).unwrap();
        let n = mesh.num_vertices();
        let b: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
        let x = cache.solver().solve(&b, 1);
        assert_eq!(x[cache.pin()], 0.0);
        let lx = cache.laplacian().mul_dense(&x, 1);
        let (mut num, mut den) = (0.0, 0.0);
        for j in (0..n).filter(|&j| j != cache.pin()) {
            num += (lx[j] - b[j]).powi(2);
            den += b[j] * b[j];
        }
        assert!((num / den).sqrt() < 1e-10);
    }
}

#[test]
fn square_pinned_system_matches_dense_elimination() {
    let mesh = unit_square();
    let cache = OperatorCache::build(&mesh).unwrap();
    let dense = cache.laplacian().to_dense();
    let b = vec![0.0, 1.0, -2.0, 0.5];
    let reduced: Vec<Vec<f64>> = (1..4).map(|i| (1..4).map(|j| dense[i][j]).collect()).collect();
    let hand = gauss_solve(reduced, b[1..].to_vec());
    let x = cache.solver().solve(&b, 1);
    assert_eq!(x[0], 0.0);
    for k in 0..3 {
        assert!((x[k + 1] - hand[k]).abs() < 1e-12);
    }
}

#[test]
fn zero_right_hand_side_solves_to_zero() {
    let mesh = lumpy_sphere(1, &mut rng(16));
    let cache = OperatorCache::build(&mesh).unwrap();
    assert!(cache.solver().solve(&vec![0.0; 3 * mesh.num_vertices()], 3).iter().all(|&x| x == 0.0));
}

#[test]
fn repeated_and_concurrent_solves_are_bit_identical() {
    let mut r = rng(17);
    let mesh = shapes::icosphere(2).unwrap();
    let cache = OperatorCache::build(&mesh).unwrap();
    let n = mesh.num_vertices();
    let rhs: Vec<Vec<f64>> = (0..4).map(|_| (0..3 * n).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
    let serial: Vec<Vec<f64>> = rhs.iter().map(|b| cache.solver().solve(b, 3)).collect();
    let again = cache.solver().solve(&rhs[0], 3);
    assert_eq!(again, serial[0]);
    let parallel: Vec<Vec<f64>> = std::thread::scope(|s| {
        let handles: Vec<_> = rhs.iter().map(|b| s.spawn(|| cache.solver().solve(b, 3))).collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    assert_eq!(parallel, serial);
}

#[test]
fn factorizing_with_another_pin_fixes_that_vertex() {
    let mesh = lumpy_sphere(1, &mut rng(18));
    let cache = OperatorCache::build(&mesh).unwrap();
    let solver = PinnedSolver::factorize(cache.laplacian(), 5).unwrap();
    let b: Vec<f64> = (0..mesh.num_vertices()).map(|j| (j as f64).sin()).collect();
    let x = solver.solve(&b, 1);
    assert_eq!(solver.pin(), 5);
    assert_eq!(x[5], 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn laplacian_invariants_hold_on_jittered_grids(seed in any::<u64>(), n in 2usize..7) {
        let mesh = jittered_square(n, 0.35, &mut rng(seed));
        let cache = OperatorCache::build(&mesh).unwrap();
        prop_assert!(cache.laplacian().asymmetry() < 1e-10);
        let row_sums = cache.laplacian().mul_dense(&vec![1.0; mesh.num_vertices()], 1);
        prop_assert!(row_sums.iter().all(|x| x.abs() < 1e-9));
        prop_assert!(max_rel_dense_diff(&cache, &cot_laplacian_dense(&mesh)) < 1e-9);
    }

    #[test]
    fn identity_map_reproduces_frames(seed in any::<u64>()) {
        let mesh = lumpy_sphere(1, &mut rng(seed));
        let cache = OperatorCache::build(&mesh).unwrap();
        let pts: Vec<f64> = mesh.vertices().iter().flat_map(|p| [p.x, p.y, p.z]).collect();
        let j = cache.grad().matrix().mul_dense(&pts, 3);
        for (i, b) in cache.frames().iter().enumerate() {
            for a in 0..2 {
                for c in 0..3 {
                    prop_assert!((j[(2 * i + a) * 3 + c] - b[a][c]).abs() < 1e-10);
                }
            }
        }
    }
}
