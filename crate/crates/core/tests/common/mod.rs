#![allow(dead_code)]

use jacfield::poisson::{JacobianField, VertexMap};
use jacfield::{shapes, Mesh, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn v(x: f64, y: f64, z: f64) -> Vec3 {
    Vec3::new(x, y, z)
}

pub fn unit_square() -> Mesh {
    Mesh::new(vec![v(0., 0., 0.), v(1., 0., 0.), v(1., 1., 0.), v(0., 1., 0.)], vec![[0, 1, 2], [0, 2, 3]]).unwrap()
}

pub fn equilateral() -> Mesh {
    Mesh::new(vec![v(0., 0., 0.), v(1., 0., 0.), v(0.5, 3f64.sqrt() / 2.0, 0.)], vec![[0, 1, 2]]).unwrap()
}

/// Planar grid over `[0,1]²` with interior vertices jittered in-plane.
pub fn jittered_square(n: usize, amount: f64, rng: &mut impl Rng) -> Mesh {
    let base = shapes::unit_square_grid(n).unwrap();
    let h = amount / n as f64;
    let offsets: Vec<[f64; 2]> = (0..base.num_vertices()).map(|_| [rng.random_range(-h..h), rng.random_range(-h..h)]).collect();
    let verts = base
        .vertices()
        .iter()
        .zip(&offsets)
        .map(|(p, o)| {
            let interior = p.x > 1e-9 && p.x < 1.0 - 1e-9 && p.y > 1e-9 && p.y < 1.0 - 1e-9;
            if interior {
                v(p.x + o[0], p.y + o[1], 0.0)
            } else {
                *p
            }
        })
        .collect();
    Mesh::new(verts, base.triangles().to_vec()).unwrap()
}

/// Curved grid with jittered heights.
pub fn bumpy_grid(n: usize, rng: &mut impl Rng) -> Mesh {
    let base = shapes::wavy_grid(n, rng.random_range(0.1..0.4), rng.random_range(1.0..3.0)).unwrap();
    let verts = base.vertices().iter().map(|p| p + v(0.0, 0.0, rng.random_range(-0.02..0.02))).collect();
    Mesh::new(verts, base.triangles().to_vec()).unwrap()
}

/// Icosphere with radially perturbed vertices.
pub fn lumpy_sphere(level: usize, rng: &mut impl Rng) -> Mesh {
    let base = shapes::icosphere(level).unwrap();
    let verts = base.vertices().iter().map(|p| p * rng.random_range(0.85..1.15)).collect();
    Mesh::new(verts, base.triangles().to_vec()).unwrap()
}

/// A varied family of small valid meshes, open and closed.
pub fn random_meshes(count: usize, seed: u64) -> Vec<Mesh> {
    let mut r = rng(seed);
    (0..count)
        .map(|k| match k % 3 {
            0 => jittered_square(r.random_range(3..8), 0.3, &mut r),
            1 => bumpy_grid(r.random_range(3..8), &mut r),
            _ => lumpy_sphere(r.random_range(1..3), &mut r),
        })
        .collect()
}

pub fn random_map(rows: usize, dim: usize, rng: &mut impl Rng) -> VertexMap {
    VertexMap::from_rows(rows, dim, (0..rows * dim).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

pub fn random_field(triangles: usize, dim: usize, rng: &mut impl Rng) -> JacobianField {
    JacobianField::from_stack(triangles, dim, (0..2 * triangles * dim).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&d) / norm(b).max(f64::MIN_POSITIVE)
}

/// Solves a dense square system by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    x
}
