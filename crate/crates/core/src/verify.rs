//! Numerical self-checks of the operator stack on a user mesh.

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fields::{restrict, ExtrinsicField};
use crate::mesh::Mesh;
use crate::operators::{FrameSet, OperatorCache};
use crate::poisson::{compute_jacobians, poisson_adjoint, poisson_solve, JacobianField, VertexMap};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: &str, residual: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            residual,
            tolerance,
            passed: residual.is_finite() && residual <= tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub vertices: usize,
    pub triangles: usize,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Cotangent Laplacian assembled edge by edge from corner angles.
pub fn cotangent_laplacian(mesh: &Mesh) -> CsrMatrix {
    let v = mesh.vertices();
    let mut trips = Vec::with_capacity(mesh.num_triangles() * 12);
    for t in mesh.triangles() {
        for k in 0..3 {
            let (o, i, j) = (t[k], t[(k + 1) % 3], t[(k + 2) % 3]);
            let (a, b) = (v[i] - v[o], v[j] - v[o]);
            let w = 0.5 * a.dot(&b) / a.cross(&b).norm();
            trips.extend([(i, j, -w), (j, i, -w), (i, i, w), (j, j, w)]);
        }
    }
    CsrMatrix::from_triplets(mesh.num_vertices(), mesh.num_vertices(), &trips)
}

fn max_abs(xs: impl Iterator<Item = f64>) -> f64 {
    xs.map(f64::abs).fold(0.0, f64::max)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Smooth random map: per-coordinate sums of low-frequency sinusoids.
pub fn smooth_map(mesh: &Mesh, dim: usize, rng: &mut impl Rng) -> VertexMap {
    let scale = 1.0 / mesh.bounding_box_diagonal().max(1e-12);
    let coeffs: Vec<[f64; 7]> = (0..dim).map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0))).collect();
    let mut data = Vec::with_capacity(mesh.num_vertices() * dim);
    for p in mesh.vertices() {
        let q = p * scale;
        for c in &coeffs {
            data.push(c[0] * q.x + c[1] * q.y + c[2] * q.z + 0.3 * (c[3] * 3.0 * q.x + c[4]).sin() + 0.3 * (c[5] * 3.0 * q.y + c[6] * q.z).cos());
        }
    }
    VertexMap::from_rows(mesh.num_vertices(), dim, data).expect("finite map")
}

/// Relative distance between two maps after removing the mean offset.
pub fn relative_error_up_to_translation(a: &VertexMap, b: &VertexMap) -> f64 {
    let dim = a.dim();
    let n = a.rows() as f64;
    let mut shift = vec![0.0; dim];
    for j in 0..a.rows() {
        for c in 0..dim {
            shift[c] += (a.row(j)[c] - b.row(j)[c]) / n;
        }
    }
    let mut num = 0.0;
    let mut den = 0.0;
    let mut mean_b = vec![0.0; dim];
    for j in 0..b.rows() {
        for c in 0..dim {
            mean_b[c] += b.row(j)[c] / n;
        }
    }
    for j in 0..a.rows() {
        for c in 0..dim {
            num += (a.row(j)[c] - b.row(j)[c] - shift[c]).powi(2);
            den += (b.row(j)[c] - mean_b[c]).powi(2);
        }
    }
    (num / den.max(f64::MIN_POSITIVE)).sqrt()
}

/// Runs the check suite with a deterministic random stream.
pub fn verify_mesh(mesh: &Mesh, seed: u64) -> Result<VerifyReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cache = OperatorCache::build(mesh)?;
    let mut checks = Vec::new();

    let oracle = cotangent_laplacian(mesh);
    let lap = cache.laplacian();
    let scale = max_abs(oracle.values().iter().copied()).max(f64::MIN_POSITIVE);
    let mut diff = 0.0f64;
    for r in 0..mesh.num_vertices() {
        for (c, x) in lap.row(r) {
            diff = diff.max((x - oracle.get(r, c)).abs());
        }
        for (c, x) in oracle.row(r) {
            diff = diff.max((x - lap.get(r, c)).abs());
        }
    }
    checks.push(Check::new("cotangent laplacian matches edge-wise assembly", diff / scale, 1e-9));

    let mut worst = 0.0f64;
    for _ in 0..5 {
        let map = smooth_map(mesh, 3, &mut rng);
        let back = poisson_solve(&cache, &compute_jacobians(&cache, &map)?)?;
        worst = worst.max(relative_error_up_to_translation(&back, &map));
    }
    checks.push(Check::new("poisson round trip", worst, 1e-8));

    let (t, v) = (mesh.num_triangles(), mesh.num_vertices());
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let m = JacobianField::from_stack(t, 3, (0..2 * t * 3).map(|_| rng.random_range(-1.0..1.0)).collect())?;
        let g = VertexMap::from_rows(v, 3, (0..v * 3).map(|_| rng.random_range(-1.0..1.0)).collect())?;
        let lhs = dot(g.as_slice(), poisson_solve(&cache, &m)?.as_slice());
        let rhs = dot(poisson_adjoint(&cache, &g)?.as_slice(), m.as_slice());
        worst = worst.max((lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE));
    }
    checks.push(Check::new("poisson adjoint identity", worst, 1e-9));

    let field = ExtrinsicField::new(
        (0..t)
            .map(|_| Matrix3::from_fn(|_, _| rng.random_range(-1.0..1.0)) + Matrix3::identity())
            .collect(),
    );
    let base = poisson_solve(&cache, &restrict(&field, cache.frames(), 3)?)?;
    let angles: Vec<f64> = (0..t).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
    let rotated = OperatorCache::build_with_frames(mesh, FrameSet::first_edge(mesh).rotated(&angles), cache.pin())?;
    let other = poisson_solve(&rotated, &restrict(&field, rotated.frames(), 3)?)?;
    checks.push(Check::new("frame invariance", relative_error_up_to_translation(&other, &base), 1e-8));

    Ok(VerifyReport {
        vertices: v,
        triangles: t,
        checks,
    })
}
