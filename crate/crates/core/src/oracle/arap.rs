//! As-rigid-as-possible surface deformation with per-vertex cells
//! (spokes and rims) and hard positional handles.

use nalgebra::{Matrix3, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Vec3};
use crate::poisson::VertexMap;
use crate::sparse::{CsrMatrix, PrincipalLu};

/// Constrained vertices and their target positions.
#[derive(Debug, Clone, PartialEq)]
pub struct HandleSet {
    pub indices: Vec<usize>,
    pub targets: Vec<Vec3>,
}

impl HandleSet {
    pub fn validate(&self, num_vertices: usize) -> Result<()> {
        if self.indices.len() != self.targets.len() {
            return Err(Error::shape("HandleSet", self.indices.len(), self.targets.len()));
        }
        if self.indices.len() < 2 {
            return Err(Error::Invalid("at least two handle vertices are required".into()));
        }
        let mut seen = vec![false; num_vertices];
        for &i in &self.indices {
            if i >= num_vertices || std::mem::replace(&mut seen[i], true) {
                return Err(Error::Invalid(format!("handle index {i} is invalid or repeated")));
            }
        }
        let first = self.targets[0];
        let spread = self.targets.iter().map(|t| (t - first).norm()).fold(0.0, f64::max);
        if !(spread > 0.0) || self.targets.iter().any(|t| !t.iter().all(|x| x.is_finite())) {
            return Err(Error::Invalid("handle targets are coincident or non-finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct ArapConfig {
    pub max_iters: usize,
    /// Stop once an iteration lowers the energy by less than this fraction.
    pub rel_tol: f64,
}

impl Default for ArapConfig {
    fn default() -> Self {
        Self {
            max_iters: 200,
            rel_tol: 1e-7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ArapResult {
    pub positions: VertexMap,
    /// Energy of the initial guess, then after every iteration.
    pub energies: Vec<f64>,
}

/// Half-cotangent edge weights of each triangle; entry `k` belongs to the
/// edge opposite corner `k`.
pub fn half_cot_weights(mesh: &Mesh) -> Vec<[f64; 3]> {
    let v = mesh.vertices();
    mesh.triangles()
        .iter()
        .map(|t| {
            let mut w = [0.0; 3];
            for k in 0..3 {
                let (a, b, c) = (v[t[k]], v[t[(k + 1) % 3]], v[t[(k + 2) % 3]]);
                let (u, s) = (b - a, c - a);
                w[k] = 0.5 * u.dot(&s) / u.cross(&s).norm();
            }
            w
        })
        .collect()
}

/// Directed edges of triangle corner `k`: the edge opposite it, `(i, j)`.
fn opposite_edge(t: &[usize; 3], k: usize) -> (usize, usize) {
    (t[(k + 1) % 3], t[(k + 2) % 3])
}

/// Precomputed weights and the factorized constrained system for one mesh
/// and handle index set.
#[derive(Debug)]
pub struct ArapSolver<'a> {
    mesh: &'a Mesh,
    weights: Vec<[f64; 3]>,
    handles: Vec<usize>,
    is_handle: Vec<bool>,
    system: CsrMatrix,
    lu: PrincipalLu,
}

impl<'a> ArapSolver<'a> {
    pub fn new(mesh: &'a Mesh, handle_indices: &[usize]) -> Result<Self> {
        let n = mesh.num_vertices();
        let weights = half_cot_weights(mesh);
        let mut trips = Vec::with_capacity(12 * mesh.num_triangles());
        for (t, w) in mesh.triangles().iter().zip(&weights) {
            for k in 0..3 {
                let (i, j) = opposite_edge(t, k);
                // each triangle edge appears in the three cells of its triangle
                let c = 3.0 * w[k];
                trips.extend_from_slice(&[(i, i, c), (j, j, c), (i, j, -c), (j, i, -c)]);
            }
        }
        let system = CsrMatrix::from_triplets(n, n, &trips);
        let mut is_handle = vec![false; n];
        for &h in handle_indices {
            is_handle[h] = true;
        }
        let free: Vec<usize> = (0..n).filter(|&i| !is_handle[i]).collect();
        let lu = PrincipalLu::factorize(&system, free)?;
        Ok(Self {
            mesh,
            weights,
            handles: handle_indices.to_vec(),
            is_handle,
            system,
            lu,
        })
    }

    /// Best rotation per vertex cell for deformed positions `p`.
    pub fn fit_rotations(&self, p: &[Vec3]) -> Vec<Matrix3<f64>> {
        let rest = self.mesh.vertices();
        let mut cov = vec![Matrix3::<f64>::zeros(); rest.len()];
        for (t, w) in self.mesh.triangles().iter().zip(&self.weights) {
            let mut s = Matrix3::zeros();
            for k in 0..3 {
                let (i, j) = opposite_edge(t, k);
                s += w[k] * (rest[i] - rest[j]) * (p[i] - p[j]).transpose();
            }
            for &v in t {
                cov[v] += s;
            }
        }
        cov.iter().map(closest_rotation).collect()
    }

    /// Energy `Σ_cells Σ_edges w ‖e′ − R e‖²` for given positions and rotations.
    pub fn energy(&self, p: &[Vec3], rot: &[Matrix3<f64>]) -> f64 {
        let rest = self.mesh.vertices();
        let mut e = 0.0;
        for (t, w) in self.mesh.triangles().iter().zip(&self.weights) {
            for &cell in t {
                for k in 0..3 {
                    let (i, j) = opposite_edge(t, k);
                    e += w[k] * ((p[i] - p[j]) - rot[cell] * (rest[i] - rest[j])).norm_squared();
                }
            }
        }
        e
    }

    /// Positions minimizing the energy for fixed rotations, with handle
    /// vertices held at `targets`.
    pub fn global_step(&self, rot: &[Matrix3<f64>], targets: &[Vec3]) -> Vec<Vec3> {
        let rest = self.mesh.vertices();
        let n = rest.len();
        let mut rhs = vec![Vec3::zeros(); n];
        for (t, w) in self.mesh.triangles().iter().zip(&self.weights) {
            let rsum = rot[t[0]] + rot[t[1]] + rot[t[2]];
            for k in 0..3 {
                let (i, j) = opposite_edge(t, k);
                let r = w[k] * (rsum * (rest[i] - rest[j]));
                rhs[i] += r;
                rhs[j] -= r;
            }
        }
        let mut p = rest.to_vec();
        for (&h, &x) in self.handles.iter().zip(targets) {
            p[h] = x;
        }
        // move the known handle columns to the right-hand side
        let free = self.lu.keep();
        let mut b = Vec::with_capacity(3 * free.len());
        for &i in free {
            let mut r = rhs[i];
            for (c, v) in self.system.row(i) {
                if self.is_handle[c] {
                    r -= v * p[c];
                }
            }
            b.extend_from_slice(r.as_slice());
        }
        let x = self.lu.solve(&b, 3);
        for (k, &i) in free.iter().enumerate() {
            p[i] = Vec3::new(x[3 * k], x[3 * k + 1], x[3 * k + 2]);
        }
        p
    }

    /// Local/global iterations from `initial`, which must already satisfy
    /// the handle constraints.
    pub fn solve(&self, initial: Vec<Vec3>, targets: &[Vec3], config: &ArapConfig) -> Result<ArapResult> {
        if config.max_iters == 0 {
            return Err(Error::Invalid("ARAP needs at least one iteration".into()));
        }
        let mut p = initial;
        let mut rot = self.fit_rotations(&p);
        let mut energies = vec![self.energy(&p, &rot)];
        for _ in 0..config.max_iters {
            p = self.global_step(&rot, targets);
            rot = self.fit_rotations(&p);
            let e = self.energy(&p, &rot);
            if !e.is_finite() {
                return Err(Error::Numeric("ARAP energy diverged".into()));
            }
            let prev = *energies.last().unwrap();
            energies.push(e);
            if prev - e <= config.rel_tol * prev {
                break;
            }
        }
        Ok(ArapResult {
            positions: VertexMap::from_points(&p),
            energies,
        })
    }
}

/// Rotation maximizing `tr(R S)` for a cell covariance `S = Σ w e e′ᵀ`.
pub fn closest_rotation(s: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = SVD::new(*s, true, true);
    let (mut u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut r = v_t.transpose() * u.transpose();
    if r.determinant() < 0.0 {
        let smallest = svd.singular_values.imin();
        u.column_mut(smallest).neg_mut();
        r = v_t.transpose() * u.transpose();
    }
    r
}

/// Best rigid motion `x ↦ Q x + t` taking `from` onto `to` (least squares).
pub fn rigid_fit(from: &[Vec3], to: &[Vec3]) -> (Matrix3<f64>, Vec3) {
    let n = from.len() as f64;
    let cf = from.iter().sum::<Vec3>() / n;
    let ct = to.iter().sum::<Vec3>() / n;
    let mut s = Matrix3::zeros();
    for (a, b) in from.iter().zip(to) {
        s += (a - cf) * (b - ct).transpose();
    }
    let q = closest_rotation(&s);
    (q, ct - q * cf)
}

/// Deforms `mesh` so the handles reach their targets. The initial guess is
/// the rigid motion best matching the handles.
pub fn arap_deform(mesh: &Mesh, handles: &HandleSet, config: &ArapConfig) -> Result<ArapResult> {
    handles.validate(mesh.num_vertices())?;
    let solver = ArapSolver::new(mesh, &handles.indices)?;
    let rest: Vec<Vec3> = handles.indices.iter().map(|&i| mesh.vertices()[i]).collect();
    let (q, t) = rigid_fit(&rest, &handles.targets);
    let mut init: Vec<Vec3> = mesh.vertices().iter().map(|p| q * p + t).collect();
    for (&h, &x) in handles.indices.iter().zip(&handles.targets) {
        init[h] = x;
    }
    solver.solve(init, &handles.targets, config)
}
