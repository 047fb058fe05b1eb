//! Disk parameterization: Tutte embedding, local/global 2D ARAP, and 2D
//! Procrustes alignment.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{distortion_report, DistortionReport, MapMode};
use crate::mesh::Mesh;
use crate::operators::OperatorCache;
use crate::poisson::{compute_jacobians, poisson_solve, JacobianField, VertexMap};
use crate::sparse::{CsrMatrix, PrincipalLu};

/// Boundary pinned to the unit circle by arc length, interior vertices at
/// the uniform average of their neighbors.
pub fn tutte_embed(mesh: &Mesh) -> Result<VertexMap> {
    mesh.check_disk()?;
    let n = mesh.num_vertices();
    let boundary = mesh.boundary_loops().swap_remove(0);
    let verts = mesh.vertices();
    let lens: Vec<f64> = (0..boundary.len())
        .map(|k| (verts[boundary[(k + 1) % boundary.len()]] - verts[boundary[k]]).norm())
        .collect();
    let total: f64 = lens.iter().sum();
    let mut uv = vec![0.0; 2 * n];
    let mut on_boundary = vec![false; n];
    let mut acc = 0.0;
    for (k, &b) in boundary.iter().enumerate() {
        let theta = TAU * acc / total;
        uv[2 * b] = theta.cos();
        uv[2 * b + 1] = theta.sin();
        on_boundary[b] = true;
        acc += lens[k];
    }
    let neighbors = mesh.vertex_neighbors();
    let interior: Vec<usize> = (0..n).filter(|&i| !on_boundary[i]).collect();
    if !interior.is_empty() {
        let mut trips = Vec::new();
        for &i in &interior {
            trips.push((i, i, neighbors[i].len() as f64));
            for &j in &neighbors[i] {
                trips.push((i, j, -1.0));
            }
        }
        let lap = CsrMatrix::from_triplets(n, n, &trips);
        let lu = PrincipalLu::factorize(&lap, interior.clone())?;
        let mut rhs = Vec::with_capacity(2 * interior.len());
        for &i in &interior {
            let mut r = [0.0; 2];
            for &j in neighbors[i].iter().filter(|&&j| on_boundary[j]) {
                r[0] += uv[2 * j];
                r[1] += uv[2 * j + 1];
            }
            rhs.extend_from_slice(&r);
        }
        let x = lu.solve(&rhs, 2);
        for (k, &i) in interior.iter().enumerate() {
            uv[2 * i] = x[2 * k];
            uv[2 * i + 1] = x[2 * k + 1];
        }
    }
    VertexMap::from_rows(n, 2, uv)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct ParamConfig {
    pub max_iters: usize,
    pub rel_tol: f64,
}

impl Default for ParamConfig {
    fn default() -> Self {
        Self {
            max_iters: 300,
            rel_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ParamResult {
    pub uv: VertexMap,
    /// Energy of the initial map, then after every iteration.
    pub energies: Vec<f64>,
    pub report: DistortionReport,
}

/// Nearest rotation to each 2×2 jacobian block, in the same stacked layout.
pub fn nearest_rotations(jac: &JacobianField) -> JacobianField {
    let mut out = JacobianField::zeros(jac.num_triangles(), 2);
    for i in 0..jac.num_triangles() {
        let theta = (jac.get(i, 1, 0) - jac.get(i, 0, 1)).atan2(jac.get(i, 0, 0) + jac.get(i, 1, 1));
        let (s, c) = theta.sin_cos();
        out.set(i, 0, 0, c);
        out.set(i, 0, 1, -s);
        out.set(i, 1, 0, s);
        out.set(i, 1, 1, c);
    }
    out
}

/// `Σ |t_i| ‖J_i − R_i‖²`.
pub fn field_energy(cache: &OperatorCache, jac: &JacobianField, target: &JacobianField) -> f64 {
    let dim = jac.dim();
    cache
        .mass()
        .iter()
        .enumerate()
        .map(|(r, &w)| {
            let (a, b) = (&jac.as_slice()[r * dim..(r + 1) * dim], &target.as_slice()[r * dim..(r + 1) * dim]);
            w * a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()
        })
        .sum()
}

/// Local/global ARAP parameterization starting from `init`.
pub fn arap_parameterize(
    mesh: &Mesh,
    cache: &OperatorCache,
    init: &VertexMap,
    config: &ParamConfig,
) -> Result<ParamResult> {
    mesh.check_disk()?;
    if init.dim() != 2 || init.rows() != mesh.num_vertices() {
        return Err(Error::shape("arap_parameterize", format!("{}×2", mesh.num_vertices()), format!("{}×{}", init.rows(), init.dim())));
    }
    let mut uv = init.clone();
    let mut jac = compute_jacobians(cache, &uv)?;
    let mut rot = nearest_rotations(&jac);
    let mut energies = vec![field_energy(cache, &jac, &rot)];
    for _ in 0..config.max_iters.max(1) {
        uv = poisson_solve(cache, &rot)?;
        jac = compute_jacobians(cache, &uv)?;
        rot = nearest_rotations(&jac);
        let e = field_energy(cache, &jac, &rot);
        let prev = *energies.last().unwrap();
        energies.push(e);
        if prev - e <= config.rel_tol * prev {
            break;
        }
    }
    let report = distortion_report(cache, &uv, MapMode::Uv2)?;
    Ok(ParamResult { uv, energies, report })
}

/// Rotation angle and translation minimizing `Σ w ‖R(θ)·uv + t − xy‖²`.
pub fn procrustes_2d(uv: &VertexMap, xy: &[[f64; 2]], weights: &[f64]) -> Result<(f64, [f64; 2])> {
    let n = uv.rows();
    if uv.dim() != 2 || xy.len() != n || weights.len() != n {
        return Err(Error::shape("procrustes_2d", n, xy.len()));
    }
    let total: f64 = weights.iter().sum();
    let (mut cu, mut cx) = ([0.0; 2], [0.0; 2]);
    for j in 0..n {
        for k in 0..2 {
            cu[k] += weights[j] * uv.row(j)[k] / total;
            cx[k] += weights[j] * xy[j][k] / total;
        }
    }
    let (mut num, mut den) = (0.0, 0.0);
    for j in 0..n {
        let (u, v) = (uv.row(j)[0] - cu[0], uv.row(j)[1] - cu[1]);
        let (x, y) = (xy[j][0] - cx[0], xy[j][1] - cx[1]);
        num += weights[j] * (y * u - x * v);
        den += weights[j] * (x * u + y * v);
    }
    let theta = num.atan2(den);
    let (s, c) = theta.sin_cos();
    let t = [cx[0] - (c * cu[0] - s * cu[1]), cx[1] - (s * cu[0] + c * cu[1])];
    Ok((theta, t))
}

/// Applies `uv ↦ R(θ)·uv + t`.
pub fn apply_rigid_2d(uv: &VertexMap, theta: f64, t: [f64; 2]) -> VertexMap {
    let (s, c) = theta.sin_cos();
    let mut out = uv.clone();
    for j in 0..uv.rows() {
        let r = uv.row(j);
        let (u, v) = (r[0], r[1]);
        out.row_mut(j).copy_from_slice(&[c * u - s * v + t[0], s * u + c * v + t[1]]);
    }
    out
}
