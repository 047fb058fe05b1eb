//! Training losses and their gradients.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::operators::OperatorCache;
use crate::poisson::{compute_jacobians, JacobianField, VertexMap};

pub const VERTEX_LOSS_WEIGHT: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LossBreakdown {
    pub l_vertex: f64,
    pub l_jacobian: f64,
    pub l_total: f64,
}

impl LossBreakdown {
    pub fn new(l_vertex: f64, l_jacobian: f64) -> Self {
        Self {
            l_vertex,
            l_jacobian,
            l_total: VERTEX_LOSS_WEIGHT * l_vertex + l_jacobian,
        }
    }

    /// Component-wise mean of several breakdowns.
    pub fn mean(items: &[LossBreakdown]) -> Self {
        let n = items.len().max(1) as f64;
        let lv = items.iter().map(|l| l.l_vertex).sum::<f64>() / n;
        let lj = items.iter().map(|l| l.l_jacobian).sum::<f64>() / n;
        Self::new(lv, lj)
    }
}

/// Gradients of `l_total` with respect to the prediction.
#[derive(Debug, Clone)]
pub struct LossGrad {
    pub phi: VertexMap,
    pub r: Option<JacobianField>,
}

/// Mass-weighted mean of each column.
fn mass_center(masses: &[f64], map: &VertexMap) -> Vec<f64> {
    let total: f64 = masses.iter().sum();
    let mut c = vec![0.0; map.dim()];
    for (j, &m) in masses.iter().enumerate() {
        for (a, x) in c.iter_mut().zip(map.row(j)) {
            *a += m * x;
        }
    }
    c.iter_mut().for_each(|a| *a /= total);
    c
}

/// Losses of a prediction `(Φ, R)` against ground truth `Ψ`; `R` is absent
/// for predictors without a jacobian stage. Returns the breakdown and the
/// gradient of `l_total`.
pub fn loss_with_grad(
    cache: &OperatorCache,
    mesh: &Mesh,
    phi: &VertexMap,
    r: Option<&JacobianField>,
    psi: &VertexMap,
) -> Result<(LossBreakdown, LossGrad)> {
    if phi.rows() != mesh.num_vertices() || psi.rows() != phi.rows() || psi.dim() != phi.dim() {
        return Err(Error::shape(
            "loss",
            format!("{}×{}", mesh.num_vertices(), psi.dim()),
            format!("{}×{}", phi.rows(), phi.dim()),
        ));
    }
    let masses = mesh.vertex_masses();
    let dim = phi.dim();
    let (cp, cq) = (mass_center(masses, phi), mass_center(masses, psi));
    let mut lv = 0.0;
    let mut gphi = VertexMap::zeros(phi.rows(), dim);
    for (j, &m) in masses.iter().enumerate() {
        let (p, q) = (phi.row(j), psi.row(j));
        let g = gphi.row_mut(j);
        for k in 0..dim {
            let e = (p[k] - cp[k]) - (q[k] - cq[k]);
            lv += m * e * e;
            // the centering term's derivative sums to zero
            g[k] = 2.0 * VERTEX_LOSS_WEIGHT * m * e;
        }
    }
    let (lj, gr) = match r {
        Some(r) => {
            if r.dim() != dim || r.num_triangles() != mesh.num_triangles() {
                return Err(Error::shape("loss", dim, r.dim()));
            }
            let jpsi = compute_jacobians(cache, psi)?;
            let mut g = JacobianField::zeros(r.num_triangles(), dim);
            let mut lj = 0.0;
            for (row, &w) in cache.mass().iter().enumerate() {
                let range = row * dim..(row + 1) * dim;
                for ((gx, a), b) in g.as_mut_slice()[range.clone()]
                    .iter_mut()
                    .zip(&r.as_slice()[range.clone()])
                    .zip(&jpsi.as_slice()[range])
                {
                    let d = a - b;
                    lj += w * d * d;
                    *gx = 2.0 * w * d;
                }
            }
            (lj, Some(g))
        }
        None => (0.0, None),
    };
    Ok((LossBreakdown::new(lv, lj), LossGrad { phi: gphi, r: gr }))
}

pub fn loss(
    cache: &OperatorCache,
    mesh: &Mesh,
    phi: &VertexMap,
    r: Option<&JacobianField>,
    psi: &VertexMap,
) -> Result<LossBreakdown> {
    loss_with_grad(cache, mesh, phi, r, psi).map(|(l, _)| l)
}
