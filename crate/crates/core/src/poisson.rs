//! The Poisson layer: integrating a per-triangle jacobian field into vertex
//! positions, its adjoint, and the forward jacobian computation.

use crate::error::{Error, Result};
use crate::mesh::Vec3;
use crate::operators::OperatorCache;

/// Per-vertex values, row-major `V × dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexMap {
    rows: usize,
    dim: usize,
    data: Vec<f64>,
}

impl VertexMap {
    pub fn from_rows(rows: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * dim {
            return Err(Error::shape("VertexMap", rows * dim, data.len()));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric("vertex map has non-finite entries".into()));
        }
        Ok(Self { rows, dim, data })
    }

    pub fn from_points(points: &[Vec3]) -> Self {
        Self {
            rows: points.len(),
            dim: 3,
            data: points.iter().flat_map(|p| [p.x, p.y, p.z]).collect(),
        }
    }

    pub fn zeros(rows: usize, dim: usize) -> Self {
        Self {
            rows,
            dim,
            data: vec![0.0; rows * dim],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.data[j * self.dim..(j + 1) * self.dim]
    }

    pub fn row_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.dim..(j + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Rows as 3D points; 2D maps get z = 0.
    pub fn to_points(&self) -> Vec<Vec3> {
        (0..self.rows)
            .map(|j| {
                let r = self.row(j);
                Vec3::new(r[0], r.get(1).copied().unwrap_or(0.0), r.get(2).copied().unwrap_or(0.0))
            })
            .collect()
    }

    /// Subtracts `offset` from every row.
    pub fn translated(&self, offset: &[f64]) -> Self {
        assert_eq!(offset.len(), self.dim);
        let mut out = self.clone();
        for row in out.data.chunks_mut(self.dim) {
            for (x, o) in row.iter_mut().zip(offset) {
                *x -= o;
            }
        }
        out
    }
}

/// A per-triangle `dim × 2` matrix field stored as a `2T × dim` stack:
/// entry `(2i + a, c)` is row `c`, column `a` of triangle `i`'s matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianField {
    triangles: usize,
    dim: usize,
    data: Vec<f64>,
}

impl JacobianField {
    pub fn from_stack(triangles: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != 2 * triangles * dim {
            return Err(Error::shape("JacobianField", 2 * triangles * dim, data.len()));
        }
        Ok(Self { triangles, dim, data })
    }

    pub fn zeros(triangles: usize, dim: usize) -> Self {
        Self {
            triangles,
            dim,
            data: vec![0.0; 2 * triangles * dim],
        }
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Row `c`, column `a` of triangle `i`'s matrix.
    pub fn get(&self, i: usize, c: usize, a: usize) -> f64 {
        self.data[(2 * i + a) * self.dim + c]
    }

    pub fn set(&mut self, i: usize, c: usize, a: usize, v: f64) {
        self.data[(2 * i + a) * self.dim + c] = v;
    }

    /// The `2 × dim` slab of triangle `i` (its matrix transposed).
    pub fn block(&self, i: usize) -> &[f64] {
        &self.data[2 * i * self.dim..2 * (i + 1) * self.dim]
    }

    pub fn block_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[2 * i * self.dim..2 * (i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }
}

fn check_len(context: &'static str, actual: usize, expect: usize) -> Result<()> {
    if actual != expect {
        return Err(Error::shape(context, expect, actual));
    }
    Ok(())
}

/// Area-weighted least-squares integration of `field` with the pinned
/// vertex fixed at the origin.
pub fn poisson_solve(cache: &OperatorCache, field: &JacobianField) -> Result<VertexMap> {
    check_len("poisson_solve", field.num_triangles(), cache.num_triangles())?;
    let dim = field.dim();
    let mut weighted = field.as_slice().to_vec();
    for (r, &w) in cache.mass().iter().enumerate() {
        for x in &mut weighted[r * dim..(r + 1) * dim] {
            *x *= w;
        }
    }
    let rhs = cache.grad().matrix().mul_dense_transpose(&weighted, dim);
    let x = cache.solver().solve(&rhs, dim);
    VertexMap::from_rows(cache.num_vertices(), dim, x)
}

/// Transpose of [`poisson_solve`] as a linear map: pulls a gradient on the
/// output positions back onto the input field. The pinned row is ignored.
pub fn poisson_adjoint(cache: &OperatorCache, upstream: &VertexMap) -> Result<JacobianField> {
    check_len("poisson_adjoint", upstream.rows(), cache.num_vertices())?;
    let dim = upstream.dim();
    let mut g = upstream.as_slice().to_vec();
    let pin = cache.pin();
    g[pin * dim..(pin + 1) * dim].fill(0.0);
    let x = cache.solver().solve(&g, dim);
    let mut out = cache.grad().matrix().mul_dense(&x, dim);
    for (r, &w) in cache.mass().iter().enumerate() {
        for v in &mut out[r * dim..(r + 1) * dim] {
            *v *= w;
        }
    }
    JacobianField::from_stack(cache.num_triangles(), dim, out)
}

/// Per-triangle jacobians of a vertex map.
pub fn compute_jacobians(cache: &OperatorCache, map: &VertexMap) -> Result<JacobianField> {
    check_len("compute_jacobians", map.rows(), cache.num_vertices())?;
    let data = cache.grad().matrix().mul_dense(map.as_slice(), map.dim());
    JacobianField::from_stack(cache.num_triangles(), map.dim(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Mesh;

    fn square() -> Mesh {
        let v = |x, y| Vec3::new(x, y, 0.0);
        Mesh::new(vec![v(0., 0.), v(1., 0.), v(1., 1.), v(0., 1.)], vec![[0, 1, 2], [0, 2, 3]]).unwrap()
    }

    #[test]
    fn identity_embedding_jacobians_are_frames() {
        let m = square();
        let cache = OperatorCache::build(&m).unwrap();
        let j = compute_jacobians(&cache, &VertexMap::from_points(m.vertices())).unwrap();
        for i in 0..2 {
            let f = cache.frames().get(i);
            for a in 0..2 {
                for c in 0..3 {
                    assert!((j.get(i, c, a) - f[a][c]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn zero_field_solves_to_zero() {
        let m = square();
        let cache = OperatorCache::build(&m).unwrap();
        let x = poisson_solve(&cache, &JacobianField::zeros(2, 3)).unwrap();
        assert!(x.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn shapes_are_checked() {
        let m = square();
        let cache = OperatorCache::build(&m).unwrap();
        assert!(poisson_solve(&cache, &JacobianField::zeros(3, 3)).is_err());
        assert!(compute_jacobians(&cache, &VertexMap::zeros(5, 3)).is_err());
        assert!(VertexMap::from_rows(2, 3, vec![0.0; 5]).is_err());
        assert!(VertexMap::from_rows(1, 1, vec![f64::NAN]).is_err());
    }
}
