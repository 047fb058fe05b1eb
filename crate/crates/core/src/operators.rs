//! Tangent frames, the per-triangle gradient operator, the mass matrix, the
//! cotangent Laplacian, and its pinned direct factorization.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Lu;
use faer::Mat;
use nalgebra::Matrix2;

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Vec3};
use crate::sparse::CsrMatrix;

/// One oriented orthonormal tangent basis per triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSet {
    frames: Vec<[Vec3; 2]>,
}

impl FrameSet {
    /// First column along the triangle's first edge, second column
    /// `normal × first`.
    pub fn first_edge(mesh: &Mesh) -> Self {
        let frames = mesh
            .triangles()
            .iter()
            .zip(mesh.normals())
            .map(|(&[a, b, _], n)| {
                let c1 = (mesh.vertices()[b] - mesh.vertices()[a]).normalize();
                [c1, n.cross(&c1)]
            })
            .collect();
        Self { frames }
    }

    /// Accepts caller-provided frames after checking orthonormality and
    /// orientation against the mesh normals.
    pub fn from_columns(mesh: &Mesh, frames: Vec<[Vec3; 2]>) -> Result<Self> {
        if frames.len() != mesh.num_triangles() {
            return Err(Error::shape("FrameSet", mesh.num_triangles(), frames.len()));
        }
        for (i, ([c1, c2], n)) in frames.iter().zip(mesh.normals()).enumerate() {
            let ok = (c1.norm() - 1.0).abs() < 1e-10
                && (c2.norm() - 1.0).abs() < 1e-10
                && c1.dot(c2).abs() < 1e-10
                && c1.dot(n).abs() < 1e-10
                && c2.dot(n).abs() < 1e-10
                && c1.cross(c2).dot(n) > 0.0;
            if !ok {
                return Err(Error::Invalid(format!("frame {i} is not an oriented tangent basis")));
            }
        }
        Ok(Self { frames })
    }

    /// Wraps frames read back from storage without re-checking them.
    pub(crate) fn from_raw(frames: Vec<[Vec3; 2]>) -> Self {
        Self { frames }
    }

    /// Rotates every frame within its tangent plane by the given angle.
    pub fn rotated(&self, angles: &[f64]) -> Self {
        assert_eq!(angles.len(), self.frames.len());
        let frames = self
            .frames
            .iter()
            .zip(angles)
            .map(|([c1, c2], &t)| {
                let (s, c) = t.sin_cos();
                [c1 * c + c2 * s, c2 * c - c1 * s]
            })
            .collect();
        Self { frames }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn get(&self, i: usize) -> &[Vec3; 2] {
        &self.frames[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[Vec3; 2]> {
        self.frames.iter()
    }
}

/// The stacked `2T × V` gradient: rows `2i` and `2i + 1` hold triangle
/// `i`'s gradient expressed in its frame.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientOperator {
    matrix: CsrMatrix,
}

impl GradientOperator {
    pub fn build(mesh: &Mesh, frames: &FrameSet) -> Result<Self> {
        if frames.len() != mesh.num_triangles() {
            return Err(Error::shape("build_gradient", mesh.num_triangles(), frames.len()));
        }
        let verts = mesh.vertices();
        let mut trips = Vec::with_capacity(6 * mesh.num_triangles());
        for (i, (&[a, b, c], [f1, f2])) in mesh.triangles().iter().zip(frames.iter()).enumerate() {
            let (e1, e2) = (verts[b] - verts[a], verts[c] - verts[a]);
            let edges = Matrix2::new(f1.dot(&e1), f1.dot(&e2), f2.dot(&e1), f2.dot(&e2));
            let inv = edges
                .try_inverse()
                .ok_or_else(|| Error::Numeric(format!("triangle {i} has a singular edge matrix")))?;
            // J · E = [φb − φa, φc − φa]  ⇒  J = Φ_local · C · E⁻¹
            for k in 0..2 {
                let gb = inv[(0, k)];
                let gc = inv[(1, k)];
                trips.push((2 * i + k, a, -gb - gc));
                trips.push((2 * i + k, b, gb));
                trips.push((2 * i + k, c, gc));
            }
        }
        Ok(Self {
            matrix: CsrMatrix::from_triplets(2 * mesh.num_triangles(), mesh.num_vertices(), &trips),
        })
    }

    pub fn from_matrix(matrix: CsrMatrix) -> Self {
        Self { matrix }
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn num_triangles(&self) -> usize {
        self.matrix.nrows() / 2
    }

    pub fn num_vertices(&self) -> usize {
        self.matrix.ncols()
    }
}

/// Diagonal of the `2T × 2T` mass matrix: each triangle area, twice.
pub fn mass_diagonal(mesh: &Mesh) -> Vec<f64> {
    mesh.areas().iter().flat_map(|&a| [a, a]).collect()
}

/// `L = ∇ᵀ A ∇`, assembled row by row from the gradient.
pub fn laplacian(grad: &GradientOperator, mass: &[f64]) -> CsrMatrix {
    let g = grad.matrix();
    let n = g.ncols();
    let mut trips = Vec::with_capacity(9 * g.nrows());
    for r in 0..g.nrows() {
        let w = mass[r];
        for (c1, v1) in g.row(r) {
            for (c2, v2) in g.row(r) {
                trips.push((c1, c2, w * v1 * v2));
            }
        }
    }
    CsrMatrix::from_triplets(n, n, &trips)
}

/// Builds the mass diagonal and Laplacian for a mesh's gradient.
pub fn build_laplacian(mesh: &Mesh, grad: &GradientOperator) -> (Vec<f64>, CsrMatrix) {
    let mass = mass_diagonal(mesh);
    let lap = laplacian(grad, &mass);
    (mass, lap)
}

/// Sparse LU factorization of the Laplacian with one vertex's row and
/// column removed. Solves are read-only and may run concurrently.
pub struct PinnedSolver {
    lu: Lu<usize, f64>,
    pin: usize,
    n: usize,
}

impl std::fmt::Debug for PinnedSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PinnedSolver")
            .field("pin", &self.pin)
            .field("n", &self.n)
            .finish_non_exhaustive()
    }
}

impl PinnedSolver {
    pub fn factorize(lap: &CsrMatrix, pin: usize) -> Result<Self> {
        let n = lap.nrows();
        if pin >= n || n < 2 {
            return Err(Error::Invalid(format!("pin vertex {pin} invalid for {n} vertices")));
        }
        let reduced = lap.to_faer_without(pin)?;
        let lu = reduced
            .sp_lu()
            .map_err(|e| Error::Numeric(format!("pinned Laplacian is singular ({e:?}); is the mesh connected?")))?;
        Ok(Self { lu, pin, n })
    }

    pub fn pin(&self) -> usize {
        self.pin
    }

    /// Solves `L x = b` on the non-pinned rows with `x[pin] = 0`; `b` is a
    /// row-major `V × dim` block whose pinned row is ignored.
    pub fn solve(&self, rhs: &[f64], dim: usize) -> Vec<f64> {
        assert_eq!(rhs.len(), self.n * dim);
        let m = self.n - 1;
        let shift = |j: usize| if j > self.pin { j - 1 } else { j };
        let mut x = Mat::<f64>::zeros(m, dim);
        for j in (0..self.n).filter(|&j| j != self.pin) {
            for k in 0..dim {
                x[(shift(j), k)] = rhs[j * dim + k];
            }
        }
        self.lu.solve_in_place(x.as_mut());
        let mut out = vec![0.0; self.n * dim];
        for j in (0..self.n).filter(|&j| j != self.pin) {
            for k in 0..dim {
                out[j * dim + k] = x[(shift(j), k)];
            }
        }
        out
    }
}

/// Everything precomputed for one mesh: frames, gradient, mass, Laplacian,
/// and the pinned factorization.
#[derive(Debug)]
pub struct OperatorCache {
    frames: FrameSet,
    grad: GradientOperator,
    mass: Vec<f64>,
    laplacian: CsrMatrix,
    solver: PinnedSolver,
}

impl OperatorCache {
    pub const DEFAULT_PIN: usize = 0;

    pub fn build(mesh: &Mesh) -> Result<Self> {
        Self::build_with_frames(mesh, FrameSet::first_edge(mesh), Self::DEFAULT_PIN)
    }

    pub fn build_with_frames(mesh: &Mesh, frames: FrameSet, pin: usize) -> Result<Self> {
        let grad = GradientOperator::build(mesh, &frames)?;
        let (mass, laplacian) = build_laplacian(mesh, &grad);
        Self::from_parts(frames, grad, mass, laplacian, pin)
    }

    /// Reassembles a cache from stored operators, refactorizing.
    pub fn from_parts(
        frames: FrameSet,
        grad: GradientOperator,
        mass: Vec<f64>,
        laplacian: CsrMatrix,
        pin: usize,
    ) -> Result<Self> {
        let t = frames.len();
        if grad.num_triangles() != t || mass.len() != 2 * t || laplacian.nrows() != grad.num_vertices() {
            return Err(Error::Invalid("operator cache parts are inconsistent".into()));
        }
        let solver = PinnedSolver::factorize(&laplacian, pin)?;
        Ok(Self {
            frames,
            grad,
            mass,
            laplacian,
            solver,
        })
    }

    pub fn frames(&self) -> &FrameSet {
        &self.frames
    }

    pub fn grad(&self) -> &GradientOperator {
        &self.grad
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn laplacian(&self) -> &CsrMatrix {
        &self.laplacian
    }

    pub fn solver(&self) -> &PinnedSolver {
        &self.solver
    }

    pub fn pin(&self) -> usize {
        self.solver.pin
    }

    pub fn num_vertices(&self) -> usize {
        self.grad.num_vertices()
    }

    pub fn num_triangles(&self) -> usize {
        self.frames.len()
    }
}
