//! Laplacian spectrum, wave-kernel signatures, and per-point feature vectors.

use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Vec3};
use crate::sparse::CsrMatrix;

/// Smallest generalized eigenpairs of `L φ = λ M φ` with lumped vertex
/// masses `M`; eigenvectors are `M`-orthonormal and stored row-major
/// `V × k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralData {
    eigenvalues: Vec<f64>,
    eigenvectors: Vec<f64>,
    vertices: usize,
}

pub const DEFAULT_EIGEN_COUNT: usize = 64;
const SPECTRUM_RESIDUAL_LIMIT: f64 = 1e-8;

impl SpectralData {
    pub fn from_parts(eigenvalues: Vec<f64>, eigenvectors: Vec<f64>, vertices: usize) -> Result<Self> {
        if eigenvectors.len() != eigenvalues.len() * vertices {
            return Err(Error::shape("SpectralData", eigenvalues.len() * vertices, eigenvectors.len()));
        }
        Ok(Self {
            eigenvalues,
            eigenvectors,
            vertices,
        })
    }

    pub fn k(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Row-major `V × k`.
    pub fn eigenvectors(&self) -> &[f64] {
        &self.eigenvectors
    }

    /// All eigenfunction values at vertex `j`.
    pub fn at_vertex(&self, j: usize) -> &[f64] {
        let k = self.k();
        &self.eigenvectors[j * k..(j + 1) * k]
    }

    /// Worst relative residual `‖Lφ − λMφ‖ / ‖Mφ‖` over all pairs, and worst
    /// deviation of `ΦᵀMΦ` from the identity.
    pub fn check(&self, laplacian: &CsrMatrix, mass: &[f64]) -> (f64, f64) {
        let k = self.k();
        let lphi = laplacian.mul_dense(&self.eigenvectors, k);
        let mut worst_res: f64 = 0.0;
        for p in 0..k {
            let (mut num, mut den) = (0.0, 0.0);
            for j in 0..self.vertices {
                let mphi = mass[j] * self.eigenvectors[j * k + p];
                num += (lphi[j * k + p] - self.eigenvalues[p] * mphi).powi(2);
                den += mphi * mphi;
            }
            worst_res = worst_res.max((num / den).sqrt());
        }
        let mut worst_orth: f64 = 0.0;
        for p in 0..k {
            for q in 0..=p {
                let g: f64 = (0..self.vertices)
                    .map(|j| mass[j] * self.eigenvectors[j * k + p] * self.eigenvectors[j * k + q])
                    .sum();
                let target = if p == q { 1.0 } else { 0.0 };
                worst_orth = worst_orth.max((g - target).abs());
            }
        }
        (worst_res, worst_orth)
    }
}

/// Dense generalized eigensolve of the lumped-mass problem, keeping the `k`
/// smallest pairs. Each eigenvector's largest-magnitude entry is made
/// positive.
pub fn compute_spectrum(laplacian: &CsrMatrix, vertex_mass: &[f64], k: usize) -> Result<SpectralData> {
    let n = laplacian.nrows();
    if vertex_mass.len() != n {
        return Err(Error::shape("compute_spectrum", n, vertex_mass.len()));
    }
    if k == 0 || k >= n {
        return Err(Error::Invalid(format!("eigenpair count {k} must lie in 1..{n}")));
    }
    let inv_sqrt: Vec<f64> = vertex_mass.iter().map(|m| 1.0 / m.sqrt()).collect();
    let mut sym = Mat::<f64>::zeros(n, n);
    for r in 0..n {
        for (c, v) in laplacian.row(r) {
            sym[(r, c)] = v * inv_sqrt[r] * inv_sqrt[c];
        }
    }
    // symmetrize against round-off in assembly
    for r in 0..n {
        for c in 0..r {
            let avg = 0.5 * (sym[(r, c)] + sym[(c, r)]);
            sym[(r, c)] = avg;
            sym[(c, r)] = avg;
        }
    }
    let eig = sym
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numeric(format!("eigensolver failed to converge: {e:?}")))?;
    let (s, u) = (eig.S(), eig.U());
    let eigenvalues: Vec<f64> = (0..k).map(|p| s[p]).collect();
    let mut eigenvectors = vec![0.0; n * k];
    for p in 0..k {
        let mut peak = 0.0f64;
        for j in 0..n {
            let v = u[(j, p)] * inv_sqrt[j];
            if v.abs() > peak.abs() {
                peak = v;
            }
        }
        let sign = if peak < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            eigenvectors[j * k + p] = sign * u[(j, p)] * inv_sqrt[j];
        }
    }
    let spec = SpectralData {
        eigenvalues,
        eigenvectors,
        vertices: n,
    };
    let (res, orth) = spec.check(laplacian, vertex_mass);
    if res > SPECTRUM_RESIDUAL_LIMIT || orth > SPECTRUM_RESIDUAL_LIMIT {
        return Err(Error::Numeric(format!(
            "eigenpairs inaccurate: residual {res:.3e}, orthonormality error {orth:.3e}"
        )));
    }
    Ok(spec)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct WksConfig {
    /// Number of energy samples; 0 disables the signature.
    pub energies: usize,
    /// σ as a multiple of the energy-grid spacing.
    pub variance_scale: f64,
    /// Eigenpairs to compute.
    pub eigen_count: usize,
}

impl Default for WksConfig {
    fn default() -> Self {
        Self {
            energies: 50,
            variance_scale: 7.0,
            eigen_count: DEFAULT_EIGEN_COUNT,
        }
    }
}

/// Precomputed energy grid and band weights for one spectrum.
#[derive(Debug, Clone)]
pub struct WksBands {
    /// `weights[e * k + p]`, already divided by the per-energy normalizer.
    weights: Vec<f64>,
    energies: usize,
    k: usize,
}

impl WksBands {
    pub fn new(spec: &SpectralData, energies: usize, variance_scale: f64) -> Result<Self> {
        let k = spec.k();
        if k < 3 {
            return Err(Error::Invalid(format!("wave-kernel signature needs at least 3 eigenpairs, got {k}")));
        }
        let lams = spec.eigenvalues();
        if lams[1] <= 0.0 {
            return Err(Error::Numeric(format!("second eigenvalue {:.3e} is not positive", lams[1])));
        }
        let logs: Vec<f64> = lams.iter().map(|l| l.max(f64::MIN_POSITIVE).ln()).collect();
        let (lo, hi) = (logs[1], logs[k - 1]);
        let step = if energies > 1 { (hi - lo) / (energies - 1) as f64 } else { 0.0 };
        let sigma = variance_scale * if step > 0.0 { step } else { (hi - lo).max(1e-3) };
        let mut weights = vec![0.0; energies * k];
        for e in 0..energies {
            let energy = lo + step * e as f64;
            let row = &mut weights[e * k..(e + 1) * k];
            for p in 1..k {
                row[p] = (-(energy - logs[p]).powi(2) / (2.0 * sigma * sigma)).exp();
            }
            let total: f64 = row.iter().sum();
            row.iter_mut().for_each(|w| *w /= total);
        }
        Ok(Self { weights, energies, k })
    }

    pub fn energies(&self) -> usize {
        self.energies
    }

    /// Signature for eigenfunction values `phi` (length k) at one point.
    pub fn signature(&self, phi: &[f64], out: &mut [f64]) {
        assert_eq!(phi.len(), self.k);
        for (e, o) in out.iter_mut().enumerate().take(self.energies) {
            let row = &self.weights[e * self.k..(e + 1) * self.k];
            *o = row.iter().zip(phi).skip(1).map(|(w, f)| w * f * f).sum();
        }
    }
}

/// Signature at one point given its eigenfunction values.
pub fn wks(spec: &SpectralData, phi: &[f64], energies: usize, variance_scale: f64) -> Result<Vec<f64>> {
    let bands = WksBands::new(spec, energies, variance_scale)?;
    let mut out = vec![0.0; energies];
    bands.signature(phi, &mut out);
    Ok(out)
}

/// Fixed-width feature rows, row-major `n × width`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub width: usize,
    pub data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn rows(&self) -> usize {
        if self.width == 0 {
            0
        } else {
            self.data.len() / self.width
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.width..(i + 1) * self.width]
    }
}

fn assemble(points: &[Vec3], normals: &[Vec3], wks_rows: Option<(WksBands, Vec<Vec<f64>>)>) -> FeatureMatrix {
    let w = wks_rows.as_ref().map_or(0, |(b, _)| b.energies());
    let width = 6 + w;
    let mut data = vec![0.0; points.len() * width];
    for (i, row) in data.chunks_mut(width).enumerate() {
        row[..3].copy_from_slice(points[i].as_slice());
        row[3..6].copy_from_slice(normals[i].as_slice());
        if let Some((bands, phis)) = &wks_rows {
            bands.signature(&phis[i], &mut row[6..]);
        }
    }
    FeatureMatrix { width, data }
}

/// `[centroid, normal, WKS]` per triangle; the signature uses the
/// barycentric average of eigenfunction values.
pub fn centroid_features(mesh: &Mesh, spec: Option<&SpectralData>, config: &WksConfig) -> Result<FeatureMatrix> {
    let wks_rows = match (config.energies, spec) {
        (0, _) => None,
        (_, None) => return Err(Error::Invalid("wave-kernel features need a spectrum".into())),
        (w, Some(spec)) => {
            check_spectrum(mesh, spec)?;
            let bands = WksBands::new(spec, w, config.variance_scale)?;
            let phis = mesh
                .triangles()
                .iter()
                .map(|t| {
                    let (a, b, c) = (spec.at_vertex(t[0]), spec.at_vertex(t[1]), spec.at_vertex(t[2]));
                    (0..spec.k()).map(|p| (a[p] + b[p] + c[p]) / 3.0).collect()
                })
                .collect();
            Some((bands, phis))
        }
    };
    Ok(assemble(mesh.centroids(), mesh.normals(), wks_rows))
}

/// `[position, area-weighted vertex normal, WKS]` per vertex.
pub fn vertex_features(mesh: &Mesh, spec: Option<&SpectralData>, config: &WksConfig) -> Result<FeatureMatrix> {
    let wks_rows = match (config.energies, spec) {
        (0, _) => None,
        (_, None) => return Err(Error::Invalid("wave-kernel features need a spectrum".into())),
        (w, Some(spec)) => {
            check_spectrum(mesh, spec)?;
            let bands = WksBands::new(spec, w, config.variance_scale)?;
            let phis = (0..mesh.num_vertices()).map(|j| spec.at_vertex(j).to_vec()).collect();
            Some((bands, phis))
        }
    };
    Ok(assemble(mesh.vertices(), &mesh.vertex_normals(), wks_rows))
}

fn check_spectrum(mesh: &Mesh, spec: &SpectralData) -> Result<()> {
    if spec.num_vertices() != mesh.num_vertices() {
        return Err(Error::shape("spectrum", mesh.num_vertices(), spec.num_vertices()));
    }
    Ok(())
}
