//! Restriction of ambient 3×3 predictions to triangle tangent planes, and
//! distortion/orientation diagnostics of maps.

use nalgebra::{Matrix2, Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{FrameSet, OperatorCache};
use crate::poisson::{compute_jacobians, JacobianField, VertexMap};

/// Output dimension of a map: 3D deformation or 2D parameterization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MapMode {
    #[serde(rename = "3d")]
    Deform3,
    #[serde(rename = "2d")]
    Uv2,
}

impl MapMode {
    pub fn dim(self) -> usize {
        match self {
            MapMode::Deform3 => 3,
            MapMode::Uv2 => 2,
        }
    }
}

/// One ambient linear map per triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtrinsicField {
    mats: Vec<Matrix3<f64>>,
}

impl ExtrinsicField {
    pub fn new(mats: Vec<Matrix3<f64>>) -> Self {
        Self { mats }
    }

    pub fn identity(triangles: usize) -> Self {
        Self {
            mats: vec![Matrix3::identity(); triangles],
        }
    }

    /// From row-major 9-vectors, adding the identity to each.
    pub fn from_raw_plus_identity(raw: &[f32]) -> Result<Self> {
        if raw.len() % 9 != 0 {
            return Err(Error::shape("ExtrinsicField", "multiple of 9", raw.len()));
        }
        let mats = raw
            .chunks_exact(9)
            .map(|c| Matrix3::from_row_iterator(c.iter().map(|&x| f64::from(x))) + Matrix3::identity())
            .collect();
        Ok(Self { mats })
    }

    pub fn len(&self) -> usize {
        self.mats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mats.is_empty()
    }

    pub fn get(&self, i: usize) -> &Matrix3<f64> {
        &self.mats[i]
    }

    pub fn mats(&self) -> &[Matrix3<f64>] {
        &self.mats
    }

    /// Row-major 9-vector per triangle.
    pub fn to_row_major(&self) -> Vec<f64> {
        self.mats
            .iter()
            .flat_map(|m| (0..3).flat_map(move |r| (0..3).map(move |c| m[(r, c)])))
            .collect()
    }
}

/// `R_i = P_i B_i`, keeping the first `dim` rows.
pub fn restrict(field: &ExtrinsicField, frames: &FrameSet, dim: usize) -> Result<JacobianField> {
    if field.len() != frames.len() {
        return Err(Error::shape("restrict", frames.len(), field.len()));
    }
    if !(1..=3).contains(&dim) {
        return Err(Error::shape("restrict", "dim in 1..=3", dim));
    }
    let mut out = JacobianField::zeros(field.len(), dim);
    for (i, (p, b)) in field.mats().iter().zip(frames.iter()).enumerate() {
        for (a, col) in b.iter().enumerate() {
            let r = p * col;
            for c in 0..dim {
                out.set(i, c, a, r[c]);
            }
        }
    }
    Ok(out)
}

/// Adjoint of [`restrict`]: `dP_i = dR_i B_iᵀ`, zero rows beyond `dim`.
pub fn restrict_adjoint(grad: &JacobianField, frames: &FrameSet) -> Result<ExtrinsicField> {
    if grad.num_triangles() != frames.len() {
        return Err(Error::shape("restrict_adjoint", frames.len(), grad.num_triangles()));
    }
    let dim = grad.dim();
    let mats = frames
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let mut m = Matrix3::zeros();
            for c in 0..dim {
                for (a, col) in b.iter().enumerate() {
                    let g = grad.get(i, c, a);
                    for k in 0..3 {
                        m[(c, k)] += g * col[k];
                    }
                }
            }
            m
        })
        .collect();
    Ok(ExtrinsicField { mats })
}

/// Singular values `σ1 ≥ σ2` of a `dim × 2` matrix given column-wise.
pub fn singular_values(col0: &[f64], col1: &[f64]) -> (f64, f64) {
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    let gram = Matrix2::new(dot(col0, col0), dot(col0, col1), dot(col0, col1), dot(col1, col1));
    let eig = SymmetricEigen::new(gram).eigenvalues;
    let s1 = eig[0].max(eig[1]).max(0.0).sqrt();
    // σ1·σ2 equals the area form, which stays accurate for collapsed maps.
    let area = match (col0, col1) {
        ([a, b], [c, d]) => (a * d - b * c).abs(),
        ([a, b, c], [d, e, f]) => Vector3::new(*a, *b, *c).cross(&Vector3::new(*d, *e, *f)).norm(),
        _ => eig[0].min(eig[1]).max(0.0).sqrt() * s1,
    };
    (s1, if s1 > 0.0 { (area / s1).min(s1) } else { 0.0 })
}

/// Distortion `max(σ1, 1/σ2)`, infinite for collapsed jacobians.
pub fn distortion(s1: f64, s2: f64) -> f64 {
    if s2 < 1e-12 {
        f64::INFINITY
    } else {
        s1.max(1.0 / s2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TriangleDistortion {
    pub sigma1: f64,
    pub sigma2: f64,
    pub distortion: f64,
    /// `None` in 3D mode, where orientation reversal is undefined.
    pub flipped: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DistortionReport {
    pub triangles: Vec<TriangleDistortion>,
    pub count_d10: usize,
    pub flips: Option<usize>,
    pub mean_distortion: f64,
    pub median_distortion: f64,
}

pub fn distortion_report(cache: &OperatorCache, map: &VertexMap, mode: MapMode) -> Result<DistortionReport> {
    if map.dim() != mode.dim() {
        return Err(Error::shape("distortion_report", mode.dim(), map.dim()));
    }
    let jac = compute_jacobians(cache, map)?;
    Ok(report_from_jacobians(&jac, mode))
}

pub fn report_from_jacobians(jac: &JacobianField, mode: MapMode) -> DistortionReport {
    let dim = jac.dim();
    let triangles: Vec<TriangleDistortion> = (0..jac.num_triangles())
        .map(|i| {
            let block = jac.block(i);
            let (c0, c1) = block.split_at(dim);
            let (sigma1, sigma2) = singular_values(c0, c1);
            let flipped = (mode == MapMode::Uv2).then(|| c0[0] * c1[1] - c1[0] * c0[1] < 0.0);
            TriangleDistortion {
                sigma1,
                sigma2,
                distortion: distortion(sigma1, sigma2),
                flipped,
            }
        })
        .collect();
    let count_d10 = triangles.iter().filter(|t| t.distortion > 10.0).count();
    let flips = (mode == MapMode::Uv2).then(|| triangles.iter().filter(|t| t.flipped == Some(true)).count());
    let mut d: Vec<f64> = triangles.iter().map(|t| t.distortion).collect();
    let mean_distortion = d.iter().sum::<f64>() / d.len().max(1) as f64;
    d.sort_by(f64::total_cmp);
    DistortionReport {
        triangles,
        count_d10,
        flips,
        mean_distortion,
        median_distortion: median_sorted(&d),
    }
}

pub(crate) fn median_sorted(sorted: &[f64]) -> f64 {
    match sorted.len() {
        0 => 0.0,
        n if n % 2 == 1 => sorted[n / 2],
        n => 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]),
    }
}

/// Per-corpus aggregates in the style of a parameterization benchmark table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionSummary {
    #[serde(rename = "avgD10")]
    pub avg_d10: f64,
    #[serde(rename = "medD10")]
    pub med_d10: f64,
    #[serde(rename = "avgFlips")]
    pub avg_flips: f64,
    #[serde(rename = "medFlips")]
    pub med_flips: f64,
    #[serde(rename = "pctMeshesWithFlips")]
    pub pct_meshes_with_flips: f64,
    #[serde(rename = "meshes")]
    pub meshes: usize,
}

impl DistortionSummary {
    pub fn from_reports(reports: &[DistortionReport]) -> Self {
        let n = reports.len().max(1) as f64;
        let mut d10: Vec<f64> = reports.iter().map(|r| r.count_d10 as f64).collect();
        let mut flips: Vec<f64> = reports.iter().map(|r| r.flips.unwrap_or(0) as f64).collect();
        let avg_d10 = d10.iter().sum::<f64>() / n;
        let avg_flips = flips.iter().sum::<f64>() / n;
        let with_flips = flips.iter().filter(|&&f| f > 0.0).count() as f64;
        d10.sort_by(f64::total_cmp);
        flips.sort_by(f64::total_cmp);
        Self {
            avg_d10,
            med_d10: median_sorted(&d10),
            avg_flips,
            med_flips: median_sorted(&flips),
            pct_meshes_with_flips: 100.0 * with_flips / n,
            meshes: reports.len(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singular_values_of_known_matrices() {
        let (a, b) = singular_values(&[2.0, 0.0], &[0.0, 3.0]);
        assert!((a - 3.0).abs() < 1e-14 && (b - 2.0).abs() < 1e-14);
        let (a, b) = singular_values(&[1.0, 1.0, 0.0], &[1.0, 1.0, 0.0]);
        assert!((a - 2.0).abs() < 1e-14 && b.abs() < 1e-7);
        assert_eq!(distortion(2.0, 0.0), f64::INFINITY);
        assert_eq!(distortion(2.0, 0.25), 4.0);
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median_sorted(&[1.0, 2.0, 10.0]), 2.0);
        assert_eq!(median_sorted(&[1.0, 2.0, 4.0, 10.0]), 3.0);
    }

    #[test]
    fn summary_counts_meshes_with_flips() {
        let mk = |flips| DistortionReport {
            triangles: vec![],
            count_d10: 2,
            flips: Some(flips),
            mean_distortion: 1.0,
            median_distortion: 1.0,
        };
        let s = DistortionSummary::from_reports(&[mk(0), mk(3), mk(0), mk(1)]);
        assert_eq!(s.pct_meshes_with_flips, 50.0);
        assert_eq!(s.avg_flips, 1.0);
        assert_eq!(s.med_flips, 0.5);
        assert_eq!(s.avg_d10, 2.0);
        let json = serde_json::to_value(&s).unwrap();
        assert!(json.get("avgD10").is_some() && json.get("pctMeshesWithFlips").is_some());
    }
}
