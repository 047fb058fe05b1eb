//! Test-set metrics on unit-sphere normalized maps.

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, MeshEntry};
use crate::error::{Error, Result};
use crate::fields::{distortion_report, DistortionSummary, MapMode};
use crate::mesh::{normalize_points, Vec3};
use crate::parallel::map_indexed;
use crate::poisson::{compute_jacobians, VertexMap};

use super::loss::{loss, LossBreakdown};
use super::model::{Model, ModelKind};
use super::train::prepare_all;

pub const L2V_SCALE: f64 = 100.0;
pub const L2J_SCALE: f64 = 10.0;

/// Map quality against ground truth for one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MapMetrics {
    pub l2v: f64,
    pub l2j: f64,
    /// Mean face-normal angle in degrees; 3D maps only.
    pub l2n: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SampleMetrics {
    pub index: usize,
    pub mesh: usize,
    #[serde(flatten)]
    pub metrics: MapMetrics,
    pub loss: LossBreakdown,
    pub flips: Option<usize>,
    pub count_d10: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EvalMetrics {
    pub kind: ModelKind,
    pub mode: MapMode,
    pub samples: usize,
    #[serde(rename = "L2V")]
    pub l2v: f64,
    #[serde(rename = "L2J")]
    pub l2j: f64,
    #[serde(rename = "L2N")]
    pub l2n: Option<f64>,
    pub loss: LossBreakdown,
    /// Distortion of predictions; UV mode only.
    pub distortion: Option<DistortionSummary>,
    /// Distortion of the ground truth on the same samples; UV mode only.
    pub ground_truth_distortion: Option<DistortionSummary>,
    pub per_sample: Vec<SampleMetrics>,
}

fn to_points(map: &VertexMap) -> Vec<Vec3> {
    (0..map.rows())
        .map(|j| {
            let r = map.row(j);
            Vec3::new(r[0], r[1], if map.dim() > 2 { r[2] } else { 0.0 })
        })
        .collect()
}

fn from_points(points: &[Vec3], dim: usize) -> VertexMap {
    let data = points.iter().flat_map(|p| p.as_slice()[..dim].to_vec()).collect();
    VertexMap::from_rows(points.len(), dim, data).expect("finite points")
}

/// Angle between two (unnormalized) normals in degrees; 90 when either is
/// degenerate.
fn normal_angle_deg(a: &Vec3, b: &Vec3) -> f64 {
    if a.norm() == 0.0 || b.norm() == 0.0 {
        return 90.0;
    }
    a.cross(b).norm().atan2(a.dot(b)).to_degrees()
}

/// Metrics between a predicted and a ground-truth map of one mesh, each
/// normalized to the unit sphere independently.
pub fn map_metrics(entry: &MeshEntry, phi: &VertexMap, psi: &VertexMap) -> Result<MapMetrics> {
    if phi.rows() != psi.rows() || phi.dim() != psi.dim() {
        return Err(Error::shape("map_metrics", psi.rows(), phi.rows()));
    }
    let dim = phi.dim();
    let tris = entry.mesh.triangles();
    let (p, _, _) = normalize_points(&to_points(phi), tris)?;
    let (q, _, _) = normalize_points(&to_points(psi), tris)?;
    let l2v = L2V_SCALE * p.iter().zip(&q).map(|(a, b)| (a - b).norm_squared()).sum::<f64>() / p.len() as f64;
    let jp = compute_jacobians(&entry.cache, &from_points(&p, dim))?;
    let jq = compute_jacobians(&entry.cache, &from_points(&q, dim))?;
    let sq: f64 = jp.as_slice().iter().zip(jq.as_slice()).map(|(a, b)| (a - b).powi(2)).sum();
    let l2j = L2J_SCALE * sq / tris.len() as f64;
    let l2n = (dim == 3).then(|| {
        let normal = |pts: &[Vec3], t: &[usize; 3]| (pts[t[1]] - pts[t[0]]).cross(&(pts[t[2]] - pts[t[0]]));
        tris.iter().map(|t| normal_angle_deg(&normal(&p, t), &normal(&q, t))).sum::<f64>() / tris.len() as f64
    });
    Ok(MapMetrics { l2v, l2j, l2n })
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Metrics of `model` on the given samples of `dataset`.
pub fn evaluate(model: &Model<f32>, dataset: &Dataset, indices: &[usize]) -> Result<EvalMetrics> {
    if dataset.code_dim() != model.code_dim || dataset.mode().map_mode() != model.mode {
        return Err(Error::Invalid("checkpoint does not match the dataset's code size or mode".into()));
    }
    if let Some(&bad) = indices.iter().find(|&&i| i >= dataset.samples.len()) {
        return Err(Error::Invalid(format!("sample {bad} does not exist")));
    }
    let prepared = prepare_all(model, dataset)?;
    let uv = model.mode == MapMode::Uv2;
    let results = map_indexed(indices.len(), |k| -> Result<(SampleMetrics, Option<_>)> {
        let index = indices[k];
        let sample = &dataset.samples[index];
        let entry = &dataset.meshes[sample.mesh];
        let pred = model.predict(entry, &prepared[sample.mesh], &sample.code)?;
        let r = if model.kind == ModelKind::Displacement { None } else { pred.r.as_ref() };
        let l = loss(&entry.cache, &entry.mesh, &pred.phi, r, &sample.psi)?;
        let metrics = map_metrics(entry, &pred.phi, &sample.psi)?;
        let (report, gt) = if uv {
            (
                Some(distortion_report(&entry.cache, &pred.phi, model.mode)?),
                Some(distortion_report(&entry.cache, &sample.psi, model.mode)?),
            )
        } else {
            (None, None)
        };
        let sm = SampleMetrics {
            index,
            mesh: sample.mesh,
            metrics,
            loss: l,
            flips: report.as_ref().and_then(|r| r.flips),
            count_d10: report.as_ref().map(|r| r.count_d10),
        };
        Ok((sm, report.zip(gt)))
    });
    let mut per_sample = Vec::with_capacity(indices.len());
    let mut reports = Vec::new();
    let mut gt_reports = Vec::new();
    for r in results {
        let (sm, rep) = r?;
        per_sample.push(sm);
        if let Some((p, g)) = rep {
            reports.push(p);
            gt_reports.push(g);
        }
    }
    let losses: Vec<LossBreakdown> = per_sample.iter().map(|s| s.loss).collect();
    Ok(EvalMetrics {
        kind: model.kind,
        mode: model.mode,
        samples: per_sample.len(),
        l2v: mean(per_sample.iter().map(|s| s.metrics.l2v)),
        l2j: mean(per_sample.iter().map(|s| s.metrics.l2j)),
        l2n: (!uv).then(|| mean(per_sample.iter().filter_map(|s| s.metrics.l2n))),
        loss: LossBreakdown::mean(&losses),
        distortion: uv.then(|| DistortionSummary::from_reports(&reports)),
        ground_truth_distortion: uv.then(|| DistortionSummary::from_reports(&gt_reports)),
        per_sample,
    })
}
