//! Handle layouts and random handle configurations.

use nalgebra::{Rotation3, Unit};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Vec3};

use super::arap::HandleSet;

/// Anchor vertices and the vertex regions that move with them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandleLayout {
    pub anchors: Vec<usize>,
    pub regions: Vec<Vec<usize>>,
}

impl HandleLayout {
    /// `count` anchors by farthest-point sampling, starting from the vertex
    /// farthest from the area centroid, each with its `rings`-ring region.
    pub fn farthest_point(mesh: &Mesh, count: usize, rings: usize) -> Result<Self> {
        let v = mesh.vertices();
        if count < 2 || count > v.len() {
            return Err(Error::Invalid(format!("cannot place {count} handles on {} vertices", v.len())));
        }
        let c = mesh.area_centroid();
        let first = (0..v.len())
            .max_by(|&a, &b| (v[a] - c).norm().total_cmp(&(v[b] - c).norm()).then(b.cmp(&a)))
            .unwrap();
        let mut anchors = vec![first];
        let mut dist: Vec<f64> = v.iter().map(|p| (p - v[first]).norm()).collect();
        while anchors.len() < count {
            let next = (0..v.len())
                .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)))
                .unwrap();
            anchors.push(next);
            for (d, p) in dist.iter_mut().zip(v) {
                *d = d.min((p - v[next]).norm());
            }
        }
        let nbrs = mesh.vertex_neighbors();
        let regions: Vec<Vec<usize>> = anchors.iter().map(|&a| k_ring(&nbrs, a, rings)).collect();
        let mut owner = vec![usize::MAX; v.len()];
        for (h, region) in regions.iter().enumerate() {
            for &i in region {
                if owner[i] != usize::MAX {
                    return Err(Error::Invalid(format!("handle regions {} and {h} overlap", owner[i])));
                }
                owner[i] = h;
            }
        }
        Ok(Self { anchors, regions })
    }

    pub fn num_handles(&self) -> usize {
        self.anchors.len()
    }

    /// Every constrained vertex, region by region.
    pub fn constrained(&self) -> Vec<usize> {
        self.regions.iter().flatten().copied().collect()
    }

    /// Constraint set for given anchor targets: each region translates with
    /// its anchor.
    pub fn handle_set(&self, mesh: &Mesh, anchor_targets: &[Vec3]) -> Result<HandleSet> {
        if anchor_targets.len() != self.anchors.len() {
            return Err(Error::shape("handle_set", self.anchors.len(), anchor_targets.len()));
        }
        let v = mesh.vertices();
        let mut indices = Vec::new();
        let mut targets = Vec::new();
        for ((region, &a), t) in self.regions.iter().zip(&self.anchors).zip(anchor_targets) {
            let shift = t - v[a];
            for &i in region {
                indices.push(i);
                targets.push(v[i] + shift);
            }
        }
        Ok(HandleSet { indices, targets })
    }

    /// Flattened anchor targets, the conditioning code of a sample.
    pub fn code(anchor_targets: &[Vec3]) -> Vec<f64> {
        anchor_targets.iter().flat_map(|p| [p.x, p.y, p.z]).collect()
    }

    pub fn targets_from_code(code: &[f64]) -> Vec<Vec3> {
        code.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect()
    }
}

/// Vertices within `rings` edge hops of `center`, sorted.
pub fn k_ring(neighbors: &[Vec<usize>], center: usize, rings: usize) -> Vec<usize> {
    let mut seen = vec![false; neighbors.len()];
    seen[center] = true;
    let mut frontier = vec![center];
    let mut all = vec![center];
    for _ in 0..rings {
        let mut next = Vec::new();
        for &i in &frontier {
            for &j in &neighbors[i] {
                if !seen[j] {
                    seen[j] = true;
                    next.push(j);
                }
            }
        }
        all.extend_from_slice(&next);
        frontier = next;
    }
    all.sort_unstable();
    all
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct TargetSampling {
    pub max_angle_deg: f64,
    /// Largest per-handle shift as a fraction of the bounding-box diagonal.
    pub max_shift_fraction: f64,
}

impl Default for TargetSampling {
    fn default() -> Self {
        Self {
            max_angle_deg: 45.0,
            max_shift_fraction: 0.3,
        }
    }
}

pub fn random_unit_vector(rng: &mut impl Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        );
        let n = v.norm();
        if n > 1e-9 {
            return v / n;
        }
    }
}

/// Anchor targets: one rotation of all rest anchors about the area centroid
/// (random axis, angle up to the limit), then an independent random shift
/// per anchor.
pub fn sample_anchor_targets(mesh: &Mesh, layout: &HandleLayout, cfg: &TargetSampling, rng: &mut impl Rng) -> Vec<Vec3> {
    let c = mesh.area_centroid();
    let axis = Unit::new_normalize(random_unit_vector(rng));
    let angle = rng.random::<f64>() * cfg.max_angle_deg.to_radians();
    let rot = Rotation3::from_axis_angle(&axis, angle);
    let max_shift = cfg.max_shift_fraction * mesh.bounding_box_diagonal();
    layout
        .anchors
        .iter()
        .map(|&a| {
            let dir = random_unit_vector(rng);
            let shift = dir * (rng.random::<f64>() * max_shift);
            c + rot * (mesh.vertices()[a] - c) + shift
        })
        .collect()
}
