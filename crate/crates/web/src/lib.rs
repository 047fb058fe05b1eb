//! WebAssembly bindings for the browser demo.
//!
//! Three operations on a built-in mesh: a twist produced by integrating a
//! per-triangle rotation field with the Poisson solve, an ARAP bend driven by
//! end handles, and the numerical self-check suite.

use jacfield::fields::{restrict, ExtrinsicField};
use jacfield::oracle::arap::{arap_deform, ArapConfig, HandleSet};
use jacfield::verify::verify_mesh;
use jacfield::{poisson_solve, shapes, Mesh, OperatorCache, Vec3, VertexMap};
use nalgebra::{Rotation3, Vector3};
use wasm_bindgen::prelude::*;

/// Fraction of the x extent held by each end handle in `bend`.
const HANDLE_FRACTION: f64 = 0.12;

fn js(e: jacfield::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub struct Demo {
    mesh: Mesh,
    cache: OperatorCache,
    x_min: f64,
    x_max: f64,
}

/// Builds one of the demo shapes by name.
pub fn demo_mesh(shape: &str) -> jacfield::Result<Mesh> {
    match shape {
        "bar" => shapes::bar(2.0, 0.25, 32, 12),
        "creature" => shapes::creature(3),
        "torus" => shapes::torus(1.0, 0.35, 40, 16),
        "cylinder" => shapes::cylinder(0.4, 2.0, 24, 16).and_then(|m| m.map_vertices(|p| Vec3::new(p.z, p.x, p.y)).map_err(Into::into)),
        other => Err(jacfield::Error::Invalid(format!("unknown shape {other:?}"))),
    }
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(shape: &str) -> Result<Demo, JsError> {
        Self::build(shape).map_err(js)
    }

    pub fn vertex_count(&self) -> usize {
        self.mesh.num_vertices()
    }

    pub fn triangle_count(&self) -> usize {
        self.mesh.num_triangles()
    }

    /// Rest positions, flattened xyz.
    pub fn positions(&self) -> Vec<f64> {
        self.mesh.vertices().iter().flat_map(|p| [p.x, p.y, p.z]).collect()
    }

    /// Triangle indices, flattened.
    pub fn triangles(&self) -> Vec<u32> {
        self.mesh.triangles().iter().flatten().map(|&i| i as u32).collect()
    }

    /// Twists the mesh about the x axis by up to `degrees` at its far end.
    pub fn twist(&self, degrees: f64) -> Result<Vec<f64>, JsError> {
        self.twist_map(degrees).map(|m| m.into_vec()).map_err(js)
    }

    /// Bends the right end about the y axis by `degrees` with ARAP, the left
    /// end held fixed.
    pub fn bend(&self, degrees: f64, iterations: usize) -> Result<Vec<f64>, JsError> {
        self.bend_map(degrees, iterations).map(|m| m.into_vec()).map_err(js)
    }

    /// Self-check report as JSON.
    pub fn verify(&self, seed: u64) -> Result<String, JsError> {
        let report = verify_mesh(&self.mesh, seed).map_err(js)?;
        serde_json::to_string(&report).map_err(|e| JsError::new(&e.to_string()))
    }
}

impl Demo {
    pub fn build(shape: &str) -> jacfield::Result<Demo> {
        let mesh = demo_mesh(shape)?;
        let cache = OperatorCache::build(&mesh)?;
        let (x_min, x_max) = mesh
            .vertices()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.x), hi.max(p.x)));
        Ok(Demo {
            mesh,
            cache,
            x_min,
            x_max,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    fn along(&self, x: f64) -> f64 {
        (x - self.x_min) / (self.x_max - self.x_min)
    }

    /// Poisson integration of rotations about x whose angle grows linearly
    /// along x, recentred on the rest mass center.
    pub fn twist_map(&self, degrees: f64) -> jacfield::Result<VertexMap> {
        let mats = self
            .mesh
            .centroids()
            .iter()
            .map(|c| Rotation3::from_axis_angle(&Vector3::x_axis(), degrees.to_radians() * self.along(c.x)).into_inner())
            .collect();
        let r = restrict(&ExtrinsicField::new(mats), self.cache.frames(), 3)?;
        let phi = poisson_solve(&self.cache, &r)?;
        self.recenter(phi)
    }

    pub fn bend_map(&self, degrees: f64, iterations: usize) -> jacfield::Result<VertexMap> {
        let rot = Rotation3::from_axis_angle(&Vector3::y_axis(), degrees.to_radians());
        let right: Vec<&Vec3> = self.mesh.vertices().iter().filter(|p| self.along(p.x) > 1.0 - HANDLE_FRACTION).collect();
        let hinge = right.iter().copied().sum::<Vec3>() / right.len().max(1) as f64;
        let mut handles = HandleSet {
            indices: Vec::new(),
            targets: Vec::new(),
        };
        for (i, p) in self.mesh.vertices().iter().enumerate() {
            let t = self.along(p.x);
            if t < HANDLE_FRACTION {
                handles.indices.push(i);
                handles.targets.push(*p);
            } else if t > 1.0 - HANDLE_FRACTION {
                handles.indices.push(i);
                handles.targets.push(hinge + rot * (p - hinge));
            }
        }
        let config = ArapConfig {
            max_iters: iterations.max(1),
            ..Default::default()
        };
        Ok(arap_deform(&self.mesh, &handles, &config)?.positions)
    }

    fn recenter(&self, phi: VertexMap) -> jacfield::Result<VertexMap> {
        let rest = VertexMap::from_points(self.mesh.vertices());
        let c0 = self.mesh.center_of_mass(&rest)?;
        let c1 = self.mesh.center_of_mass(&phi)?;
        let shift: Vec<f64> = c1.iter().zip(&c0).map(|(a, b)| a - b).collect();
        Ok(phi.translated(&shift))
    }
}
