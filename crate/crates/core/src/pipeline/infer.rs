//! Single-mesh inference.

use crate::dataset::MeshEntry;
use crate::error::Result;
use crate::mesh::Mesh;

use super::model::{Model, Prediction};

/// Prepares `mesh` for `model` (operators and, when the model uses them,
/// spectral features).
pub fn prepare_mesh(model: &Model<f32>, id: &str, mesh: Mesh) -> Result<MeshEntry> {
    MeshEntry::build(id, mesh, &model.features)
}

/// Predicted map of `entry` under code `z`.
pub fn infer(model: &Model<f32>, entry: &MeshEntry, z: &[f64]) -> Result<Prediction> {
    let inputs = model.prepare(entry)?;
    model.predict(entry, &inputs, z)
}
