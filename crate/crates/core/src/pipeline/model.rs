//! Predictors: the per-triangle jacobian field and the two baselines, with
//! batched forward and backward passes through the Poisson layer.

use nalgebra::Matrix3;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::MeshEntry;
use crate::error::{Error, Result};
use crate::features::{centroid_features, vertex_features, WksConfig};
use crate::fields::{restrict, restrict_adjoint, ExtrinsicField, MapMode};
use crate::nn::{InitScheme, Mlp, MlpShape, Real};
use crate::parallel::map_indexed;
use crate::poisson::{poisson_adjoint, poisson_solve, JacobianField, VertexMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ModelKind {
    /// Per-triangle ambient matrices, restricted and integrated.
    JacobianField,
    /// Per-vertex offsets added to the source positions.
    Displacement,
    /// One network output holding every triangle's jacobian for a fixed mesh.
    GlobalTensor,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct Architecture {
    pub hidden: usize,
    pub layers: usize,
    pub groups: usize,
    pub init: InitScheme,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            hidden: MlpShape::DEFAULT_HIDDEN,
            layers: MlpShape::DEFAULT_LAYERS,
            groups: MlpShape::DEFAULT_GROUPS,
            init: InitScheme::HeUniform,
        }
    }
}

/// Per-mesh network inputs, cast to the parameter type.
#[derive(Debug, Clone)]
pub struct Prepared<T> {
    pub rows: usize,
    pub width: usize,
    pub data: Vec<T>,
}

/// A trained or initialized predictor.
#[derive(Debug, Clone)]
pub struct Model<T: Real> {
    pub kind: ModelKind,
    pub net: Mlp<T>,
    pub code_dim: usize,
    pub mode: MapMode,
    pub features: WksConfig,
    /// Triangle count the global-tensor baseline is tied to.
    pub triangles: Option<usize>,
}

/// Output of one sample's forward pass.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub phi: VertexMap,
    pub r: Option<JacobianField>,
}

/// One sample in a batch: its mesh, prepared inputs, and code.
#[derive(Debug, Clone, Copy)]
pub struct BatchItem<'a, T> {
    pub entry: &'a MeshEntry,
    pub inputs: &'a Prepared<T>,
    pub code: &'a [f64],
}

#[derive(Debug)]
pub struct BatchForward<T> {
    pub predictions: Vec<Prediction>,
    tape: crate::nn::Tape<T>,
    row_offsets: Vec<usize>,
}

impl<T: Real> Model<T> {
    pub fn feature_width(kind: ModelKind, features: &WksConfig) -> usize {
        match kind {
            ModelKind::GlobalTensor => 0,
            _ => 6 + features.energies,
        }
    }

    pub fn output_width(kind: ModelKind, mode: MapMode, triangles: Option<usize>) -> Result<usize> {
        Ok(match kind {
            ModelKind::JacobianField => 9,
            ModelKind::Displacement => mode.dim(),
            ModelKind::GlobalTensor => {
                let t = triangles.ok_or_else(|| Error::Invalid("global tensor model needs a triangle count".into()))?;
                2 * mode.dim() * t
            }
        })
    }

    pub fn shape_for(
        kind: ModelKind,
        arch: &Architecture,
        code_dim: usize,
        mode: MapMode,
        features: &WksConfig,
        triangles: Option<usize>,
    ) -> Result<MlpShape> {
        Ok(MlpShape {
            input: code_dim + Self::feature_width(kind, features),
            hidden: arch.hidden,
            layers: arch.layers,
            output: Self::output_width(kind, mode, triangles)?,
            groups: arch.groups,
        })
    }

    /// Hidden width (a positive multiple of `arch.groups`) whose parameter
    /// count is closest to `target`, other settings fixed.
    pub fn matched_hidden(
        kind: ModelKind,
        arch: &Architecture,
        code_dim: usize,
        mode: MapMode,
        features: &WksConfig,
        triangles: Option<usize>,
        target: usize,
    ) -> Result<usize> {
        let count = |hidden: usize| -> Result<usize> {
            let a = Architecture { hidden, ..*arch };
            Ok(Self::shape_for(kind, &a, code_dim, mode, features, triangles)?.num_params())
        };
        let g = arch.groups.max(1);
        let mut best = (g, count(g)?.abs_diff(target));
        let mut h = 2 * g;
        loop {
            let n = count(h)?;
            if n.abs_diff(target) < best.1 {
                best = (h, n.abs_diff(target));
            }
            if n > target {
                return Ok(best.0);
            }
            h += g;
        }
    }

    pub fn new(
        kind: ModelKind,
        arch: &Architecture,
        code_dim: usize,
        mode: MapMode,
        features: WksConfig,
        triangles: Option<usize>,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let shape = Self::shape_for(kind, arch, code_dim, mode, &features, triangles)?;
        let net = Mlp::init(shape, arch.init, rng)?;
        Self::from_net(kind, net, code_dim, mode, features, triangles)
    }

    pub fn from_net(
        kind: ModelKind,
        net: Mlp<T>,
        code_dim: usize,
        mode: MapMode,
        features: WksConfig,
        triangles: Option<usize>,
    ) -> Result<Self> {
        let expect = Self::output_width(kind, mode, triangles)?;
        if net.shape().output != expect || net.shape().input != code_dim + Self::feature_width(kind, &features) {
            return Err(Error::Invalid("network shape does not match the model configuration".into()));
        }
        Ok(Self {
            kind,
            net,
            code_dim,
            mode,
            features,
            triangles,
        })
    }

    /// Casts parameters to another scalar type.
    pub fn cast<U: Real>(&self) -> Model<U> {
        let params = self.net.params().iter().map(|p| U::from_f64(p.as_f64())).collect();
        Model {
            kind: self.kind,
            net: Mlp::from_params(*self.net.shape(), params).expect("same shape"),
            code_dim: self.code_dim,
            mode: self.mode,
            features: self.features,
            triangles: self.triangles,
        }
    }

    /// Per-mesh feature rows consumed by this model.
    pub fn prepare(&self, entry: &MeshEntry) -> Result<Prepared<T>> {
        if let (ModelKind::GlobalTensor, Some(t)) = (self.kind, self.triangles) {
            if t != entry.mesh.num_triangles() {
                return Err(Error::Invalid(format!(
                    "global tensor model is tied to {t} triangles; mesh {} has {}",
                    entry.id,
                    entry.mesh.num_triangles()
                )));
            }
        }
        let feats = match self.kind {
            ModelKind::JacobianField => centroid_features(&entry.mesh, entry.spectrum.as_ref(), &self.features)?,
            ModelKind::Displacement => vertex_features(&entry.mesh, entry.spectrum.as_ref(), &self.features)?,
            ModelKind::GlobalTensor => {
                return Ok(Prepared {
                    rows: 1,
                    width: 0,
                    data: Vec::new(),
                })
            }
        };
        Ok(Prepared {
            rows: feats.rows(),
            width: feats.width,
            data: feats.data.iter().map(|&x| T::from_f64(x)).collect(),
        })
    }

    fn assemble_rows(&self, items: &[BatchItem<'_, T>]) -> Result<(Vec<T>, Vec<usize>)> {
        let width = self.net.shape().input;
        let mut offsets = Vec::with_capacity(items.len() + 1);
        offsets.push(0);
        let total: usize = items.iter().map(|it| it.inputs.rows).sum();
        let mut x = Vec::with_capacity(total * width);
        for it in items {
            if it.code.len() != self.code_dim {
                return Err(Error::shape("model code", self.code_dim, it.code.len()));
            }
            if it.inputs.width + self.code_dim != width {
                return Err(Error::shape("model features", width - self.code_dim, it.inputs.width));
            }
            let code: Vec<T> = it.code.iter().map(|&z| T::from_f64(z)).collect();
            for r in 0..it.inputs.rows {
                x.extend_from_slice(&code);
                x.extend_from_slice(&it.inputs.data[r * it.inputs.width..(r + 1) * it.inputs.width]);
            }
            offsets.push(offsets.last().unwrap() + it.inputs.rows);
        }
        Ok((x, offsets))
    }

    fn frames_offset(entry: &MeshEntry, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; 2 * entry.cache.num_triangles() * dim];
        for (i, b) in entry.cache.frames().iter().enumerate() {
            for (a, col) in b.iter().enumerate() {
                for c in 0..dim {
                    out[(2 * i + a) * dim + c] = col[c];
                }
            }
        }
        out
    }

    /// Turns raw network rows for one sample into its prediction.
    fn decode(&self, entry: &MeshEntry, raw: &[T]) -> Result<Prediction> {
        let dim = self.mode.dim();
        match self.kind {
            ModelKind::JacobianField => {
                let raw32: Vec<f64> = raw.iter().map(|v| v.as_f64()).collect();
                let mats = raw32
                    .chunks_exact(9)
                    .map(|c| Matrix3::from_row_slice(c) + Matrix3::identity())
                    .collect();
                let r = restrict(&ExtrinsicField::new(mats), entry.cache.frames(), dim)?;
                let phi = poisson_solve(&entry.cache, &r)?;
                Ok(Prediction { phi, r: Some(r) })
            }
            ModelKind::Displacement => {
                let mut data = Vec::with_capacity(entry.mesh.num_vertices() * dim);
                for (p, off) in entry.mesh.vertices().iter().zip(raw.chunks_exact(dim)) {
                    for c in 0..dim {
                        data.push(p[c] + off[c].as_f64());
                    }
                }
                let phi = VertexMap::from_rows(entry.mesh.num_vertices(), dim, data)?;
                Ok(Prediction { phi, r: None })
            }
            ModelKind::GlobalTensor => {
                let mut stack = Self::frames_offset(entry, dim);
                for (s, v) in stack.iter_mut().zip(raw) {
                    *s += v.as_f64();
                }
                let r = JacobianField::from_stack(entry.cache.num_triangles(), dim, stack)?;
                let phi = poisson_solve(&entry.cache, &r)?;
                Ok(Prediction { phi, r: Some(r) })
            }
        }
    }

    /// Forward pass keeping what the backward pass needs.
    pub fn forward_batch(&self, items: &[BatchItem<'_, T>]) -> Result<BatchForward<T>> {
        let (x, offsets) = self.assemble_rows(items)?;
        let n = *offsets.last().unwrap();
        let (raw, tape) = self.net.forward_with_tape(&x, n);
        let out = self.net.shape().output;
        let predictions = map_indexed(items.len(), |k| {
            self.decode(items[k].entry, &raw[offsets[k] * out..offsets[k + 1] * out])
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        Ok(BatchForward {
            predictions,
            tape,
            row_offsets: offsets,
        })
    }

    /// Prediction for a single mesh and code, without a tape.
    pub fn predict(&self, entry: &MeshEntry, inputs: &Prepared<T>, code: &[f64]) -> Result<Prediction> {
        let item = BatchItem { entry, inputs, code };
        let (x, offsets) = self.assemble_rows(&[item])?;
        let raw = self.net.forward(&x, offsets[1]);
        self.decode(entry, &raw)
    }

    /// Accumulates parameter gradients for upstream gradients on each
    /// sample's `Φ` and (when present) `R`.
    pub fn backward_batch(
        &self,
        items: &[BatchItem<'_, T>],
        fwd: &BatchForward<T>,
        grad_phi: &[VertexMap],
        grad_r: &[Option<JacobianField>],
        grads: &mut [T],
    ) -> Result<()> {
        let out = self.net.shape().output;
        let per_item = map_indexed(items.len(), |k| -> Result<Vec<T>> {
            let entry = items[k].entry;
            match self.kind {
                ModelKind::Displacement => Ok(grad_phi[k].as_slice().iter().map(|&g| T::from_f64(g)).collect()),
                ModelKind::JacobianField | ModelKind::GlobalTensor => {
                    let mut dr = poisson_adjoint(&entry.cache, &grad_phi[k])?;
                    if let Some(direct) = &grad_r[k] {
                        for (a, b) in dr.as_mut_slice().iter_mut().zip(direct.as_slice()) {
                            *a += b;
                        }
                    }
                    if self.kind == ModelKind::GlobalTensor {
                        return Ok(dr.as_slice().iter().map(|&g| T::from_f64(g)).collect());
                    }
                    let dp = restrict_adjoint(&dr, entry.cache.frames())?;
                    Ok(dp.to_row_major().into_iter().map(T::from_f64).collect())
                }
            }
        });
        let mut dy = Vec::with_capacity(fwd.row_offsets.last().unwrap() * out);
        for g in per_item {
            dy.extend(g?);
        }
        self.net.backward(&fwd.tape, &dy, grads);
        Ok(())
    }
}
