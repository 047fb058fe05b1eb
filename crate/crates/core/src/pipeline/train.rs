//! Mini-batch training with Adam and a one-time plateau learning-rate drop.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::nn::{Adam, AdamConfig, Real};
use crate::parallel::map_indexed;
use crate::poisson::VertexMap;

use super::loss::{loss_with_grad, LossBreakdown};
use super::model::{Architecture, BatchItem, Model, ModelKind, Prepared};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct PlateauConfig {
    /// Moving-average window over epoch losses.
    pub window: usize,
    /// Epochs over which the smoothed loss must improve.
    pub patience: usize,
    /// Minimum relative improvement that counts as progress.
    pub min_improvement: f64,
    pub reduced_lr: f64,
}

impl Default for PlateauConfig {
    fn default() -> Self {
        Self {
            window: 5,
            patience: 10,
            min_improvement: 0.01,
            reduced_lr: 1e-4,
        }
    }
}

impl PlateauConfig {
    /// Whether the loss history (one value per finished epoch) has plateaued.
    pub fn plateaued(&self, history: &[f64]) -> bool {
        let w = self.window.max(1);
        if history.len() < w + self.patience {
            return false;
        }
        let avg = |end: usize| history[end - w..end].iter().sum::<f64>() / w as f64;
        let now = avg(history.len());
        let before = avg(history.len() - self.patience);
        before <= 0.0 || (before - now) / before < self.min_improvement
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct TrainConfig {
    pub kind: ModelKind,
    pub arch: Architecture,
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Stops after this many optimizer steps, mid-epoch if needed.
    pub max_steps: Option<usize>,
    /// Trains on only the first `n` training samples.
    pub overfit: Option<usize>,
    pub adam: AdamConfig,
    pub plateau: PlateauConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            kind: ModelKind::JacobianField,
            arch: Architecture::default(),
            seed: 0,
            epochs: 100,
            batch_size: 8,
            max_steps: None,
            overfit: None,
            adam: AdamConfig::default(),
            plateau: PlateauConfig::default(),
        }
    }
}

/// Per-epoch mean training losses under the parameters used in that epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub l_vertex: f64,
    pub l_jacobian: f64,
    pub l_total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TimingRecord {
    pub epoch: usize,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model<f32>,
    pub log: Vec<EpochRecord>,
    pub timing: Vec<TimingRecord>,
    pub steps: usize,
}

/// Network inputs for every mesh of the dataset.
pub fn prepare_all<T: Real>(model: &Model<T>, dataset: &Dataset) -> Result<Vec<Prepared<T>>> {
    dataset.meshes.iter().map(|e| model.prepare(e)).collect()
}

/// Batch items for the given sample indices.
pub fn batch_items<'a, T>(dataset: &'a Dataset, prepared: &'a [Prepared<T>], indices: &[usize]) -> Vec<BatchItem<'a, T>> {
    indices
        .iter()
        .map(|&s| {
            let sample = &dataset.samples[s];
            BatchItem {
                entry: &dataset.meshes[sample.mesh],
                inputs: &prepared[sample.mesh],
                code: &sample.code,
            }
        })
        .collect()
}

/// Per-sample losses and the gradient of their mean, accumulated into
/// `grads` (which is overwritten).
pub fn batch_gradient<T: Real>(
    model: &Model<T>,
    items: &[BatchItem<'_, T>],
    targets: &[&VertexMap],
    grads: &mut [T],
) -> Result<Vec<LossBreakdown>> {
    let fwd = model.forward_batch(items)?;
    let scale = 1.0 / items.len() as f64;
    let with_jacobian = model.kind != ModelKind::Displacement;
    let results = map_indexed(items.len(), |k| {
        let p = &fwd.predictions[k];
        let r = if with_jacobian { p.r.as_ref() } else { None };
        loss_with_grad(&items[k].entry.cache, &items[k].entry.mesh, &p.phi, r, targets[k])
    });
    let mut losses = Vec::with_capacity(items.len());
    let mut gphi = Vec::with_capacity(items.len());
    let mut gr = Vec::with_capacity(items.len());
    for res in results {
        let (l, mut g) = res?;
        g.phi.as_mut_slice().iter_mut().for_each(|x| *x *= scale);
        if let Some(r) = g.r.as_mut() {
            r.as_mut_slice().iter_mut().for_each(|x| *x *= scale);
        }
        losses.push(l);
        gphi.push(g.phi);
        gr.push(g.r);
    }
    grads.iter_mut().for_each(|g| *g = T::zero());
    model.backward_batch(items, &fwd, &gphi, &gr, grads)?;
    Ok(losses)
}

fn check_dataset(dataset: &Dataset, config: &TrainConfig) -> Result<()> {
    if dataset.train().is_empty() {
        return Err(Error::Invalid("dataset has no training samples".into()));
    }
    if config.batch_size == 0 {
        return Err(Error::Invalid("batch size must be positive".into()));
    }
    if config.kind == ModelKind::GlobalTensor && dataset.meshes.len() != 1 {
        return Err(Error::Invalid(format!(
            "global tensor baseline needs a single-mesh dataset, found {} meshes",
            dataset.meshes.len()
        )));
    }
    Ok(())
}

/// A freshly initialized model for a dataset.
pub fn init_model(dataset: &Dataset, config: &TrainConfig) -> Result<Model<f32>> {
    check_dataset(dataset, config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let triangles = (config.kind == ModelKind::GlobalTensor).then(|| dataset.meshes[0].mesh.num_triangles());
    Model::new(
        config.kind,
        &config.arch,
        dataset.code_dim(),
        dataset.mode().map_mode(),
        dataset.manifest.config.features,
        triangles,
        &mut rng,
    )
}

/// Trains a model from scratch; `on_epoch` sees each record as it is made.
pub fn train(dataset: &Dataset, config: &TrainConfig, on_epoch: impl FnMut(&EpochRecord)) -> Result<TrainOutcome> {
    let model = init_model(dataset, config)?;
    train_from(dataset, config, model, on_epoch)
}

/// Trains starting from the given model.
pub fn train_from(
    dataset: &Dataset,
    config: &TrainConfig,
    mut model: Model<f32>,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    check_dataset(dataset, config)?;
    let prepared = prepare_all(&model, dataset)?;
    let mut pool: Vec<usize> = dataset.train().to_vec();
    if let Some(n) = config.overfit {
        pool.truncate(n.max(1));
    }
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    shuffle_rng.set_stream(1);
    let mut adam = Adam::new(config.adam, model.net.num_params());
    let mut grads = vec![0f32; model.net.num_params()];
    let mut log = Vec::new();
    let mut timing = Vec::new();
    let mut history = Vec::new();
    let mut dropped = false;
    let mut steps = 0;
    let start = Instant::now();
    'epochs: for epoch in 0..config.epochs {
        let mut order = pool.clone();
        order.shuffle(&mut shuffle_rng);
        let lr = adam.config.lr;
        let mut losses = Vec::with_capacity(order.len());
        for chunk in order.chunks(config.batch_size) {
            if config.max_steps.is_some_and(|m| steps >= m) {
                break;
            }
            let items = batch_items(dataset, &prepared, chunk);
            let targets: Vec<&VertexMap> = chunk.iter().map(|&s| &dataset.samples[s].psi).collect();
            let batch = batch_gradient(&model, &items, &targets, &mut grads).map_err(|e| match e {
                Error::Numeric(m) => Error::Numeric(format!("samples {chunk:?}: {m}")),
                other => other,
            })?;
            if batch.iter().any(|l| !l.l_total.is_finite()) {
                return Err(Error::Numeric(format!("non-finite loss in samples {chunk:?}")));
            }
            losses.extend(batch);
            adam.step(model.net.params_mut(), &grads);
            steps += 1;
        }
        if losses.is_empty() {
            break;
        }
        let mean = LossBreakdown::mean(&losses);
        let record = EpochRecord {
            epoch,
            lr,
            l_vertex: mean.l_vertex,
            l_jacobian: mean.l_jacobian,
            l_total: mean.l_total,
        };
        on_epoch(&record);
        log.push(record);
        timing.push(TimingRecord {
            epoch,
            wall_seconds: start.elapsed().as_secs_f64(),
        });
        history.push(mean.l_total);
        if !dropped && config.plateau.plateaued(&history) {
            adam.set_lr(config.plateau.reduced_lr);
            dropped = true;
        }
        if config.max_steps.is_some_and(|m| steps >= m) {
            break 'epochs;
        }
    }
    Ok(TrainOutcome {
        model,
        log,
        timing,
        steps,
    })
}

/// JSON-lines text, one record per line.
pub fn to_json_lines<R: Serialize>(records: &[R]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).map_err(|e| Error::Invalid(e.to_string()))?);
        out.push('\n');
    }
    Ok(out)
}
