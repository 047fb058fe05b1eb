use jacfield::dataset::{generate_arap, ArapDatasetConfig, Dataset, DatasetMode, GenerateConfig};
use jacfield::features::WksConfig;
use jacfield::nn::{InitScheme, Mlp, Real};
use jacfield::pipeline::{batch_gradient, batch_items, prepare_all, Architecture, Model, ModelKind};
use jacfield::poisson::VertexMap;
use jacfield::shapes;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_dataset(samples: usize) -> Dataset {
    let mesh = shapes::bar(2.0, 0.3, 12, 6).unwrap();
    let cfg = GenerateConfig {
        mode: DatasetMode::Arap,
        seed: 3,
        samples,
        test_count: Some(0),
        features: WksConfig {
            energies: 4,
            eigen_count: 8,
            ..Default::default()
        },
        arap: ArapDatasetConfig {
            handles: 4,
            region_rings: 1,
            ..Default::default()
        },
        ..Default::default()
    };
    generate_arap(&cfg, mesh).unwrap()
}

fn small_arch() -> Architecture {
    Architecture {
        hidden: 8,
        layers: 3,
        groups: 2,
        init: InitScheme::HeUniform,
    }
}

fn model<T: Real>(ds: &Dataset, kind: ModelKind, seed: u64) -> Model<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let triangles = (kind == ModelKind::GlobalTensor).then(|| ds.meshes[0].mesh.num_triangles());
    Model::new(kind, &small_arch(), ds.code_dim(), ds.mode().map_mode(), ds.manifest.config.features, triangles, &mut rng)
        .unwrap()
}

fn objective<T: Real>(m: &Model<T>, ds: &Dataset, idx: &[usize]) -> (f64, Vec<T>) {
    let prepared = prepare_all(m, ds).unwrap();
    let items = batch_items(ds, &prepared, idx);
    let targets: Vec<&VertexMap> = idx.iter().map(|&s| &ds.samples[s].psi).collect();
    let mut grads = vec![T::zero(); m.net.num_params()];
    let losses = batch_gradient(m, &items, &targets, &mut grads).unwrap();
    let mean = losses.iter().map(|l| l.l_total).sum::<f64>() / losses.len() as f64;
    (mean, grads)
}

fn with_param<T: Real>(m: &Model<T>, p: usize, v: T) -> Model<T> {
    let mut params = m.net.params().to_vec();
    params[p] = v;
    Model::from_net(m.kind, Mlp::from_params(*m.net.shape(), params).unwrap(), m.code_dim, m.mode, m.features, m.triangles)
        .unwrap()
}

/// Central differences over random parameters; returns the worst relative
/// error, measured against the larger of the two magnitudes and a floor.
fn fd_check<T: Real>(m: &Model<T>, ds: &Dataset, idx: &[usize], h: f64, picks: usize) -> f64 {
    let (_, grads) = objective(m, ds, idx);
    let gmax = grads.iter().map(|g| g.as_f64().abs()).fold(0.0, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst = 0.0f64;
    for _ in 0..picks {
        let p = rng.random_range(0..m.net.num_params());
        let x = m.net.params()[p].as_f64();
        let (lp, _) = objective(&with_param(m, p, T::from_f64(x + h)), ds, idx);
        let (lm, _) = objective(&with_param(m, p, T::from_f64(x - h)), ds, idx);
        let fd = (lp - lm) / (2.0 * h);
        let an = grads[p].as_f64();
        let err = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-3 * gmax);
        worst = worst.max(err);
    }
    worst
}

#[test]
fn field_model_gradient_matches_finite_differences_in_64_bit() {
    let ds = small_dataset(2);
    let m = model::<f64>(&ds, ModelKind::JacobianField, 5);
    let err = fd_check(&m, &ds, &[0, 1], 1e-6, 20);
    assert!(err < 1e-4, "relative error {err:.3e}");
}

#[test]
fn field_model_gradient_matches_finite_differences_in_32_bit() {
    let ds = small_dataset(2);
    let m = model::<f32>(&ds, ModelKind::JacobianField, 5);
    let err = fd_check(&m, &ds, &[0, 1], 1e-4, 20);
    assert!(err < 1e-2, "relative error {err:.3e}");
}

#[test]
fn displacement_gradient_matches_finite_differences() {
    let ds = small_dataset(2);
    let m = model::<f64>(&ds, ModelKind::Displacement, 6);
    let err = fd_check(&m, &ds, &[0, 1], 1e-6, 20);
    assert!(err < 1e-4, "relative error {err:.3e}");
}

#[test]
fn global_tensor_gradient_matches_finite_differences() {
    let ds = small_dataset(2);
    let m = model::<f64>(&ds, ModelKind::GlobalTensor, 7);
    let err = fd_check(&m, &ds, &[0, 1], 1e-6, 20);
    assert!(err < 1e-4, "relative error {err:.3e}");
}

#[test]
fn batch_gradient_is_the_mean_of_single_sample_gradients() {
    let ds = small_dataset(3);
    let m = model::<f64>(&ds, ModelKind::JacobianField, 8);
    let (_, batch) = objective(&m, &ds, &[0, 1, 2]);
    let singles: Vec<Vec<f64>> = (0..3).map(|s| objective(&m, &ds, &[s]).1).collect();
    let scale = batch.iter().map(|g| g.abs()).fold(0.0, f64::max);
    for (p, g) in batch.iter().enumerate() {
        let mean = singles.iter().map(|s| s[p]).sum::<f64>() / 3.0;
        assert!((g - mean).abs() <= 1e-6 * scale, "param {p}: {g} vs {mean}");
    }
}
