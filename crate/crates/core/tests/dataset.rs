mod common;

use common::*;
use jacfield::cache_io::{load_cache, read_cache_header, save_cache};
use jacfield::dataset::{
    generate_arap, generate_uv, load_dataset, read_code_file, read_manifest, save_dataset, split_indices, write_code_file,
    ArapDatasetConfig, DatasetMode, GenerateConfig, UvDatasetConfig,
};
use jacfield::features::{compute_spectrum, WksConfig};
use jacfield::fields::{distortion_report, MapMode};
use jacfield::operators::OperatorCache;
use jacfield::verify::verify_mesh;
use jacfield::{shapes, Error};

fn arap_config(samples: usize, seed: u64) -> GenerateConfig {
    GenerateConfig {
        mode: DatasetMode::Arap,
        seed,
        samples,
        test_count: Some(2),
        features: WksConfig {
            energies: 6,
            eigen_count: 12,
            ..Default::default()
        },
        arap: ArapDatasetConfig {
            handles: 4,
            region_rings: 1,
            ..Default::default()
        },
        ..Default::default()
    }
}

fn bar() -> jacfield::Mesh {
    shapes::bar(2.0, 0.3, 12, 6).unwrap()
}

#[test]
fn cache_file_round_trips_exactly() {
    let mesh = lumpy_sphere(2, &mut rng(600));
    let cache = OperatorCache::build(&mesh).unwrap();
    let spec = compute_spectrum(cache.laplacian(), mesh.vertex_masses(), 10).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.jfcache");
    save_cache(&path, &cache, Some(&spec), "abc").unwrap();
    let back = load_cache(&path).unwrap();
    assert_eq!(back.header.source_hash, "abc");
    assert_eq!(back.cache.laplacian(), cache.laplacian());
    assert_eq!(back.cache.grad().matrix(), cache.grad().matrix());
    assert_eq!(back.cache.mass(), cache.mass());
    assert_eq!(back.spectrum.unwrap().eigenvalues(), spec.eigenvalues());
    let b: Vec<f64> = (0..mesh.num_vertices()).map(|j| (j as f64 * 0.37).cos()).collect();
    assert_eq!(back.cache.solver().solve(&b, 1), cache.solver().solve(&b, 1));
    assert_eq!(read_cache_header(&path).unwrap().vertices, mesh.num_vertices());
}

#[test]
fn corrupted_cache_fails_its_checksum() {
    let mesh = unit_square();
    let cache = OperatorCache::build(&mesh).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.jfcache");
    save_cache(&path, &cache, None, "x").unwrap();
    let mut bytes = std::fs::read(&path).unwrap();
    let last = bytes.len() - 3;
    bytes[last] ^= 0x40;
    std::fs::write(&path, bytes).unwrap();
    let err = load_cache(&path).unwrap_err();
    assert!(matches!(err, Error::Format { .. }), "{err}");
    assert_eq!(err.exit_code(), 4);
}

#[test]
fn verify_passes_on_valid_meshes() {
    for mesh in [unit_square(), lumpy_sphere(2, &mut rng(601)), shapes::torus(1.0, 0.3, 12, 6).unwrap()] {
        let report = verify_mesh(&mesh, 7).unwrap();
        assert!(report.passed(), "{report:?}");
        assert_eq!(report.checks.len(), 4);
    }
}

#[test]
fn arap_generation_is_deterministic() {
    let a = generate_arap(&arap_config(6, 11), bar()).unwrap();
    let b = generate_arap(&arap_config(6, 11), bar()).unwrap();
    assert_eq!(a.samples, b.samples);
    assert_eq!(a.manifest, b.manifest);
    let c = generate_arap(&arap_config(6, 12), bar()).unwrap();
    assert_ne!(a.samples[0].code, c.samples[0].code);
}

#[test]
fn arap_samples_hit_their_handles_and_carry_anchor_codes() {
    let ds = generate_arap(&arap_config(4, 13), bar()).unwrap();
    let layout = ds.manifest.handles.clone().unwrap();
    assert_eq!(ds.code_dim(), 12);
    for s in &ds.samples {
        assert_eq!(s.code.len(), 12);
        for (k, &a) in layout.anchors.iter().enumerate() {
            for c in 0..3 {
                assert!((s.psi.row(a)[c] - s.code[3 * k + c]).abs() < 1e-12);
            }
        }
    }
    assert_eq!(ds.train().len() + ds.test().len(), 4);
}

#[test]
fn saved_datasets_reload_identically_and_manifests_are_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let (p1, p2) = (dir.path().join("a"), dir.path().join("b"));
    let mut a = generate_arap(&arap_config(5, 14), bar()).unwrap();
    save_dataset(&mut a, &p1).unwrap();
    let mut b = generate_arap(&arap_config(5, 14), bar()).unwrap();
    save_dataset(&mut b, &p2).unwrap();
    assert_eq!(std::fs::read(p1.join("manifest.json")).unwrap(), std::fs::read(p2.join("manifest.json")).unwrap());
    let back = load_dataset(&p1).unwrap();
    assert_eq!(back.samples, a.samples);
    assert_eq!(back.manifest, a.manifest);
    assert_eq!(back.meshes[0].mesh.vertices(), a.meshes[0].mesh.vertices());
    assert_eq!(back.meshes[0].cache.laplacian(), a.meshes[0].cache.laplacian());
    assert_eq!(read_manifest(&p1).unwrap(), a.manifest);
}

#[test]
fn corrupted_sample_is_a_format_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut ds = generate_arap(&arap_config(3, 15), bar()).unwrap();
    save_dataset(&mut ds, dir.path()).unwrap();
    let path = dir.path().join("sample_000001.bin");
    let mut bytes = std::fs::read(&path).unwrap();
    let k = bytes.len() / 2 + 5;
    bytes[k] ^= 1;
    std::fs::write(&path, bytes).unwrap();
    let err = load_dataset(dir.path()).unwrap_err();
    assert!(matches!(err, Error::Format { .. }), "{err}");
}

#[test]
fn missing_dataset_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let err = load_dataset(dir.path().join("nope")).unwrap_err();
    assert_eq!(err.exit_code(), 4);
}

#[test]
fn split_is_seeded_and_disjoint() {
    let a = split_indices(50, 5, 3);
    assert_eq!(a, split_indices(50, 5, 3));
    assert_eq!(a.test.len(), 5);
    assert_eq!(a.train.len(), 45);
    let mut all: Vec<usize> = a.train.iter().chain(&a.test).copied().collect();
    all.sort();
    assert_eq!(all, (0..50).collect::<Vec<_>>());
    assert_ne!(a.test, split_indices(50, 5, 4).test);
}

#[test]
fn code_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("z.json");
    let code = vec![0.1, -2.5, 1e-17, 3.0];
    write_code_file(&path, &code).unwrap();
    assert_eq!(read_code_file(&path).unwrap(), code);
    std::fs::write(&path, "{\"a\": 1}").unwrap();
    assert!(matches!(read_code_file(&path).unwrap_err(), Error::Format { .. }));
}

fn uv_config(samples: usize) -> GenerateConfig {
    GenerateConfig {
        mode: DatasetMode::Uv,
        seed: 21,
        samples,
        test_count: Some(1),
        features: WksConfig {
            energies: 4,
            eigen_count: 10,
            ..Default::default()
        },
        uv: UvDatasetConfig {
            min_triangles: 30,
            max_triangles: 400,
            ..Default::default()
        },
        ..Default::default()
    }
}

#[test]
fn uv_ground_truth_is_flip_free_and_aligned() {
    let bases = vec![shapes::icosphere(3).unwrap(), shapes::torus(1.0, 0.4, 24, 12).unwrap()];
    let ds = generate_uv(&uv_config(4), &bases).unwrap();
    assert_eq!(ds.manifest.all_ground_truth_flip_free, Some(true));
    assert_eq!(ds.code_dim(), 8);
    for s in &ds.samples {
        let entry = &ds.meshes[s.mesh];
        let rep = distortion_report(&entry.cache, &s.psi, MapMode::Uv2).unwrap();
        assert_eq!(rep.flips, Some(0));
        assert!(entry.mesh.num_triangles() >= 30 && entry.mesh.num_triangles() <= 400);
    }
}

#[test]
fn oversized_patches_on_a_closed_corpus_are_logged_as_rejections() {
    let mut cfg = uv_config(2);
    cfg.uv.radius_min = 0.3;
    cfg.uv.radius_max = 1.2;
    cfg.uv.max_triangles = 1000;
    let ds = generate_uv(&cfg, &[shapes::icosphere(2).unwrap()]).unwrap();
    assert!(!ds.manifest.rejections.is_empty());
}

#[test]
fn uv_mode_needs_wave_kernel_features() {
    let mut cfg = uv_config(1);
    cfg.features.energies = 0;
    assert!(generate_uv(&cfg, &[shapes::icosphere(2).unwrap()]).is_err());
}
