//! Command implementations behind the `jacfield` binary.
//!
//! Each command writes its artifacts to files and reports progress as text
//! lines on the given writer.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use jacfield::cache_io::{load_cache, read_cache_header, save_cache};
use jacfield::container::sha256_hex;
use jacfield::dataset::{
    generate, load_dataset, pooled_descriptor, read_code_file, save_dataset, Dataset, DatasetMode, GenerateConfig,
};
use jacfield::features::compute_spectrum;
use jacfield::fields::MapMode;
use jacfield::obj::{load_obj, write_obj, write_uv_obj};
use jacfield::oracle::patch::align_to_plane;
use jacfield::pipeline::{
    evaluate, infer, load_checkpoint, prepare_mesh, save_checkpoint, to_json_lines, train, EvalMetrics, TrainConfig,
    TrainOutcome,
};
use jacfield::verify::{verify_mesh, VerifyReport};
use jacfield::{Error, Mesh, OperatorCache, Result, Vec3};
use serde::{Deserialize, Serialize};

pub const RUN_CONFIG_SCHEMA: u32 = 1;

/// Settings shared by `generate` and `train`, read from one JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub seed: Option<u64>,
    #[serde(default)]
    pub generate: GenerateConfig,
    #[serde(default)]
    pub train: TrainConfig,
}

fn default_schema() -> u32 {
    RUN_CONFIG_SCHEMA
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: RUN_CONFIG_SCHEMA,
            seed: None,
            generate: GenerateConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.into(),
            source: e,
        })?;
        let cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| Error::Invalid(format!("config {}: {e}", path.display())))?;
        if cfg.schema_version != RUN_CONFIG_SCHEMA {
            return Err(Error::Invalid(format!(
                "config {}: schema version {} is not supported (expected {RUN_CONFIG_SCHEMA})",
                path.display(),
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    /// Applies the seed to every stochastic stage; a seed is required.
    pub fn resolve_seed(&mut self, flag: Option<u64>) -> Result<u64> {
        let seed = flag
            .or(self.seed)
            .ok_or_else(|| Error::Invalid("a seed is required (set \"seed\" in the config or pass --seed)".into()))?;
        self.seed = Some(seed);
        self.generate.seed = seed;
        self.train.seed = seed;
        Ok(seed)
    }

    /// Checks that every referenced input path exists.
    pub fn validate_paths(&self) -> Result<()> {
        for p in &self.generate.meshes {
            if !p.is_file() {
                return Err(Error::Invalid(format!("mesh {} does not exist", p.display())));
            }
        }
        Ok(())
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.into(),
        source: e,
    }
}

fn say(out: &mut dyn Write, line: std::fmt::Arguments) {
    // progress output is best effort
    let _ = writeln!(out, "{line}");
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Invalid(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))
}

#[derive(Debug)]
pub enum PreprocessStatus {
    Written { cache: PathBuf },
    Skipped { cache: PathBuf },
    Failed(Error),
}

/// Builds and stores operator caches (with spectra when `eigen_count > 0`),
/// skipping meshes whose cache already matches the file's content hash.
pub fn cmd_preprocess(
    meshes: &[PathBuf],
    out_dir: &Path,
    eigen_count: usize,
    out: &mut dyn Write,
) -> Result<Vec<(PathBuf, PreprocessStatus)>> {
    fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    let mut results = Vec::with_capacity(meshes.len());
    for path in meshes {
        let status = preprocess_one(path, out_dir, eigen_count);
        match &status {
            Ok(PreprocessStatus::Skipped { cache }) => {
                say(out, format_args!("{}: skipped (up to date) {}", path.display(), cache.display()))
            }
            Ok(PreprocessStatus::Written { cache }) => {
                say(out, format_args!("{}: wrote {}", path.display(), cache.display()))
            }
            _ => {}
        }
        let status = status.unwrap_or_else(|e| {
            say(out, format_args!("{}: error: {e}", path.display()));
            PreprocessStatus::Failed(e)
        });
        results.push((path.clone(), status));
    }
    Ok(results)
}

fn preprocess_one(path: &Path, out_dir: &Path, eigen_count: usize) -> Result<PreprocessStatus> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    let hash = sha256_hex(&bytes);
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "mesh".into());
    let cache_path = out_dir.join(format!("{stem}.jfcache"));
    let want_k = (eigen_count > 0).then_some(eigen_count);
    if let Ok(h) = read_cache_header(&cache_path) {
        let k_ok = match (h.spectrum_k, want_k) {
            (None, None) => true,
            (Some(have), Some(want)) => have == want.min(h.vertices - 1),
            _ => false,
        };
        if h.source_hash == hash && k_ok && load_cache(&cache_path).is_ok() {
            return Ok(PreprocessStatus::Skipped { cache: cache_path });
        }
    }
    let mesh = load_obj(path)?;
    let cache = OperatorCache::build(&mesh)?;
    let spectrum = match want_k {
        Some(k) => Some(compute_spectrum(cache.laplacian(), mesh.vertex_masses(), k.min(mesh.num_vertices() - 1))?),
        None => None,
    };
    save_cache(&cache_path, &cache, spectrum.as_ref(), &hash)?;
    Ok(PreprocessStatus::Written { cache: cache_path })
}

/// Generates and writes a dataset directory.
pub fn cmd_generate(config: &RunConfig, out_dir: &Path, out: &mut dyn Write) -> Result<Dataset> {
    config.validate_paths()?;
    say(
        out,
        format_args!(
            "generating {} {:?} samples (seed {}) into {}",
            config.generate.samples,
            config.generate.mode,
            config.generate.seed,
            out_dir.display()
        ),
    );
    let mut ds = generate(&config.generate)?;
    save_dataset(&mut ds, out_dir)?;
    say(
        out,
        format_args!(
            "wrote {} samples ({} train, {} test), {} meshes, {} rejected draws",
            ds.samples.len(),
            ds.train().len(),
            ds.test().len(),
            ds.meshes.len(),
            ds.manifest.rejections.len()
        ),
    );
    Ok(ds)
}

pub const CHECKPOINT_FILE: &str = "model.jfckpt";
pub const TRAIN_LOG_FILE: &str = "train_log.jsonl";
pub const TIMING_LOG_FILE: &str = "train_timing.jsonl";

/// Trains on a dataset directory; writes the checkpoint and both logs.
pub fn cmd_train(dataset_dir: &Path, config: &RunConfig, out_dir: &Path, out: &mut dyn Write) -> Result<TrainOutcome> {
    let ds = load_dataset(dataset_dir)?;
    fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    let tc = &config.train;
    say(
        out,
        format_args!(
            "training {:?} on {} samples for {} epochs (seed {})",
            tc.kind,
            tc.overfit.map_or(ds.train().len(), |n| n.min(ds.train().len())),
            tc.epochs,
            tc.seed
        ),
    );
    let outcome = train(&ds, tc, |r| {
        say(
            out,
            format_args!("epoch {:>4}  lr {:.1e}  lTotal {:.6e}  lV {:.6e}  lJ {:.6e}", r.epoch, r.lr, r.l_total, r.l_vertex, r.l_jacobian),
        )
    })?;
    let log_path = out_dir.join(TRAIN_LOG_FILE);
    fs::write(&log_path, to_json_lines(&outcome.log)?).map_err(|e| io_err(&log_path, e))?;
    let timing_path = out_dir.join(TIMING_LOG_FILE);
    fs::write(&timing_path, to_json_lines(&outcome.timing)?).map_err(|e| io_err(&timing_path, e))?;
    let echo = serde_json::json!({
        "config": config,
        "dataset": dataset_dir,
        "datasetSeed": ds.manifest.seed,
        "steps": outcome.steps,
        "epochs": outcome.log.len(),
    });
    save_checkpoint(out_dir.join(CHECKPOINT_FILE), &outcome.model, tc.seed, echo)?;
    say(out, format_args!("wrote {} after {} steps", out_dir.join(CHECKPOINT_FILE).display(), outcome.steps));
    Ok(outcome)
}

fn translate_to(points: &mut [f64], dim: usize, from: &[f64], to: &[f64]) {
    for row in points.chunks_exact_mut(dim) {
        for c in 0..dim {
            row[c] += to[c] - from[c];
        }
    }
}

/// Predicts the map of one mesh and writes it as OBJ. ARAP-mode outputs are
/// translated so their mass center matches the input's; UV-mode inputs are
/// normalized like generated patches and the code defaults to the pooled
/// descriptor of the mesh.
pub fn cmd_infer(
    checkpoint: &Path,
    mesh_path: &Path,
    code_path: Option<&Path>,
    out_path: &Path,
    out: &mut dyn Write,
) -> Result<()> {
    let (model, _) = load_checkpoint(checkpoint)?;
    let mut mesh = load_obj(mesh_path)?;
    if model.mode == MapMode::Uv2 {
        mesh = align_to_plane(&mesh)?.normalize_to_unit_sphere()?.0;
    }
    let entry = prepare_mesh(&model, "input", mesh)?;
    let code = match (code_path, model.mode) {
        (Some(p), _) => read_code_file(p)?,
        (None, MapMode::Uv2) => pooled_descriptor(&entry, &model.features)?,
        (None, _) => return Err(Error::Invalid("ARAP checkpoints need a code file (--code)".into())),
    };
    if code.len() != model.code_dim {
        return Err(Error::Invalid(format!(
            "code file has {} values, the checkpoint expects {}",
            code.len(),
            model.code_dim
        )));
    }
    let pred = infer(&model, &entry, &code)?;
    match model.mode {
        MapMode::Deform3 => {
            let src = entry.mesh.center_of_mass(&positions_map(&entry.mesh))?;
            let dst = entry.mesh.center_of_mass(&pred.phi)?;
            let mut data = pred.phi.as_slice().to_vec();
            translate_to(&mut data, 3, &dst, &src);
            let pts: Vec<Vec3> = data.chunks_exact(3).map(|r| Vec3::new(r[0], r[1], r[2])).collect();
            write_obj(out_path, &pts, entry.mesh.triangles())?;
        }
        MapMode::Uv2 => write_uv_obj(out_path, &pred.phi, entry.mesh.triangles())?,
    }
    say(out, format_args!("wrote {}", out_path.display()));
    Ok(())
}

fn positions_map(mesh: &Mesh) -> jacfield::VertexMap {
    let data = mesh.vertices().iter().flat_map(|p| [p.x, p.y, p.z]).collect();
    jacfield::VertexMap::from_rows(mesh.num_vertices(), 3, data).expect("finite mesh")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
    All,
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct EvalReport {
    pub checkpoint: PathBuf,
    pub dataset: PathBuf,
    pub split: Split,
    pub dataset_mode: DatasetMode,
    pub training: serde_json::Value,
    #[serde(flatten)]
    pub metrics: EvalMetrics,
}

/// Evaluates a checkpoint on a dataset split and writes a JSON report.
pub fn cmd_eval(checkpoint: &Path, dataset_dir: &Path, split: Split, report: &Path, out: &mut dyn Write) -> Result<EvalReport> {
    let (model, header) = load_checkpoint(checkpoint)?;
    let ds = load_dataset(dataset_dir)?;
    let indices: Vec<usize> = match split {
        Split::Train => ds.train().to_vec(),
        Split::Test => ds.test().to_vec(),
        Split::All => (0..ds.samples.len()).collect(),
    };
    if indices.is_empty() {
        return Err(Error::Invalid(format!("the {split:?} split is empty")));
    }
    let metrics = evaluate(&model, &ds, &indices)?;
    let l2n = metrics.l2n.map_or_else(String::new, |v| format!("  L2N {v:.3}°"));
    say(out, format_args!("{} samples  L2V {:.4}  L2J {:.4}{l2n}", metrics.samples, metrics.l2v, metrics.l2j));
    if let Some(d) = &metrics.distortion {
        say(out, format_args!("distortion {}", serde_json::to_string(d).unwrap_or_default()));
    }
    let rep = EvalReport {
        checkpoint: checkpoint.into(),
        dataset: dataset_dir.into(),
        split,
        dataset_mode: ds.mode(),
        training: header.training,
        metrics,
    };
    write_json(report, &rep)?;
    say(out, format_args!("wrote {}", report.display()));
    Ok(rep)
}

/// Runs the numerical self-checks on a mesh, and optionally loads a cache
/// file to verify its checksum.
pub fn cmd_verify(mesh_path: &Path, cache: Option<&Path>, seed: u64, out: &mut dyn Write) -> Result<VerifyReport> {
    if let Some(c) = cache {
        let file = load_cache(c)?;
        say(out, format_args!("cache {}: checksum ok ({} vertices)", c.display(), file.header.vertices));
    }
    let mesh = load_obj(mesh_path)?;
    let report = verify_mesh(&mesh, seed)?;
    say(out, format_args!("{}: {} vertices, {} triangles", mesh_path.display(), report.vertices, report.triangles));
    for c in &report.checks {
        let tag = if c.passed { "PASS" } else { "FAIL" };
        say(out, format_args!("{tag}  {:<48} residual {:.3e}  (tolerance {:.0e})", c.name, c.residual, c.tolerance));
    }
    Ok(report)
}

/// Per-field overrides from command-line flags; set flags win over the file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub values: BTreeMap<&'static str, serde_json::Value>,
}

impl Overrides {
    pub fn set(&mut self, key: &'static str, value: Option<impl Serialize>) {
        if let Some(v) = value {
            self.values.insert(key, serde_json::to_value(v).expect("serializable flag"));
        }
    }

    /// Writes each `a.b.c` override into the config's JSON form and parses
    /// it back, so overrides go through the same validation as the file.
    pub fn apply(&self, config: &RunConfig) -> Result<RunConfig> {
        let mut json = serde_json::to_value(config).map_err(|e| Error::Invalid(e.to_string()))?;
        for (key, value) in &self.values {
            let mut node = &mut json;
            let parts: Vec<&str> = key.split('.').collect();
            for part in &parts[..parts.len() - 1] {
                node = node
                    .as_object_mut()
                    .and_then(|o| o.get_mut(*part))
                    .ok_or_else(|| Error::Invalid(format!("unknown config key {key}")))?;
            }
            let obj = node.as_object_mut().ok_or_else(|| Error::Invalid(format!("unknown config key {key}")))?;
            obj.insert(parts[parts.len() - 1].to_string(), value.clone());
        }
        serde_json::from_value(json).map_err(|e| Error::Invalid(format!("bad override: {e}")))
    }
}
