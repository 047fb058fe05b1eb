//! Ground-truth dataset generation and its on-disk layout.
//!
//! A dataset directory holds `manifest.json`, one `sample_%06d.bin` per
//! sample, and `meshes/` with each source mesh as OBJ plus its operator
//! cache.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cache_io::{load_cache, save_cache};
use crate::container::{decode_framed, encode_framed, read_bytes, sha256_hex, PayloadReader, PayloadWriter};
use crate::error::{Error, Result};
use crate::features::{centroid_features, compute_spectrum, SpectralData, WksConfig};
use crate::fields::MapMode;
use crate::mesh::Mesh;
use crate::obj::{load_obj, mesh_to_obj_string};
use crate::operators::OperatorCache;
use crate::oracle::arap::{arap_deform, ArapConfig};
use crate::oracle::param::{apply_rigid_2d, arap_parameterize, procrustes_2d, tutte_embed, ParamConfig};
use crate::oracle::patch::extract_disk_patch;
use crate::oracle::sampling::{sample_anchor_targets, HandleLayout, TargetSampling};
use crate::parallel::map_indexed;
use crate::poisson::VertexMap;

pub const MANIFEST_FORMAT: &str = "jfdata-1";
pub const SAMPLE_FORMAT: &str = "jfsample-1";
pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetMode {
    Arap,
    Uv,
}

impl DatasetMode {
    pub fn map_mode(self) -> MapMode {
        match self {
            DatasetMode::Arap => MapMode::Deform3,
            DatasetMode::Uv => MapMode::Uv2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct ArapDatasetConfig {
    pub handles: usize,
    /// Edge-hop radius of the vertex region moving with each anchor.
    pub region_rings: usize,
    pub targets: TargetSampling,
    pub solver: ArapConfig,
}

impl Default for ArapDatasetConfig {
    fn default() -> Self {
        Self {
            handles: 6,
            region_rings: 2,
            targets: TargetSampling::default(),
            solver: ArapConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct UvDatasetConfig {
    /// Patch radius range as fractions of the base mesh's bounding-box
    /// diagonal.
    pub radius_min: f64,
    pub radius_max: f64,
    pub min_triangles: usize,
    pub max_triangles: usize,
    pub max_attempts: usize,
    pub param: ParamConfig,
}

impl Default for UvDatasetConfig {
    fn default() -> Self {
        Self {
            radius_min: 0.1,
            radius_max: 0.4,
            min_triangles: 100,
            max_triangles: 800,
            max_attempts: 200,
            param: ParamConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct GenerateConfig {
    pub mode: DatasetMode,
    pub seed: u64,
    pub samples: usize,
    /// Held-out samples; defaults to 10% of `samples`.
    pub test_count: Option<usize>,
    /// Source meshes (one in ARAP mode, a corpus in UV mode).
    pub meshes: Vec<PathBuf>,
    pub features: WksConfig,
    pub arap: ArapDatasetConfig,
    pub uv: UvDatasetConfig,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        Self {
            mode: DatasetMode::Arap,
            seed: 0,
            samples: 100,
            test_count: None,
            meshes: Vec::new(),
            features: WksConfig::default(),
            arap: ArapDatasetConfig::default(),
            uv: UvDatasetConfig::default(),
        }
    }
}

impl GenerateConfig {
    pub fn test_count(&self) -> usize {
        self.test_count
            .unwrap_or_else(|| ((self.samples as f64) * 0.1).round() as usize)
            .min(self.samples)
    }
}

/// A mesh with its precomputed operators and (optional) spectrum.
#[derive(Debug)]
pub struct MeshEntry {
    pub id: String,
    pub mesh: Mesh,
    pub cache: OperatorCache,
    pub spectrum: Option<SpectralData>,
}

impl MeshEntry {
    pub fn build(id: impl Into<String>, mesh: Mesh, features: &WksConfig) -> Result<Self> {
        let cache = OperatorCache::build(&mesh)?;
        let spectrum = if features.energies > 0 {
            let k = features.eigen_count.min(mesh.num_vertices() - 1);
            Some(compute_spectrum(cache.laplacian(), mesh.vertex_masses(), k)?)
        } else {
            None
        };
        Ok(Self {
            id: id.into(),
            mesh,
            cache,
            spectrum,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub mesh: usize,
    pub psi: VertexMap,
    pub code: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ManifestMesh {
    pub id: String,
    pub obj: String,
    pub cache: String,
    pub vertices: usize,
    pub triangles: usize,
    pub source_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ManifestSample {
    pub index: usize,
    pub file: String,
    pub mesh: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Rejection {
    pub sample: usize,
    pub attempt: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Manifest {
    pub format: String,
    pub schema_version: u32,
    pub mode: DatasetMode,
    pub seed: u64,
    pub config: GenerateConfig,
    pub code_dim: usize,
    pub dim: usize,
    pub meshes: Vec<ManifestMesh>,
    pub handles: Option<HandleLayout>,
    pub samples: Vec<ManifestSample>,
    pub rejections: Vec<Rejection>,
    pub split: Split,
    pub all_ground_truth_flip_free: Option<bool>,
}

/// A dataset in memory.
#[derive(Debug)]
pub struct Dataset {
    pub manifest: Manifest,
    pub meshes: Vec<MeshEntry>,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn mode(&self) -> DatasetMode {
        self.manifest.mode
    }

    pub fn code_dim(&self) -> usize {
        self.manifest.code_dim
    }

    pub fn train(&self) -> &[usize] {
        &self.manifest.split.train
    }

    pub fn test(&self) -> &[usize] {
        &self.manifest.split.test
    }
}

fn sample_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Seeded shuffle of sample indices into train and test lists (each sorted).
pub fn split_indices(n: usize, test_count: usize, seed: u64) -> Split {
    let mut rng = sample_rng(seed, u64::MAX);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    let mut test = idx[..test_count.min(n)].to_vec();
    let mut train = idx[test_count.min(n)..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Split { train, test }
}

fn base_manifest(config: &GenerateConfig, code_dim: usize, dim: usize) -> Manifest {
    Manifest {
        format: MANIFEST_FORMAT.into(),
        schema_version: CONFIG_SCHEMA_VERSION,
        mode: config.mode,
        seed: config.seed,
        config: config.clone(),
        code_dim,
        dim,
        meshes: Vec::new(),
        handles: None,
        samples: Vec::new(),
        rejections: Vec::new(),
        split: split_indices(config.samples, config.test_count(), config.seed),
        all_ground_truth_flip_free: None,
    }
}

/// Generates an ARAP-deformation dataset on one mesh.
pub fn generate_arap(config: &GenerateConfig, mesh: Mesh) -> Result<Dataset> {
    let cfg = &config.arap;
    let layout = HandleLayout::farthest_point(&mesh, cfg.handles, cfg.region_rings)?;
    let entry = MeshEntry::build("mesh_000", mesh, &config.features)?;
    let mesh = &entry.mesh;
    let results = map_indexed(config.samples, |i| -> Result<Sample> {
        let mut rng = sample_rng(config.seed, i as u64 + 1);
        let targets = sample_anchor_targets(mesh, &layout, &cfg.targets, &mut rng);
        let handles = layout.handle_set(mesh, &targets)?;
        let res = arap_deform(mesh, &handles, &cfg.solver)?;
        Ok(Sample {
            mesh: 0,
            psi: res.positions,
            code: HandleLayout::code(&targets),
        })
    });
    let samples = results.into_iter().collect::<Result<Vec<_>>>()?;
    let mut manifest = base_manifest(config, 3 * layout.num_handles(), 3);
    manifest.handles = Some(layout);
    Ok(Dataset {
        manifest,
        meshes: vec![entry],
        samples,
    })
}

/// Mean and max of each wave-kernel band over a patch's triangles.
pub fn pooled_descriptor(entry: &MeshEntry, features: &WksConfig) -> Result<Vec<f64>> {
    let f = centroid_features(&entry.mesh, entry.spectrum.as_ref(), features)?;
    let w = features.energies;
    let mut mean = vec![0.0; w];
    let mut max = vec![f64::NEG_INFINITY; w];
    for t in 0..f.rows() {
        for (k, &x) in f.row(t)[6..].iter().enumerate() {
            mean[k] += x / f.rows() as f64;
            max[k] = max[k].max(x);
        }
    }
    mean.extend(max);
    Ok(mean)
}

struct UvDraw {
    entry: MeshEntry,
    sample: Sample,
    rejections: Vec<Rejection>,
}

/// Generates a UV-parameterization dataset of disk patches cut from
/// `bases`; each sample owns its patch mesh.
pub fn generate_uv(config: &GenerateConfig, bases: &[Mesh]) -> Result<Dataset> {
    if bases.is_empty() {
        return Err(Error::Invalid("UV mode needs at least one base mesh".into()));
    }
    if config.features.energies == 0 {
        return Err(Error::Invalid("UV mode needs wave-kernel features (energies > 0)".into()));
    }
    let cfg = &config.uv;
    let draws = map_indexed(config.samples, |i| -> Result<UvDraw> {
        let mut rng = sample_rng(config.seed, i as u64 + 1);
        let mut rejections = Vec::new();
        for attempt in 0..cfg.max_attempts {
            let base = &bases[rng.random_range(0..bases.len())];
            let seed_vertex = rng.random_range(0..base.num_vertices());
            let frac = cfg.radius_min + (cfg.radius_max - cfg.radius_min) * rng.random::<f64>();
            let radius = frac * base.bounding_box_diagonal();
            let mut reject = |reason: String| {
                rejections.push(Rejection {
                    sample: i,
                    attempt,
                    reason,
                })
            };
            let patch = match extract_disk_patch(base, seed_vertex, radius) {
                Ok(p) => p,
                Err(e) => {
                    reject(e.to_string());
                    continue;
                }
            };
            let t = patch.num_triangles();
            if t < cfg.min_triangles || t > cfg.max_triangles {
                reject(format!("patch has {t} triangles"));
                continue;
            }
            let (patch, _, _) = patch.normalize_to_unit_sphere()?;
            let entry = MeshEntry::build(format!("patch_{i:06}"), patch, &config.features)?;
            let init = tutte_embed(&entry.mesh)?;
            let param = arap_parameterize(&entry.mesh, &entry.cache, &init, &cfg.param)?;
            if param.report.flips != Some(0) {
                reject(format!("parameterization has {} flipped triangles", param.report.flips.unwrap_or(0)));
                continue;
            }
            let xy: Vec<[f64; 2]> = entry.mesh.vertices().iter().map(|p| [p.x, p.y]).collect();
            let (theta, shift) = procrustes_2d(&param.uv, &xy, entry.mesh.vertex_masses())?;
            let psi = apply_rigid_2d(&param.uv, theta, shift);
            let code = pooled_descriptor(&entry, &config.features)?;
            return Ok(UvDraw {
                entry,
                sample: Sample { mesh: i, psi, code },
                rejections,
            });
        }
        Err(Error::Numeric(format!("sample {i}: no valid patch after {} attempts", cfg.max_attempts)))
    });
    let mut meshes = Vec::with_capacity(config.samples);
    let mut samples = Vec::with_capacity(config.samples);
    let mut rejections = Vec::new();
    for d in draws {
        let d = d?;
        meshes.push(d.entry);
        samples.push(d.sample);
        rejections.extend(d.rejections);
    }
    let mut manifest = base_manifest(config, 2 * config.features.energies, 2);
    manifest.rejections = rejections;
    manifest.all_ground_truth_flip_free = Some(true);
    Ok(Dataset {
        manifest,
        meshes,
        samples,
    })
}

/// Loads the configured source meshes and generates the dataset.
pub fn generate(config: &GenerateConfig) -> Result<Dataset> {
    let meshes = config.meshes.iter().map(load_obj).collect::<Result<Vec<_>>>()?;
    match config.mode {
        DatasetMode::Arap => {
            let [mesh] = <[Mesh; 1]>::try_from(meshes)
                .map_err(|m| Error::Invalid(format!("ARAP mode needs exactly one mesh, got {}", m.len())))?;
            generate_arap(config, mesh)
        }
        DatasetMode::Uv => generate_uv(config, &meshes),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct SampleHeader {
    format: String,
    mesh_id: String,
    mode: DatasetMode,
    vertices: usize,
    dim: usize,
    code_dim: usize,
}

fn sample_file(i: usize) -> String {
    format!("sample_{i:06}.bin")
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Writes the dataset directory and fills in the manifest's file entries.
pub fn save_dataset(dataset: &mut Dataset, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    create_dir(&dir.join("meshes"))?;
    dataset.manifest.meshes.clear();
    for entry in &dataset.meshes {
        let obj_name = format!("meshes/{}.obj", entry.id);
        let cache_name = format!("meshes/{}.jfcache", entry.id);
        let text = mesh_to_obj_string(entry.mesh.vertices(), entry.mesh.triangles());
        let obj_path = dir.join(&obj_name);
        fs::write(&obj_path, &text).map_err(|e| Error::io(&obj_path, e))?;
        let hash = sha256_hex(text.as_bytes());
        save_cache(dir.join(&cache_name), &entry.cache, entry.spectrum.as_ref(), &hash)?;
        dataset.manifest.meshes.push(ManifestMesh {
            id: entry.id.clone(),
            obj: obj_name,
            cache: cache_name,
            vertices: entry.mesh.num_vertices(),
            triangles: entry.mesh.num_triangles(),
            source_hash: hash,
        });
    }
    dataset.manifest.samples.clear();
    for (i, s) in dataset.samples.iter().enumerate() {
        let header = SampleHeader {
            format: SAMPLE_FORMAT.into(),
            mesh_id: dataset.meshes[s.mesh].id.clone(),
            mode: dataset.manifest.mode,
            vertices: s.psi.rows(),
            dim: s.psi.dim(),
            code_dim: s.code.len(),
        };
        let mut w = PayloadWriter::default();
        w.f64s(s.psi.as_slice()).f64s(&s.code);
        let name = sample_file(i);
        let bytes = encode_framed(&header, &w.bytes)?;
        let path = dir.join(&name);
        fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?;
        dataset.manifest.samples.push(ManifestSample {
            index: i,
            file: name,
            mesh: s.mesh,
            sha256: sha256_hex(&bytes),
        });
    }
    write_manifest(&dataset.manifest, dir)
}

fn write_manifest(manifest: &Manifest, dir: &Path) -> Result<()> {
    let path = dir.join("manifest.json");
    let mut text =
        serde_json::to_string_pretty(manifest).map_err(|e| Error::Invalid(format!("manifest serialization: {e}")))?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

pub fn read_manifest(dir: impl AsRef<Path>) -> Result<Manifest> {
    let path = dir.as_ref().join("manifest.json");
    let bytes = read_bytes(&path)?;
    let manifest: Manifest =
        serde_json::from_slice(&bytes).map_err(|e| Error::format(&path, format!("bad manifest: {e}")))?;
    if manifest.format != MANIFEST_FORMAT {
        return Err(Error::format(&path, format!("unsupported format {:?}", manifest.format)));
    }
    Ok(manifest)
}

/// Loads a dataset directory, verifying every file against the manifest.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Dataset> {
    let dir = dir.as_ref();
    let manifest = read_manifest(dir)?;
    let mut meshes = Vec::with_capacity(manifest.meshes.len());
    for m in &manifest.meshes {
        let obj_path = dir.join(&m.obj);
        let bytes = read_bytes(&obj_path)?;
        if sha256_hex(&bytes) != m.source_hash {
            return Err(Error::format(&obj_path, "mesh file does not match the manifest hash"));
        }
        let mesh = load_obj(&obj_path)?;
        let cache_path = dir.join(&m.cache);
        let file = load_cache(&cache_path)?;
        if file.header.source_hash != m.source_hash || file.cache.num_vertices() != mesh.num_vertices() {
            return Err(Error::format(&cache_path, "cache was built from a different mesh"));
        }
        meshes.push(MeshEntry {
            id: m.id.clone(),
            mesh,
            cache: file.cache,
            spectrum: file.spectrum,
        });
    }
    let mut samples = Vec::with_capacity(manifest.samples.len());
    for s in &manifest.samples {
        let path = dir.join(&s.file);
        let bytes = read_bytes(&path)?;
        if sha256_hex(&bytes) != s.sha256 {
            return Err(Error::format(&path, "sample checksum mismatch"));
        }
        let (h, payload): (SampleHeader, _) = decode_framed(&path, &bytes)?;
        if h.format != SAMPLE_FORMAT || s.mesh >= meshes.len() || h.vertices != meshes[s.mesh].mesh.num_vertices() {
            return Err(Error::format(&path, "sample header inconsistent with manifest"));
        }
        let mut r = PayloadReader::new(&path, payload);
        let psi = VertexMap::from_rows(h.vertices, h.dim, r.f64s(h.vertices * h.dim)?)?;
        let code = r.f64s(h.code_dim)?;
        r.finish()?;
        samples.push(Sample {
            mesh: s.mesh,
            psi,
            code,
        });
    }
    Ok(Dataset {
        manifest,
        meshes,
        samples,
    })
}

/// Writes a conditioning code as a JSON array.
pub fn write_code_file(path: impl AsRef<Path>, code: &[f64]) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string(code).map_err(|e| Error::Invalid(e.to_string()))?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_code_file(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    serde_json::from_slice(&bytes).map_err(|e| Error::format(path, format!("code file must be a JSON number array: {e}")))
}
