//! The `jfcache-1` operator cache file.
//!
//! Sections, in order: frames (T × 6 f64), gradient CSR (row pointers and
//! column indices as u64, values as f64), mass diagonal (2T f64), Laplacian
//! CSR, and optionally the spectrum (k eigenvalues, V × k eigenvectors).
//! The factorization is recomputed on load.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::container::{decode_framed, read_bytes, sha256_hex, write_framed, PayloadReader, PayloadWriter};
use crate::error::{Error, Result};
use crate::features::SpectralData;
use crate::mesh::Vec3;
use crate::operators::{FrameSet, GradientOperator, OperatorCache};
use crate::sparse::CsrMatrix;

pub const CACHE_FORMAT: &str = "jfcache-1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CacheHeader {
    pub format: String,
    pub vertices: usize,
    pub triangles: usize,
    pub pin: usize,
    pub gradient_nnz: usize,
    pub laplacian_nnz: usize,
    pub spectrum_k: Option<usize>,
    /// Hash of the mesh file the cache was built from.
    pub source_hash: String,
    pub payload_sha256: String,
}

/// A loaded cache file.
#[derive(Debug)]
pub struct CacheFile {
    pub header: CacheHeader,
    pub cache: OperatorCache,
    pub spectrum: Option<SpectralData>,
}

fn csr_section(w: &mut PayloadWriter, m: &CsrMatrix) {
    w.u64s(m.row_ptr()).u64s(m.col_idx()).f64s(m.values());
}

pub fn save_cache(
    path: impl AsRef<Path>,
    cache: &OperatorCache,
    spectrum: Option<&SpectralData>,
    source_hash: &str,
) -> Result<()> {
    let mut w = PayloadWriter::default();
    for [c1, c2] in cache.frames().iter() {
        w.f64s(c1.as_slice()).f64s(c2.as_slice());
    }
    csr_section(&mut w, cache.grad().matrix());
    w.f64s(cache.mass());
    csr_section(&mut w, cache.laplacian());
    if let Some(s) = spectrum {
        w.f64s(s.eigenvalues()).f64s(s.eigenvectors());
    }
    let header = CacheHeader {
        format: CACHE_FORMAT.into(),
        vertices: cache.num_vertices(),
        triangles: cache.num_triangles(),
        pin: cache.pin(),
        gradient_nnz: cache.grad().matrix().nnz(),
        laplacian_nnz: cache.laplacian().nnz(),
        spectrum_k: spectrum.map(SpectralData::k),
        source_hash: source_hash.into(),
        payload_sha256: sha256_hex(&w.bytes),
    };
    write_framed(path, &header, &w.bytes)
}

/// Reads only the header, e.g. to check whether a cache is up to date.
pub fn read_cache_header(path: impl AsRef<Path>) -> Result<CacheHeader> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    let (header, _): (CacheHeader, _) = decode_framed(path, &bytes)?;
    Ok(header)
}

pub fn load_cache(path: impl AsRef<Path>) -> Result<CacheFile> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    let (header, payload): (CacheHeader, _) = decode_framed(path, &bytes)?;
    if header.format != CACHE_FORMAT {
        return Err(Error::format(path, format!("unsupported format {:?}", header.format)));
    }
    if sha256_hex(payload) != header.payload_sha256 {
        return Err(Error::format(path, "payload checksum mismatch (corrupted cache)"));
    }
    let (v, t) = (header.vertices, header.triangles);
    let mut r = PayloadReader::new(path, payload);
    let raw = r.f64s(6 * t)?;
    let frames = raw
        .chunks_exact(6)
        .map(|c| [Vec3::new(c[0], c[1], c[2]), Vec3::new(c[3], c[4], c[5])])
        .collect();
    let mut read_csr = |rows: usize, cols: usize, nnz: usize| -> Result<CsrMatrix> {
        let ptr = r.u64s(rows + 1)?;
        let idx = r.u64s(nnz)?;
        let vals = r.f64s(nnz)?;
        CsrMatrix::from_raw(rows, cols, ptr, idx, vals).map_err(|e| Error::format(path, e.to_string()))
    };
    let grad = read_csr(2 * t, v, header.gradient_nnz)?;
    let mass = r.f64s(2 * t)?;
    let laplacian = {
        let ptr = r.u64s(v + 1)?;
        let idx = r.u64s(header.laplacian_nnz)?;
        let vals = r.f64s(header.laplacian_nnz)?;
        CsrMatrix::from_raw(v, v, ptr, idx, vals).map_err(|e| Error::format(path, e.to_string()))?
    };
    let spectrum = match header.spectrum_k {
        Some(k) => {
            let vals = r.f64s(k)?;
            let vecs = r.f64s(k * v)?;
            Some(SpectralData::from_parts(vals, vecs, v)?)
        }
        None => None,
    };
    r.finish()?;
    let cache = OperatorCache::from_parts(
        FrameSet::from_raw(frames),
        GradientOperator::from_matrix(grad),
        mass,
        laplacian,
        header.pin,
    )?;
    Ok(CacheFile {
        header,
        cache,
        spectrum,
    })
}
