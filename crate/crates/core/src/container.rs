//! Framed binary files: a little-endian `u32` header length, a JSON header,
//! then a raw little-endian payload.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub fn encode_framed(header: &impl Serialize, payload: &[u8]) -> Result<Vec<u8>> {
    let json = serde_json::to_vec(header).map_err(|e| Error::Invalid(format!("header serialization: {e}")))?;
    let len = u32::try_from(json.len()).map_err(|_| Error::Invalid("header too large".into()))?;
    let mut out = Vec::with_capacity(4 + json.len() + payload.len());
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(payload);
    Ok(out)
}

/// Splits a framed buffer into its parsed header and payload bytes.
pub fn decode_framed<'a, H: DeserializeOwned>(path: &Path, bytes: &'a [u8]) -> Result<(H, &'a [u8])> {
    if bytes.len() < 4 {
        return Err(Error::format(path, "file shorter than its length prefix"));
    }
    let len = u32::from_le_bytes(bytes[..4].try_into().unwrap()) as usize;
    let body = &bytes[4..];
    if body.len() < len {
        return Err(Error::format(path, "truncated header"));
    }
    let header = serde_json::from_slice(&body[..len]).map_err(|e| Error::format(path, format!("bad header: {e}")))?;
    Ok((header, &body[len..]))
}

pub fn write_framed(path: impl AsRef<Path>, header: &impl Serialize, payload: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_framed(header, payload)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_bytes(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let path = path.as_ref();
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Appends little-endian sections to a payload buffer.
#[derive(Debug, Default)]
pub struct PayloadWriter {
    pub bytes: Vec<u8>,
}

impl PayloadWriter {
    pub fn f64s(&mut self, xs: &[f64]) -> &mut Self {
        for x in xs {
            self.bytes.extend_from_slice(&x.to_le_bytes());
        }
        self
    }

    pub fn f32s(&mut self, xs: &[f32]) -> &mut Self {
        for x in xs {
            self.bytes.extend_from_slice(&x.to_le_bytes());
        }
        self
    }

    pub fn u64s(&mut self, xs: &[usize]) -> &mut Self {
        for &x in xs {
            self.bytes.extend_from_slice(&(x as u64).to_le_bytes());
        }
        self
    }
}

/// Reads little-endian sections sequentially, failing on truncation.
#[derive(Debug)]
pub struct PayloadReader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
}

impl<'a> PayloadReader<'a> {
    pub fn new(path: &'a Path, bytes: &'a [u8]) -> Self {
        Self { path, bytes }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() < n {
            return Err(Error::format(self.path, "payload truncated"));
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }

    pub fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        Ok(self
            .take(8 * n)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        Ok(self
            .take(4 * n)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub fn u64s(&mut self, n: usize) -> Result<Vec<usize>> {
        self.take(8 * n)?
            .chunks_exact(8)
            .map(|c| {
                usize::try_from(u64::from_le_bytes(c.try_into().unwrap()))
                    .map_err(|_| Error::format(self.path, "index does not fit in usize"))
            })
            .collect()
    }

    pub fn finish(self) -> Result<()> {
        if self.bytes.is_empty() {
            Ok(())
        } else {
            Err(Error::format(self.path, format!("{} trailing payload bytes", self.bytes.len())))
        }
    }
}
