//! Model checkpoints: a JSON header followed by the 32-bit parameter blob.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::container::{decode_framed, read_bytes, sha256_hex, write_framed, PayloadReader, PayloadWriter};
use crate::error::{Error, Result};
use crate::features::WksConfig;
use crate::fields::MapMode;
use crate::nn::{Mlp, MlpShape};

use super::model::{Model, ModelKind};

pub const CHECKPOINT_FORMAT: &str = "jfckpt-1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CheckpointHeader {
    pub format: String,
    pub kind: ModelKind,
    pub shape: MlpShape,
    /// `[in, out]` of each linear layer, in parameter order.
    pub layers: Vec<[usize; 2]>,
    pub groups: usize,
    pub code_dim: usize,
    pub feature_width: usize,
    pub features: WksConfig,
    pub mode: MapMode,
    pub seed: u64,
    pub triangles: Option<usize>,
    pub num_params: usize,
    pub training: serde_json::Value,
    pub payload_sha256: String,
}

pub fn save_checkpoint(path: impl AsRef<Path>, model: &Model<f32>, seed: u64, training: serde_json::Value) -> Result<()> {
    let shape = *model.net.shape();
    let mut w = PayloadWriter::default();
    w.f32s(model.net.params());
    let payload = w.bytes;
    let header = CheckpointHeader {
        format: CHECKPOINT_FORMAT.into(),
        kind: model.kind,
        shape,
        layers: (0..shape.layers).map(|l| {
            let (i, o) = shape.layer_dims(l);
            [i, o]
        }).collect(),
        groups: shape.groups,
        code_dim: model.code_dim,
        feature_width: shape.input - model.code_dim,
        features: model.features,
        mode: model.mode,
        seed,
        triangles: model.triangles,
        num_params: model.net.num_params(),
        training,
        payload_sha256: sha256_hex(&payload),
    };
    write_framed(path, &header, &payload)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(Model<f32>, CheckpointHeader)> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    let (header, payload): (CheckpointHeader, _) = decode_framed(path, &bytes)?;
    if header.format != CHECKPOINT_FORMAT {
        return Err(Error::format(path, format!("expected format {CHECKPOINT_FORMAT}, found {}", header.format)));
    }
    if sha256_hex(payload) != header.payload_sha256 {
        return Err(Error::format(path, "parameter checksum mismatch"));
    }
    if header.shape.num_params() != header.num_params {
        return Err(Error::format(path, "parameter count disagrees with layer shapes"));
    }
    let mut r = PayloadReader::new(path, payload);
    let params = r.f32s(header.num_params)?;
    r.finish()?;
    let net = Mlp::from_params(header.shape, params)?;
    let model = Model::from_net(header.kind, net, header.code_dim, header.mode, header.features, header.triangles)?;
    Ok((model, header))
}
