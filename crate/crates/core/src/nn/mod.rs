//! The conditioning network and its optimizer.

mod adam;
mod mlp;

pub use adam::{Adam, AdamConfig};
pub use mlp::{group_norm, InitScheme, LayerOffsets, Mlp, MlpShape, Real, Tape, GROUP_NORM_EPSILON};
