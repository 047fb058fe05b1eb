//! Prediction, training, inference, and evaluation.

pub mod checkpoint;
pub mod eval;
pub mod infer;
pub mod loss;
pub mod model;
pub mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointHeader, CHECKPOINT_FORMAT};
pub use eval::{evaluate, map_metrics, EvalMetrics, MapMetrics, SampleMetrics};
pub use infer::{infer, prepare_mesh};
pub use loss::{loss, loss_with_grad, LossBreakdown, LossGrad, VERTEX_LOSS_WEIGHT};
pub use model::{Architecture, BatchItem, Model, ModelKind, Prediction, Prepared};
pub use train::{
    batch_gradient, batch_items, init_model, prepare_all, to_json_lines, train, train_from, EpochRecord, PlateauConfig,
    TimingRecord, TrainConfig, TrainOutcome,
};
