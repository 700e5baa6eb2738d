//! Transformer token tagger: model, training, checkpoints and prediction.

pub mod checkpoint;
pub mod config;
pub mod data;
pub mod math;
pub mod model;
pub mod predict;
pub mod train;

pub use checkpoint::{parameter_checksum, Checkpoint};
pub use config::{LrSchedule, TaggerConfig, TrainConfig};
pub use data::{collate, encode_dataset, Batch, EncodedExample, Vocab, PAD_ID, UNK_ID};
pub use math::Real;
pub use model::{argmax_labels, EncoderLayer, LayerNormParams, TaggerModel, Tensor, NUM_LABELS};
pub use predict::{predict, predict_ids, predict_logits};
pub use train::{train, train_until, EpochReport, TrainOutcome};
