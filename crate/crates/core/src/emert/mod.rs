//! The EMERT model: multimodal feature extraction, modality-adversarial
//! feature decoupling, emotion-sensitive multi-task transformer fusion,
//! dual prediction heads, and the combined training objective.

pub mod batch;
pub mod config;
pub mod model;
pub mod train;

pub use batch::{head_targets, BatchInput, HeadTargets};
pub use config::{ModalityMask, ModelConfig, TaskMode};
pub use model::{
    multi_head_attention, total_loss, AdvTargetMode, EmertModel, FeatureSet, ForwardPass,
    LossVars,
};
pub use train::{argmax_rows, clamp_regression, probe_accuracy, quick_eval, train, EpochLog, TrainLog, TrainSettings};
