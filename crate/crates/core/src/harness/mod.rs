//! Data loading, training, evaluation, ablation and checkpoints.

pub mod checkpoint;
pub mod data;
pub mod eval;
pub mod train;

pub use checkpoint::RngState;
pub use data::{Resources, Split, Variant};
pub use eval::{EvalReport, KindAccuracy, QuestionError, VariantReport};
pub use train::{ablate, run_training, train, AblationRow, EpochRecord, TrainOutcome};
