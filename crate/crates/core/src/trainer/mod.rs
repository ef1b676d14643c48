//! Optimization loop, optimizer, embedding initialisation and checkpoints.

mod checkpoint;
mod embed;
mod optim;
mod train;

pub use checkpoint::{checkpoint_precision, Checkpoint, FORMAT_HEADER, FORMAT_VERSION};
pub use embed::embed_init;
pub use optim::{clip_global_norm, Adam};
pub use train::{
    corpus_ce, train, EpochRecord, StepRecord, StopReason, TrainOptions, TrainOutcome, BEST_CHECKPOINT,
    LAST_CHECKPOINT, METRICS_FILE,
};
