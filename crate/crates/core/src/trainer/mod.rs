//! End-to-end training: configuration, optimizers, the training loop with
//! scheduled rewiring, evaluation, ε sweeps and checkpoints.

mod checkpoint;
mod config;
mod model;
mod optim;
mod run;

pub use checkpoint::{Checkpoint, RngState};
pub use config::{
    parse_densities, DatasetKind, LayerDensity, LrSchedule, ModelPreset, RateEncoding,
    TrainingConfig,
};
pub use model::{
    default_init_scale, initial_masks, layer_densities, layer_shapes, EncodedBatch, Encoder,
    InputGeometry, Model,
};
pub use optim::{Optimizer, OptimizerKind};
pub use run::{
    evaluate, load_data, predict_indices, resolve_data_dir, split_indices, sweep_epsilon,
    synthetic_splits, train, train_with, DataSplits, EvalReport, EvalSplit, SweepRow, TrainOutcome,
    DATA_DIR_ENV, EVENT_FILES, SWEEP_HEADER,
};
