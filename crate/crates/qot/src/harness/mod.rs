//! Training, evaluation, accounting, and file formats around the model
//! stack: everything a run needs besides the math.

pub mod certify;
pub mod config;
pub mod count;
pub mod eval;
pub mod io;
pub mod manifest;
pub mod optim;
pub mod synth;
pub mod train;

pub use certify::{certification_cases, composite_cases};
pub use config::RunConfig;
pub use count::{human, qvit_cost, real_vit_params, CostLine, CostReport, CONVENTION};
pub use eval::{evaluate, evaluate_checkpoint, predict_all, tally, EvalReport};
pub use io::{
    read_tensor, read_tensor_any, write_tensor, AnyTensor, Checkpoint, CHECKPOINT_SCHEMA,
};
pub use manifest::{Manifest, ManifestEntry};
pub use optim::{Adam, Optimizer, Sgd};
pub use synth::{generate, nearest_centroid_accuracy, SynthOutput, SynthSpec};
pub use train::{
    load_dataset, load_pipeline, save_pipeline, train, MetricLine, Pipeline, Stage, TrainResult,
    DEFAULT_STAGES,
};
