//! Orthogonal feature decomposition and the quaternion representation
//! builder feeding the transformer.

pub mod backbone;
pub mod head;
pub mod pipeline;
pub mod quat_build;

pub use backbone::ToyBackbone;
pub use head::{decompose, Decomposition, OrthoHead};
pub use pipeline::{
    extract_pipeline, features_to_quaternion, finetune_loss, finetune_loss_on_features,
    FinetuneLoss,
};
pub use quat_build::build_quaternion;
