//! Quaternion vision transformer: channel-token encoding, quaternion
//! multi-head self-attention, convolutional feed-forward sublayers, and the
//! classification head.

pub mod attention;
pub mod block;
pub mod config;
pub mod embed;
pub mod ffn;
pub mod model;

pub use attention::QMhsa;
pub use block::QVitBlock;
pub use config::QVitConfig;
pub use embed::{channel_patch_encode, PositionEmbedding};
pub use ffn::QcFfn;
pub use model::QVit;
