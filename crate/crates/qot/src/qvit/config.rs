//! Model hyperparameters for the quaternion vision transformer.

use crate::error::{Error, Result};

/// Hyperparameters for [`super::QVit`].
///
/// The encoder treats each of the `c` channels of an `h x w x c` quaternion
/// feature map as one token, so the sequence length is `c` and the raw token
/// width is `h * w` before the input projection lifts it to `embed_dim`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QVitConfig {
    pub h: usize,
    pub w: usize,
    pub c: usize,
    /// Per-token quaternion width after the input projection.
    pub embed_dim: usize,
    pub heads: usize,
    /// Transformer block count.
    pub blocks: usize,
    /// Quaternion convolution count inside each feed-forward sublayer.
    pub ffn_convs: usize,
    /// Inner quaternion width of the feed-forward sublayer.
    pub ffn_hidden: usize,
    /// Quaternion MLP depth between the encoder and the real head.
    pub mlp_layers: usize,
    pub num_classes: usize,
}

impl Default for QVitConfig {
    fn default() -> Self {
        QVitConfig {
            h: 7,
            w: 7,
            c: 64,
            embed_dim: 64,
            heads: 8,
            blocks: 4,
            ffn_convs: 2,
            ffn_hidden: 128,
            mlp_layers: 2,
            num_classes: 7,
        }
    }
}

impl QVitConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("h", self.h),
            ("w", self.w),
            ("c", self.c),
            ("embed_dim", self.embed_dim),
            ("heads", self.heads),
            ("blocks", self.blocks),
            ("ffn_convs", self.ffn_convs),
            ("ffn_hidden", self.ffn_hidden),
            ("mlp_layers", self.mlp_layers),
            ("num_classes", self.num_classes),
        ];
        for (key, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{key} must be at least 1")));
            }
        }
        if !self.embed_dim.is_multiple_of(self.heads) {
            return Err(Error::Config(format!(
                "embed_dim {} not divisible by heads {}",
                self.embed_dim, self.heads
            )));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.embed_dim / self.heads
    }

    /// Sequence length: one token per channel.
    pub fn tokens(&self) -> usize {
        self.c
    }

    /// Quaternion width of a raw token before the input projection.
    pub fn token_dim(&self) -> usize {
        self.h * self.w
    }
}
