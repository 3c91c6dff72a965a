//! Channel-axis patch encoding and learned quaternion position embeddings.

use rand::Rng;

use crate::autograd::{Param, Parameterized, Tape, Var};
use crate::error::{Error, Result};
use crate::qcore::{QTensor, Real};
use crate::qnn::init;

/// Learned quaternion position embedding, one entry per token position and
/// raw token coordinate: `[c, h*w, 4]`.
pub struct PositionEmbedding<T: Real> {
    pub p: Param<T>,
    c: usize,
    hw: usize,
}

impl<T: Real> PositionEmbedding<T> {
    pub fn init(name: &str, c: usize, hw: usize, rng: &mut impl Rng) -> Self {
        PositionEmbedding {
            p: Param::new(format!("{name}.p"), init::normal(rng, 0.02, vec![c, hw, 4])),
            c,
            hw,
        }
    }

    /// All-zero embedding. Makes the encoder a pure rearrangement; test fixture.
    pub fn zeros(name: &str, c: usize, hw: usize) -> Self {
        PositionEmbedding {
            p: Param::new(format!("{name}.p"), QTensor::zeros(vec![c, hw, 4])),
            c,
            hw,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.c, self.hw)
    }
}

impl<T: Real> Parameterized<T> for PositionEmbedding<T> {
    fn visit_params(&self, f: &mut dyn FnMut(&Param<T>)) {
        f(&self.p);
    }
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        f(&mut self.p);
    }
}

/// Splits an `[h, w, c, 4]` quaternion feature map into `c` tokens, one per
/// channel, each the flattened `h*w` quaternion values of that channel, then
/// adds the position embedding. Output is `[c, h*w, 4]`.
pub fn channel_patch_encode<T: Real>(
    tape: &Tape<T>,
    x: &Var<T>,
    pe: &PositionEmbedding<T>,
) -> Result<Var<T>> {
    let xs = x.shape();
    let (c, hw) = pe.dims();
    if xs.len() != 4 || xs[3] != 4 || xs[2] != c || xs[0] * xs[1] != hw {
        return Err(Error::shape(
            "channel_patch_encode",
            format!("input {:?} vs embedding [{c}, {hw}, 4]", xs),
        ));
    }
    x.permute(&[2, 0, 1, 3])?
        .reshape(vec![c, hw, 4])?
        .add(&pe.p.var(tape))
}
