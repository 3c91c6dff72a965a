//! Layer normalization with learned elementwise affine.

use crate::autograd::{Param, Parameterized, Tape, Var};
use crate::error::{Error, Result};
use crate::qcore::{QTensor, Real};

/// Normalizes each leading index over the trailing `norm_shape` axes
/// jointly. For a quaternion sequence `[T, E, 4]` with `norm_shape [E, 4]`,
/// each token's 4E reals are standardized together, preserving relative
/// inter-component scale.
pub struct LayerNorm<T: Real> {
    pub gamma: Param<T>,
    pub beta: Param<T>,
    norm_shape: Vec<usize>,
}

impl<T: Real> LayerNorm<T> {
    pub fn init(name: &str, norm_shape: Vec<usize>) -> Self {
        LayerNorm {
            gamma: Param::new(format!("{name}.gamma"), QTensor::full(norm_shape.clone(), T::one())),
            beta: Param::new(format!("{name}.beta"), QTensor::zeros(norm_shape.clone())),
            norm_shape,
        }
    }

    pub fn norm_shape(&self) -> &[usize] {
        &self.norm_shape
    }

    pub fn forward(&self, tape: &Tape<T>, x: &Var<T>) -> Result<Var<T>> {
        let xs = x.shape();
        let k = self.norm_shape.len();
        if xs.len() < k || xs[xs.len() - k..] != self.norm_shape[..] {
            return Err(Error::shape(
                "layer_norm",
                format!("input {:?} does not end in {:?}", xs, self.norm_shape),
            ));
        }
        x.layer_norm(&self.gamma.var(tape), &self.beta.var(tape), k)
    }
}

impl<T: Real> Parameterized<T> for LayerNorm<T> {
    fn visit_params(&self, f: &mut dyn FnMut(&Param<T>)) {
        f(&self.gamma);
        f(&self.beta);
    }
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        f(&mut self.gamma);
        f(&mut self.beta);
    }
}
