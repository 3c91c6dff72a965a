//! Desk-scale trainable stand-in for a pretrained feature extractor.

use rand::Rng;

use crate::autograd::{Param, Parameterized, Tape, Var};
use crate::error::{Error, Result};
use crate::qcore::Real;
use crate::qnn::ConvLayer;

/// Small real CNN: one stride-1 stem and three stride-2 stages, all 3x3 with
/// padding 1, GELU after each. Spatial extents divide by 8 overall, taking a
/// 56x56 input to the 7x7 grid the decomposition head expects.
pub struct ToyBackbone<T: Real> {
    convs: Vec<ConvLayer<T>>,
    in_channels: usize,
    out_channels: usize,
}

impl<T: Real> ToyBackbone<T> {
    /// `widths` are the channel counts after the stem and each stage.
    pub fn init(name: &str, in_channels: usize, widths: &[usize; 4], rng: &mut impl Rng) -> Self {
        let mut convs = Vec::with_capacity(4);
        let mut c_prev = in_channels;
        for (i, &c_next) in widths.iter().enumerate() {
            let stride = if i == 0 { 1 } else { 2 };
            convs.push(ConvLayer::init(&format!("{name}.conv{i}"), 3, 3, c_prev, c_next, stride, 1, rng));
            c_prev = c_next;
        }
        ToyBackbone { convs, in_channels, out_channels: c_prev }
    }

    pub fn channels(&self) -> (usize, usize) {
        (self.in_channels, self.out_channels)
    }

    pub fn forward(&self, tape: &Tape<T>, x: &Var<T>) -> Result<Var<T>> {
        let xs = x.shape();
        if xs.len() != 3 || xs[2] != self.in_channels {
            return Err(Error::shape(
                "backbone_forward",
                format!("input {:?} vs {} channels", xs, self.in_channels),
            ));
        }
        let mut cur = x.clone();
        for conv in &self.convs {
            cur = conv.forward(tape, &cur)?.gelu();
        }
        Ok(cur)
    }
}

impl<T: Real> Parameterized<T> for ToyBackbone<T> {
    fn visit_params(&self, f: &mut dyn FnMut(&Param<T>)) {
        for c in &self.convs {
            c.visit_params(f);
        }
    }
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        for c in &mut self.convs {
            c.visit_params_mut(f);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::QTensor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn maps_56_input_to_7_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let bb = ToyBackbone::<f32>::init("bb", 1, &[4, 6, 8, 8], &mut rng);
        let tape = Tape::<f32>::new();
        let x = tape.constant(QTensor::from_fn(vec![56, 56, 1], |i| (i % 17) as f32 * 0.05));
        let y = bb.forward(&tape, &x).unwrap();
        assert_eq!(y.shape(), vec![7, 7, 8]);
    }

    #[test]
    fn spatial_halving_per_stage() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let bb = ToyBackbone::<f32>::init("bb", 2, &[3, 3, 3, 5], &mut rng);
        let tape = Tape::<f32>::new();
        let x = tape.constant(QTensor::zeros(vec![16, 16, 2]));
        let y = bb.forward(&tape, &x).unwrap();
        assert_eq!(y.shape(), vec![2, 2, 5]);
    }

    #[test]
    fn deterministic_given_seed() {
        let xv = QTensor::<f64>::from_fn(vec![8, 8, 1], |i| ((i * 7 % 19) as f64 - 9.0) * 0.1);
        let mut outs = Vec::new();
        for _ in 0..2 {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let bb = ToyBackbone::<f64>::init("bb", 1, &[2, 2, 2, 3], &mut rng);
            let tape = Tape::<f64>::new();
            outs.push(bb.forward(&tape, &tape.constant(xv.clone())).unwrap().value());
        }
        assert_eq!(outs[0].data(), outs[1].data());
    }
}
