//! Quaternion convolutional feed-forward sublayer.

use rand::Rng;

use crate::autograd::{Param, Parameterized, Tape, Var};
use crate::error::{Error, Result};
use crate::qcore::Real;
use crate::qnn::{LayerNorm, QConvLayer};

/// Pointwise quaternion convolution stack over a token sequence: the sequence
/// is viewed as a `[t, 1, e, 4]` map, pushed through `convs` 1x1 quaternion
/// convolutions with LayerNorm + GELU between consecutive ones. Widths run
/// `e -> hidden -> ... -> hidden -> e`.
pub struct QcFfn<T: Real> {
    convs: Vec<QConvLayer<T>>,
    norms: Vec<LayerNorm<T>>,
    embed_dim: usize,
}

impl<T: Real> QcFfn<T> {
    pub fn init(
        name: &str,
        embed_dim: usize,
        hidden: usize,
        conv_count: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if conv_count == 0 {
            return Err(Error::Config("feed-forward needs at least one convolution".into()));
        }
        let mut convs = Vec::with_capacity(conv_count);
        let mut norms = Vec::with_capacity(conv_count.saturating_sub(1));
        for m in 0..conv_count {
            let c_in = if m == 0 { embed_dim } else { hidden };
            let c_out = if m == conv_count - 1 { embed_dim } else { hidden };
            convs.push(QConvLayer::init(&format!("{name}.conv{m}"), 1, 1, c_in, c_out, 1, 0, rng));
            if m + 1 < conv_count {
                norms.push(LayerNorm::init(&format!("{name}.norm{m}"), vec![c_out, 4]));
            }
        }
        Ok(QcFfn { convs, norms, embed_dim })
    }

    pub fn conv_count(&self) -> usize {
        self.convs.len()
    }

    pub fn forward(&self, tape: &Tape<T>, x: &Var<T>) -> Result<Var<T>> {
        let xs = x.shape();
        if xs.len() != 3 || xs[2] != 4 || xs[1] != self.embed_dim {
            return Err(Error::shape(
                "qcffn_forward",
                format!("input {:?} vs embed_dim {}", xs, self.embed_dim),
            ));
        }
        let t = xs[0];
        let mut cur = x.reshape(vec![t, 1, self.embed_dim, 4])?;
        for (m, conv) in self.convs.iter().enumerate() {
            cur = conv.forward(tape, &cur)?;
            if m + 1 < self.convs.len() {
                cur = self.norms[m].forward(tape, &cur)?.gelu();
            }
        }
        cur.reshape(vec![t, self.embed_dim, 4])
    }
}

impl<T: Real> Parameterized<T> for QcFfn<T> {
    fn visit_params(&self, f: &mut dyn FnMut(&Param<T>)) {
        for (m, conv) in self.convs.iter().enumerate() {
            conv.visit_params(f);
            if m < self.norms.len() {
                self.norms[m].visit_params(f);
            }
        }
    }
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        let norm_count = self.norms.len();
        for (m, conv) in self.convs.iter_mut().enumerate() {
            conv.visit_params_mut(f);
            if m < norm_count {
                self.norms[m].visit_params_mut(f);
            }
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
    fn identity_convs_reduce_to_gelu_on_normalized_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut ffn = QcFfn::<f64>::init("ffn", 2, 2, 2, &mut rng).unwrap();
        ffn.convs[0] = QConvLayer::identity("ffn.conv0", 2);
        ffn.convs[1] = QConvLayer::identity("ffn.conv1", 2);

        // each token holds the values {-1, +1} split evenly: zero mean, unit
        // variance, so the inner LayerNorm is identity up to its epsilon
        let xv = QTensor::from_fn(vec![3, 2, 4], |i| if i % 2 == 0 { -1.0 } else { 1.0 });
        let tape = Tape::<f64>::new();
        let x = tape.constant(xv);
        let got = ffn.forward(&tape, &x).unwrap();
        let want = x.gelu().value();
        assert!(got.value().max_abs_diff(&want) < 1e-4);
    }

    #[test]
    fn zero_final_conv_yields_zeros() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut ffn = QcFfn::<f64>::init("ffn", 3, 5, 2, &mut rng).unwrap();
        ffn.convs[1].kernel.value = QTensor::zeros(vec![1, 1, 5, 3, 4]);
        ffn.convs[1].b.value = QTensor::zeros(vec![3, 4]);

        let tape = Tape::<f64>::new();
        let x = tape.constant(QTensor::from_fn(vec![4, 3, 4], |i| (i as f64) * 0.1 - 1.0));
        let got = ffn.forward(&tape, &x).unwrap().value();
        assert_eq!(got.shape(), &[4, 3, 4]);
        assert!(got.data().iter().all(|&v| v.abs() < 1e-15));
    }

    #[test]
    fn matches_stage_by_stage_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ffn = QcFfn::<f64>::init("ffn", 3, 6, 2, &mut rng).unwrap();
        let xv = QTensor::from_fn(vec![5, 3, 4], |i| ((i * 17 % 23) as f64 - 11.0) * 0.09);

        let tape = Tape::<f64>::new();
        let got = ffn.forward(&tape, &tape.constant(xv.clone())).unwrap().value();

        let x = tape.constant(xv).reshape(vec![5, 1, 3, 4]).unwrap();
        let s1 = ffn.convs[0].forward(&tape, &x).unwrap();
        let s2 = ffn.norms[0].forward(&tape, &s1).unwrap();
        let s3 = s2.gelu();
        let s4 = ffn.convs[1].forward(&tape, &s3).unwrap();
        let want = s4.reshape(vec![5, 3, 4]).unwrap().value();
        assert!(got.max_abs_diff(&want) < 1e-10);
    }

    #[test]
    fn three_conv_stack_keeps_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ffn = QcFfn::<f64>::init("ffn", 4, 7, 3, &mut rng).unwrap();
        assert_eq!(ffn.conv_count(), 3);
        let tape = Tape::<f64>::new();
        let x = tape.constant(QTensor::from_fn(vec![2, 4, 4], |i| i as f64 * 0.05));
        let y = ffn.forward(&tape, &x).unwrap();
        assert_eq!(y.shape(), vec![2, 4, 4]);
    }
}
