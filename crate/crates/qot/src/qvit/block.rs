//! One transformer block: attention and feed-forward sublayers.

use rand::Rng;

use crate::autograd::{Param, Parameterized, Tape, Var};
use crate::error::Result;
use crate::qcore::Real;
use crate::qnn::LayerNorm;

use super::attention::QMhsa;
use super::config::QVitConfig;
use super::ffn::QcFfn;

/// Post-norm block: `y = x + attn(x); z = norm(y); out = z + ffn(z)`.
pub struct QVitBlock<T: Real> {
    pub attn: QMhsa<T>,
    pub norm: LayerNorm<T>,
    pub ffn: QcFfn<T>,
}

impl<T: Real> QVitBlock<T> {
    pub fn init(name: &str, cfg: &QVitConfig, rng: &mut impl Rng) -> Result<Self> {
        Ok(QVitBlock {
            attn: QMhsa::init(&format!("{name}.attn"), cfg.embed_dim, cfg.heads, rng)?,
            norm: LayerNorm::init(&format!("{name}.norm"), vec![cfg.embed_dim, 4]),
            ffn: QcFfn::init(&format!("{name}.ffn"), cfg.embed_dim, cfg.ffn_hidden, cfg.ffn_convs, rng)?,
        })
    }

    pub fn forward(&self, tape: &Tape<T>, x: &Var<T>) -> Result<Var<T>> {
        let y = x.add(&self.attn.forward(tape, x)?)?;
        let z = self.norm.forward(tape, &y)?;
        z.add(&self.ffn.forward(tape, &z)?)
    }
}

impl<T: Real> Parameterized<T> for QVitBlock<T> {
    fn visit_params(&self, f: &mut dyn FnMut(&Param<T>)) {
        self.attn.visit_params(f);
        self.norm.visit_params(f);
        self.ffn.visit_params(f);
    }
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        self.attn.visit_params_mut(f);
        self.norm.visit_params_mut(f);
        self.ffn.visit_params_mut(f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::QTensor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny_cfg() -> QVitConfig {
        QVitConfig {
            h: 2,
            w: 2,
            c: 2,
            embed_dim: 4,
            heads: 2,
            blocks: 1,
            ffn_convs: 2,
            ffn_hidden: 6,
            mlp_layers: 2,
            num_classes: 3,
        }
    }

    #[test]
    fn zero_sublayers_reduce_block_to_layer_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cfg = tiny_cfg();
        let mut block = QVitBlock::<f64>::init("b", &cfg, &mut rng).unwrap();
        // zero every attention and ffn weight; keep the norm gain
        block.visit_params_mut(&mut |p| {
            if p.name.starts_with("b.attn") || p.name.starts_with("b.ffn") {
                p.value = QTensor::zeros(p.value.shape().to_vec());
            }
        });

        let tape = Tape::<f64>::new();
        let x = tape.constant(QTensor::from_fn(vec![2, 4, 4], |i| (i as f64) * 0.3 - 2.0));
        let got = block.forward(&tape, &x).unwrap();
        assert_eq!(got.shape(), vec![2, 4, 4]);
        let want = block.norm.forward(&tape, &x).unwrap().value();
        assert!(got.value().max_abs_diff(&want) < 1e-15);
    }

    #[test]
    fn matches_hand_composed_sublayers() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = QVitConfig { embed_dim: 4, heads: 2, ..tiny_cfg() };
        let block = QVitBlock::<f64>::init("b", &cfg, &mut rng).unwrap();

        let xv = QTensor::from_fn(vec![2, 4, 4], |i| ((i * 7 % 13) as f64 - 6.0) * 0.17);
        let tape = Tape::<f64>::new();
        let x = tape.constant(xv);
        let got = block.forward(&tape, &x).unwrap().value();

        let y = x.add(&block.attn.forward(&tape, &x).unwrap()).unwrap();
        let z = block.norm.forward(&tape, &y).unwrap();
        let want = z.add(&block.ffn.forward(&tape, &z).unwrap()).unwrap().value();
        assert!(got.max_abs_diff(&want) < 1e-15);
    }

    #[test]
    fn stacked_blocks_preserve_sequence_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cfg = tiny_cfg();
        let blocks: Vec<QVitBlock<f64>> = (0..3)
            .map(|i| QVitBlock::init(&format!("b{i}"), &cfg, &mut rng).unwrap())
            .collect();

        let tape = Tape::<f64>::new();
        let mut cur = tape.constant(QTensor::from_fn(vec![2, 4, 4], |i| i as f64 * 0.01));
        for b in &blocks {
            cur = b.forward(&tape, &cur).unwrap();
            assert_eq!(cur.shape(), vec![2, 4, 4]);
        }
    }
}
