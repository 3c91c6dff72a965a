//! The full quaternion vision transformer.

use rand::Rng;

use crate::autograd::{Param, Parameterized, Tape, Var};
use crate::error::{Error, Result};
use crate::qcore::{QTensor, Real};
use crate::qnn::{FcLayer, LayerNorm, QfcLayer};

use super::block::QVitBlock;
use super::config::QVitConfig;
use super::embed::{channel_patch_encode, PositionEmbedding};

/// Channel-token transformer over quaternion feature maps.
///
/// Pipeline: channel patch encoding with learned position embeddings, a
/// quaternion input projection to `embed_dim`, `blocks` transformer blocks,
/// a final LayerNorm, a quaternion MLP over the flattened sequence, and a
/// real fully-connected head producing `num_classes` logits.
pub struct QVit<T: Real> {
    pub cfg: QVitConfig,
    pub pe: PositionEmbedding<T>,
    pub input_proj: QfcLayer<T>,
    pub blocks: Vec<QVitBlock<T>>,
    pub final_norm: LayerNorm<T>,
    pub mlp: Vec<QfcLayer<T>>,
    pub head: FcLayer<T>,
}

impl<T: Real> QVit<T> {
    pub fn init(cfg: QVitConfig, rng: &mut impl Rng) -> Result<Self> {
        cfg.validate()?;
        let pe = PositionEmbedding::init("qvit.pe", cfg.tokens(), cfg.token_dim(), rng);
        let input_proj = QfcLayer::init("qvit.in", cfg.token_dim(), cfg.embed_dim, rng);
        let blocks = (0..cfg.blocks)
            .map(|i| QVitBlock::init(&format!("qvit.block{i}"), &cfg, rng))
            .collect::<Result<Vec<_>>>()?;
        let final_norm = LayerNorm::init("qvit.final_norm", vec![cfg.embed_dim, 4]);
        // flattened sequence width: every token's embedding as one quaternion row
        let s = cfg.tokens() * cfg.embed_dim;
        let mlp = (0..cfg.mlp_layers)
            .map(|i| QfcLayer::init(&format!("qvit.mlp{i}"), s, s, rng))
            .collect();
        let head = FcLayer::init("qvit.head", 4 * s, cfg.num_classes, rng);
        Ok(QVit { cfg, pe, input_proj, blocks, final_norm, mlp, head })
    }

    /// Logits for one `[h, w, c, 4]` feature map, shape `[num_classes]`.
    pub fn forward(&self, tape: &Tape<T>, x: &Var<T>) -> Result<Var<T>> {
        let seq = channel_patch_encode(tape, x, &self.pe)?;
        let mut cur = self.input_proj.forward(tape, &seq)?;
        for block in &self.blocks {
            cur = block.forward(tape, &cur)?;
        }
        cur = self.final_norm.forward(tape, &cur)?;

        let s = self.cfg.tokens() * self.cfg.embed_dim;
        // token-major, then channel, then component
        let mut flat = cur.reshape(vec![1, s, 4])?;
        for (i, layer) in self.mlp.iter().enumerate() {
            flat = layer.forward(tape, &flat)?;
            if i + 1 < self.mlp.len() {
                flat = flat.gelu();
            }
        }
        let real = flat.reshape(vec![1, 4 * s])?;
        self.head.forward(tape, &real)?.reshape(vec![self.cfg.num_classes])
    }

    /// Stacked logits for a batch of feature maps, shape `[batch, num_classes]`.
    pub fn forward_batch(&self, tape: &Tape<T>, batch: &[QTensor<T>]) -> Result<Var<T>> {
        if batch.is_empty() {
            return Err(Error::Contract("empty batch".into()));
        }
        let rows = batch
            .iter()
            .map(|x| {
                let input = tape.constant(x.clone());
                self.forward(tape, &input)?.reshape(vec![1, self.cfg.num_classes])
            })
            .collect::<Result<Vec<_>>>()?;
        Var::concat(&rows, 0)
    }
}

impl<T: Real> Parameterized<T> for QVit<T> {
    fn visit_params(&self, f: &mut dyn FnMut(&Param<T>)) {
        self.pe.visit_params(f);
        self.input_proj.visit_params(f);
        for b in &self.blocks {
            b.visit_params(f);
        }
        self.final_norm.visit_params(f);
        for m in &self.mlp {
            m.visit_params(f);
        }
        self.head.visit_params(f);
    }
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        self.pe.visit_params_mut(f);
        self.input_proj.visit_params_mut(f);
        for b in &mut self.blocks {
            b.visit_params_mut(f);
        }
        self.final_norm.visit_params_mut(f);
        for m in &mut self.mlp {
            m.visit_params_mut(f);
        }
        self.head.visit_params_mut(f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autograd::{grad_check_model, param::param_count};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny_cfg() -> QVitConfig {
        QVitConfig {
            h: 2,
            w: 2,
            c: 4,
            embed_dim: 8,
            heads: 2,
            blocks: 1,
            ffn_convs: 2,
            ffn_hidden: 8,
            mlp_layers: 2,
            num_classes: 3,
        }
    }

    #[test]
    fn default_config_produces_seven_logits() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let model = QVit::<f32>::init(QVitConfig::default(), &mut rng).unwrap();
        let tape = Tape::<f32>::new();
        let x = tape.constant(QTensor::from_fn(vec![7, 7, 64, 4], |i| {
            ((i * 31 % 97) as f32 - 48.0) * 0.02
        }));
        let logits = model.forward(&tape, &x).unwrap();
        assert_eq!(logits.shape(), vec![7]);
        assert!(logits.value().is_finite());
    }

    #[test]
    fn single_class_yields_single_logit() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = QVitConfig { num_classes: 1, ..tiny_cfg() };
        let model = QVit::<f64>::init(cfg, &mut rng).unwrap();
        let tape = Tape::<f64>::new();
        let x = tape.constant(QTensor::from_fn(vec![2, 2, 4, 4], |i| i as f64 * 0.01));
        let logits = model.forward(&tape, &x).unwrap();
        assert_eq!(logits.shape(), vec![1]);
    }

    #[test]
    fn same_seed_is_bitwise_deterministic() {
        let xv = QTensor::<f64>::from_fn(vec![2, 2, 4, 4], |i| ((i * 13 % 7) as f64 - 3.0) * 0.21);
        let mut runs = Vec::new();
        for _ in 0..2 {
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            let model = QVit::<f64>::init(tiny_cfg(), &mut rng).unwrap();
            let tape = Tape::<f64>::new();
            let logits = model.forward(&tape, &tape.constant(xv.clone())).unwrap();
            runs.push(logits.value());
        }
        assert_eq!(runs[0].data(), runs[1].data());
    }

    #[test]
    fn batch_rows_equal_single_forwards() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let model = QVit::<f64>::init(tiny_cfg(), &mut rng).unwrap();
        let a = QTensor::from_fn(vec![2, 2, 4, 4], |i| (i as f64) * 0.02 - 0.3);
        let b = QTensor::from_fn(vec![2, 2, 4, 4], |i| ((i * 5 % 11) as f64) * 0.05);

        let tape = Tape::<f64>::new();
        let batch = model.forward_batch(&tape, &[a.clone(), b.clone()]).unwrap();
        assert_eq!(batch.shape(), vec![2, 3]);

        let ra = model.forward(&tape, &tape.constant(a)).unwrap().value();
        let rb = model.forward(&tape, &tape.constant(b)).unwrap().value();
        let bv = batch.value();
        for k in 0..3 {
            assert_eq!(bv.get(&[0, k]), ra.get(&[k]));
            assert_eq!(bv.get(&[1, k]), rb.get(&[k]));
        }
    }

    #[test]
    fn parameter_count_matches_closed_form() {
        let cfg = tiny_cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let model = QVit::<f64>::init(cfg.clone(), &mut rng).unwrap();

        let (e, d, heads, hidden) = (cfg.embed_dim, cfg.head_dim(), cfg.heads, cfg.ffn_hidden);
        let s = cfg.tokens() * cfg.embed_dim;
        let pe = cfg.tokens() * cfg.token_dim() * 4;
        let in_proj = 4 * cfg.token_dim() * e + 4 * e;
        let qkv = 3 * heads * (4 * e * d + 4 * d);
        let o = 4 * e * e + 4 * e;
        let norm = 2 * e * 4;
        let ffn = (4 * e * hidden + 4 * hidden) + (4 * hidden * e + 4 * e) + 2 * hidden * 4;
        let block = qkv + o + norm + ffn;
        let mlp = cfg.mlp_layers * (4 * s * s + 4 * s);
        let head = 4 * s * cfg.num_classes + cfg.num_classes;
        let want = pe + in_proj + cfg.blocks * block + norm + mlp + head;
        assert_eq!(param_count(&model), want as u64);
    }

    #[test]
    fn tiny_model_end_to_end_gradient_certifies() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let model = QVit::<f64>::init(tiny_cfg(), &mut rng).unwrap();
        let xv = QTensor::from_fn(vec![2, 2, 4, 4], |i| ((i * 19 % 23) as f64 - 11.0) * 0.04);

        // step 1e-3: key biases have an exactly-zero gradient (softmax rows
        // are shift-invariant), so a smaller step leaves pure cancellation
        // noise above the relative-error floor
        let report = grad_check_model(
            &model,
            |tape| {
                let x = tape.constant(xv.clone());
                let logits = model.forward(tape, &x)?.reshape(vec![1, 3])?;
                logits.cross_entropy(&[1])
            },
            1e-3,
            1e-3,
        )
        .unwrap();
        assert!(report.all_pass(), "{report}");
    }
}
