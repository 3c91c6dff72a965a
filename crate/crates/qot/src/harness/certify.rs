//! Certification registry for the gradcheck command: every core op case
//! plus composite checks through real layer stacks.
//!
//! Composite steps: attention stacks get 1e-3 because key biases have an
//! exactly-zero true gradient (softmax rows are shift-invariant), and at
//! smaller steps pure cancellation noise dominates the relative-error
//! floor. Everything else keeps the op-level 1e-5 step.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autograd::certify::{core_op_cases, Case};
use crate::autograd::{grad_check, grad_check_model};
use crate::ortho::{finetune_loss_on_features, OrthoHead};
use crate::qcore::QTensor;
use crate::qnn::{orthogonal_loss, LossWeights, QfcLayer};
use crate::qvit::{QVitBlock, QVitConfig};

fn rng(tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0x51ce_55ed ^ tag)
}

fn randt(rng: &mut ChaCha8Rng, shape: Vec<usize>) -> QTensor<f64> {
    use rand::Rng as _;
    QTensor::from_fn(shape, |_| rng.random::<f64>() * 2.0 - 1.0)
}

pub fn composite_cases() -> Vec<Case> {
    vec![
        Case {
            name: "qfc_layer",
            run: Box::new(|| {
                let mut r = rng(1);
                let layer: QfcLayer<f64> = QfcLayer::init("certify.qfc", 2, 3, &mut r);
                let x = randt(&mut r, vec![3, 2, 4]);
                let w = randt(&mut r, vec![3, 3, 4]);
                grad_check_model(
                    &layer,
                    |tape| {
                        let y = layer.forward(tape, &tape.constant(x.clone()))?;
                        y.mul(&tape.constant(w.clone()))?.sum().mul(&y.sum())
                    },
                    1e-5,
                    1e-4,
                )
            }),
        },
        Case {
            name: "orthogonal_loss",
            run: Box::new(|| {
                let mut r = rng(2);
                let names: Vec<String> =
                    ["v1", "v2", "v3"].iter().map(|s| s.to_string()).collect();
                let init =
                    vec![randt(&mut r, vec![5]), randt(&mut r, vec![5]), randt(&mut r, vec![5])];
                grad_check(
                    &names,
                    &init,
                    |_, v| orthogonal_loss(&v[0], &v[1], &v[2]),
                    1e-5,
                    1e-4,
                )
            }),
        },
        Case {
            name: "decompose_finetune",
            run: Box::new(|| {
                let mut r = rng(3);
                let head: OrthoHead<f64> = OrthoHead::init("certify.ortho", 4, 3, 2, &mut r);
                let feats = vec![randt(&mut r, vec![3, 3, 4]), randt(&mut r, vec![3, 3, 4])];
                grad_check_model(
                    &head,
                    |tape| {
                        let fl = finetune_loss_on_features(
                            tape,
                            &head,
                            &feats,
                            &[1, 0],
                            LossWeights::new(0.7)?,
                        )?;
                        Ok(fl.total)
                    },
                    1e-5,
                    1e-4,
                )
            }),
        },
        Case {
            name: "qvit_block",
            run: Box::new(|| {
                let mut r = rng(4);
                let cfg = QVitConfig {
                    h: 1,
                    w: 1,
                    c: 4,
                    embed_dim: 8,
                    heads: 2,
                    blocks: 1,
                    ffn_convs: 2,
                    ffn_hidden: 8,
                    mlp_layers: 1,
                    num_classes: 2,
                };
                let block: QVitBlock<f64> = QVitBlock::init("certify.block", &cfg, &mut r).unwrap();
                let x = randt(&mut r, vec![4, 8, 4]).scale(0.5);
                let w = randt(&mut r, vec![4, 8, 4]);
                grad_check_model(
                    &block,
                    |tape| {
                        let y = block.forward(tape, &tape.constant(x.clone()))?;
                        Ok(y.mul(&tape.constant(w.clone()))?.sum())
                    },
                    1e-3,
                    1e-3,
                )
            }),
        },
    ]
}

/// Core ops first, composites after; the order is the report order.
pub fn certification_cases() -> Vec<Case> {
    let mut cases = core_op_cases();
    cases.extend(composite_cases());
    cases
}
