//! Fine-tuning objective and the feature extraction stage ahead of the
//! transformer.

use crate::autograd::{Tape, Var};
use crate::error::{Error, Result};
use crate::qcore::{QTensor, Real};
use crate::qnn::{combined_loss, orthogonal_loss, LossWeights};

use super::backbone::ToyBackbone;
use super::head::{decompose, OrthoHead};
use super::quat_build::build_quaternion;

/// Taped loss terms of one fine-tuning step, plus the `[B, K]` auxiliary
/// logits for accuracy bookkeeping.
pub struct FinetuneLoss<T: Real> {
    pub total: Var<T>,
    pub ce: Var<T>,
    pub ortho: Var<T>,
    pub logits: Var<T>,
}

/// Builds the stage-one objective on a labeled image batch: cross-entropy
/// from the auxiliary head on concatenated pooled vectors, plus the weighted
/// mean orthogonality penalty of the softmaxed vectors.
pub fn finetune_loss<T: Real>(
    tape: &Tape<T>,
    backbone: &ToyBackbone<T>,
    head: &OrthoHead<T>,
    images: &[QTensor<T>],
    labels: &[usize],
    weights: LossWeights<T>,
) -> Result<FinetuneLoss<T>> {
    if images.is_empty() || images.len() != labels.len() {
        return Err(Error::Contract(format!(
            "batch of {} images vs {} labels",
            images.len(),
            labels.len()
        )));
    }
    let mut logit_rows = Vec::with_capacity(images.len());
    let mut ortho_terms = Vec::with_capacity(images.len());
    for image in images {
        let x = tape.constant(image.clone());
        let f = backbone.forward(tape, &x)?;
        let sample = features_loss_parts(tape, &f, head)?;
        logit_rows.push(sample.0);
        ortho_terms.push(sample.1);
    }
    let logits = Var::concat(&logit_rows, 0)?;
    let ce = logits.cross_entropy(labels)?;
    let ortho = mean_of(&ortho_terms)?;
    let total = combined_loss(&ce, &ortho, weights)?;
    Ok(FinetuneLoss { total, ce, ortho, logits })
}

/// Same objective over precomputed backbone features instead of images.
pub fn finetune_loss_on_features<T: Real>(
    tape: &Tape<T>,
    head: &OrthoHead<T>,
    features: &[QTensor<T>],
    labels: &[usize],
    weights: LossWeights<T>,
) -> Result<FinetuneLoss<T>> {
    if features.is_empty() || features.len() != labels.len() {
        return Err(Error::Contract(format!(
            "batch of {} feature maps vs {} labels",
            features.len(),
            labels.len()
        )));
    }
    let mut logit_rows = Vec::with_capacity(features.len());
    let mut ortho_terms = Vec::with_capacity(features.len());
    for f in features {
        let fv = tape.constant(f.clone());
        let sample = features_loss_parts(tape, &fv, head)?;
        logit_rows.push(sample.0);
        ortho_terms.push(sample.1);
    }
    let logits = Var::concat(&logit_rows, 0)?;
    let ce = logits.cross_entropy(labels)?;
    let ortho = mean_of(&ortho_terms)?;
    let total = combined_loss(&ce, &ortho, weights)?;
    Ok(FinetuneLoss { total, ce, ortho, logits })
}

/// One sample's logit row `[1, K]` and scalar orthogonality term.
fn features_loss_parts<T: Real>(
    tape: &Tape<T>,
    f: &Var<T>,
    head: &OrthoHead<T>,
) -> Result<(Var<T>, Var<T>)> {
    let dec = decompose(tape, f, head)?;
    let pooled = Var::concat(&[dec.g[0].clone(), dec.g[1].clone(), dec.g[2].clone()], 0)?;
    let width = pooled.shape()[0];
    let logits = head.aux.forward(tape, &pooled.reshape(vec![1, width])?)?;
    let ortho = orthogonal_loss(&dec.v[0], &dec.v[1], &dec.v[2])?;
    Ok((logits, ortho))
}

fn mean_of<T: Real>(terms: &[Var<T>]) -> Result<Var<T>> {
    let mut acc = terms[0].clone();
    for t in &terms[1..] {
        acc = acc.add(t)?;
    }
    Ok(acc.scale(T::from_f64(1.0 / terms.len() as f64)))
}

/// Backbone features to quaternion input for the transformer:
/// decompose, then pack `(ave, u1, u2, u3)` per element.
pub fn features_to_quaternion<T: Real>(
    tape: &Tape<T>,
    f: &Var<T>,
    head: &OrthoHead<T>,
) -> Result<Var<T>> {
    let dec = decompose(tape, f, head)?;
    build_quaternion(&dec.u[0], &dec.u[1], &dec.u[2])
}

/// Full extraction stage: image through the backbone, decomposition, and the
/// quaternion builder. Output is `[h', w', compact_dim, 4]`.
pub fn extract_pipeline<T: Real>(
    tape: &Tape<T>,
    backbone: &ToyBackbone<T>,
    head: &OrthoHead<T>,
    image: &QTensor<T>,
) -> Result<Var<T>> {
    let x = tape.constant(image.clone());
    let f = backbone.forward(tape, &x)?;
    features_to_quaternion(tape, &f, head)
}
