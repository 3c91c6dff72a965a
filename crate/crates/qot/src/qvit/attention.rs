//! Quaternion multi-head self-attention.

use rand::Rng;

use crate::autograd::{Param, Parameterized, Tape, Var};
use crate::error::{Error, Result};
use crate::qcore::Real;
use crate::qnn::{component_softmax, QfcLayer};

/// Multi-head self-attention over a quaternion token sequence `[t, e, 4]`.
///
/// Each head projects tokens to `head_dim` with its own quaternion
/// fully-connected q/k/v maps, forms Hamilton-product scores
/// `Q (x) K^T / sqrt(head_dim)`, applies a per-component softmax over keys,
/// and mixes values with another Hamilton product. Head outputs concatenate
/// back to `e` quaternion channels and pass through the output map.
pub struct QMhsa<T: Real> {
    q: Vec<QfcLayer<T>>,
    k: Vec<QfcLayer<T>>,
    v: Vec<QfcLayer<T>>,
    o: QfcLayer<T>,
    head_dim: usize,
    /// Conjugate keys before the transpose, turning scores into Hermitian
    /// products. Off by default: scores use the plain transpose.
    pub conjugate_keys: bool,
}

impl<T: Real> QMhsa<T> {
    pub fn init(name: &str, embed_dim: usize, heads: usize, rng: &mut impl Rng) -> Result<Self> {
        if heads == 0 || !embed_dim.is_multiple_of(heads) {
            return Err(Error::Config(format!(
                "embed_dim {embed_dim} not divisible by heads {heads}"
            )));
        }
        let head_dim = embed_dim / heads;
        let mut q = Vec::with_capacity(heads);
        let mut k = Vec::with_capacity(heads);
        let mut v = Vec::with_capacity(heads);
        for h in 0..heads {
            q.push(QfcLayer::init(&format!("{name}.q{h}"), embed_dim, head_dim, rng));
            k.push(QfcLayer::init(&format!("{name}.k{h}"), embed_dim, head_dim, rng));
            v.push(QfcLayer::init(&format!("{name}.v{h}"), embed_dim, head_dim, rng));
        }
        let o = QfcLayer::init(&format!("{name}.o"), embed_dim, embed_dim, rng);
        Ok(QMhsa { q, k, v, o, head_dim, conjugate_keys: false })
    }

    pub fn heads(&self) -> usize {
        self.q.len()
    }

    pub fn head_dim(&self) -> usize {
        self.head_dim
    }

    pub fn forward(&self, tape: &Tape<T>, x: &Var<T>) -> Result<Var<T>> {
        let scale = T::from_f64(1.0 / (self.head_dim as f64).sqrt());
        let mut heads = Vec::with_capacity(self.q.len());
        for h in 0..self.q.len() {
            let q = self.q[h].forward(tape, x)?;
            let mut k = self.k[h].forward(tape, x)?;
            if self.conjugate_keys {
                k = k.conjugate()?;
            }
            let v = self.v[h].forward(tape, x)?;
            let scores = q.quat_matmul(&k.permute(&[1, 0, 2])?)?.scale(scale);
            // scores [t, t, 4]: axis 1 runs over keys
            let attn = component_softmax(&scores, 1)?;
            heads.push(attn.quat_matmul(&v)?);
        }
        let merged = Var::concat(&heads, 1)?;
        self.o.forward(tape, &merged)
    }

    /// Post-softmax attention maps, one `[t, t, 4]` tensor per head. Rows sum
    /// to one over keys in every component.
    pub fn attention_maps(&self, tape: &Tape<T>, x: &Var<T>) -> Result<Vec<Var<T>>> {
        let scale = T::from_f64(1.0 / (self.head_dim as f64).sqrt());
        let mut maps = Vec::with_capacity(self.q.len());
        for h in 0..self.q.len() {
            let q = self.q[h].forward(tape, x)?;
            let mut k = self.k[h].forward(tape, x)?;
            if self.conjugate_keys {
                k = k.conjugate()?;
            }
            let scores = q.quat_matmul(&k.permute(&[1, 0, 2])?)?.scale(scale);
            maps.push(component_softmax(&scores, 1)?);
        }
        Ok(maps)
    }
}

impl<T: Real> Parameterized<T> for QMhsa<T> {
    fn visit_params(&self, f: &mut dyn FnMut(&Param<T>)) {
        for h in 0..self.q.len() {
            self.q[h].visit_params(f);
            self.k[h].visit_params(f);
            self.v[h].visit_params(f);
        }
        self.o.visit_params(f);
    }
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        for h in 0..self.q.len() {
            self.q[h].visit_params_mut(f);
            self.k[h].visit_params_mut(f);
            self.v[h].visit_params_mut(f);
        }
        self.o.visit_params_mut(f);
    }
}
