//! Orthogonal feature decomposition head.

use rand::Rng;

use crate::autograd::{Param, Parameterized, Tape, Var};
use crate::error::{Error, Result};
use crate::qcore::Real;
use crate::qnn::{component_softmax, gap, ConvLayer, FcLayer};

/// Three independent pointwise convolutions mapping backbone features to
/// three compact maps, plus an auxiliary real classifier over the
/// concatenated pooled vectors for fine-tuning cross-entropy.
pub struct OrthoHead<T: Real> {
    pub branches: [ConvLayer<T>; 3],
    pub aux: FcLayer<T>,
    feature_dim: usize,
    compact_dim: usize,
}

impl<T: Real> OrthoHead<T> {
    pub fn init(
        name: &str,
        feature_dim: usize,
        compact_dim: usize,
        num_classes: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let branches = [0, 1, 2].map(|i| {
            ConvLayer::init(&format!("{name}.u{i}"), 1, 1, feature_dim, compact_dim, 1, 0, rng)
        });
        OrthoHead {
            branches,
            aux: FcLayer::init(&format!("{name}.aux"), 3 * compact_dim, num_classes, rng),
            feature_dim,
            compact_dim,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.feature_dim, self.compact_dim)
    }
}

impl<T: Real> Parameterized<T> for OrthoHead<T> {
    fn visit_params(&self, f: &mut dyn FnMut(&Param<T>)) {
        for b in &self.branches {
            b.visit_params(f);
        }
        self.aux.visit_params(f);
    }
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        for b in &mut self.branches {
            b.visit_params_mut(f);
        }
        self.aux.visit_params_mut(f);
    }
}

/// Result of [`decompose`]: compact maps `u`, pooled pre-softmax vectors `g`,
/// and softmaxed unit-sum vectors `v`.
pub struct Decomposition<T: Real> {
    pub u: [Var<T>; 3],
    pub g: [Var<T>; 3],
    pub v: [Var<T>; 3],
}

/// Pushes a real `[h, w, feature_dim]` map through the three branches:
/// `u_i = conv1x1_i(f)`, `g_i = gap(u_i)`, `v_i = softmax(g_i)`.
pub fn decompose<T: Real>(tape: &Tape<T>, f: &Var<T>, head: &OrthoHead<T>) -> Result<Decomposition<T>> {
    let fs = f.shape();
    if fs.len() != 3 || fs[2] != head.feature_dim {
        return Err(Error::shape(
            "decompose",
            format!("features {:?} vs head width {}", fs, head.feature_dim),
        ));
    }
    let mut u = Vec::with_capacity(3);
    let mut g = Vec::with_capacity(3);
    let mut v = Vec::with_capacity(3);
    for branch in &head.branches {
        let ui = branch.forward(tape, f)?;
        let gi = gap(&ui)?;
        let vi = component_softmax(&gi, 0)?;
        u.push(ui);
        g.push(gi);
        v.push(vi);
    }
    let into3 = |mut xs: Vec<Var<T>>| {
        let c = xs.pop().unwrap();
        let b = xs.pop().unwrap();
        let a = xs.pop().unwrap();
        [a, b, c]
    };
    Ok(Decomposition { u: into3(u), g: into3(g), v: into3(v) })
}
