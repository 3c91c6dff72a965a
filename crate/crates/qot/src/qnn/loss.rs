//! Loss functions: cross-entropy (taped op), the pairwise-cosine
//! orthogonality penalty, and their weighted combination.

use crate::autograd::Var;
use crate::error::{Error, Result};
use crate::qcore::Real;

/// Balance between cross-entropy and the orthogonality penalty.
#[derive(Clone, Copy, Debug)]
pub struct LossWeights<T: Real> {
    pub lambda: T,
}

impl<T: Real> LossWeights<T> {
    pub fn new(lambda: T) -> Result<Self> {
        if !lambda.is_finite() || lambda < T::zero() {
            return Err(Error::Contract(format!(
                "lambda must be finite and non-negative, got {}",
                lambda
            )));
        }
        Ok(LossWeights { lambda })
    }
}

/// Cosine similarity of two vectors as a taped scalar. Degenerate on a
/// zero-norm input, since the quotient is undefined there.
pub fn cosine<T: Real>(a: &Var<T>, b: &Var<T>) -> Result<Var<T>> {
    let (sa, sb) = (a.shape(), b.shape());
    if sa.len() != 1 || sa != sb {
        return Err(Error::shape(
            "cosine",
            format!("need two equal-length vectors, got {:?} and {:?}", sa, sb),
        ));
    }
    for (name, v) in [("first", a), ("second", b)] {
        if v.value().data().iter().all(|&x| x == T::zero()) {
            return Err(Error::Degenerate(format!(
                "cosine: {} vector has zero norm",
                name
            )));
        }
    }
    let dot = a.mul(b)?.sum();
    let na = a.mul(a)?.sum().sqrt();
    let nb = b.mul(b)?.sum().sqrt();
    dot.div(&na.mul(&nb)?)
}

/// Mean absolute pairwise cosine over the three unordered pairs:
/// `(|cos(v1,v2)| + |cos(v1,v3)| + |cos(v2,v3)|) / 3`. Lives in [0, 1];
/// identical vectors score exactly 1, mutually orthogonal ones 0.
pub fn orthogonal_loss<T: Real>(v1: &Var<T>, v2: &Var<T>, v3: &Var<T>) -> Result<Var<T>> {
    let c12 = cosine(v1, v2)?.abs();
    let c13 = cosine(v1, v3)?.abs();
    let c23 = cosine(v2, v3)?.abs();
    Ok(c12.add(&c13)?.add(&c23)?.scale(T::from_f64(1.0 / 3.0)))
}

/// Total training objective: `ce + lambda * ortho`.
pub fn combined_loss<T: Real>(ce: &Var<T>, ortho: &Var<T>, w: LossWeights<T>) -> Result<Var<T>> {
    ce.add(&ortho.scale(w.lambda))
}
