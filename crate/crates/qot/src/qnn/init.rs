//! Weight initialization. All draws go through f64 before conversion so a
//! given seed produces the same weights at every dtype.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::qcore::{QTensor, Real};

/// Uniform Glorot-style init for quaternion weights: each of the 4
/// components i.i.d. uniform in [-s, s] with s = sqrt(6 / (4 fan_in +
/// 4 fan_out)), fans counted in quaternions.
pub fn quat_glorot<T: Real>(
    rng: &mut impl Rng,
    fan_in: usize,
    fan_out: usize,
    shape: Vec<usize>,
) -> QTensor<T> {
    debug_assert_eq!(shape.last(), Some(&4), "quaternion weight needs component axis");
    let s = (6.0 / (4.0 * fan_in as f64 + 4.0 * fan_out as f64)).sqrt();
    QTensor::from_fn(shape, |_| T::from_f64((rng.random::<f64>() * 2.0 - 1.0) * s))
}

/// Uniform Glorot init for real weights, fans counted in reals.
pub fn real_glorot<T: Real>(
    rng: &mut impl Rng,
    fan_in: usize,
    fan_out: usize,
    shape: Vec<usize>,
) -> QTensor<T> {
    let s = (6.0 / (fan_in as f64 + fan_out as f64)).sqrt();
    QTensor::from_fn(shape, |_| T::from_f64((rng.random::<f64>() * 2.0 - 1.0) * s))
}

/// Normal(0, std) init, used for position embeddings.
pub fn normal<T: Real>(rng: &mut impl Rng, std: f64, shape: Vec<usize>) -> QTensor<T> {
    let dist = Normal::new(0.0, std).expect("std must be finite and non-negative");
    QTensor::from_fn(shape, |_| T::from_f64(dist.sample(rng)))
}
