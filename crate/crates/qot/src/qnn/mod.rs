//! Neural layer primitives: quaternion and real linear/convolution layers,
//! normalization, activations, pooling, and losses.

pub mod conv;
pub mod init;
pub mod linear;
pub mod loss;
pub mod norm;

pub use conv::{ConvLayer, QConvLayer};
pub use linear::{FcLayer, QfcLayer};
pub use loss::{combined_loss, cosine, orthogonal_loss, LossWeights};
pub use norm::LayerNorm;

use crate::autograd::Var;
use crate::error::{Error, Result};
use crate::qcore::Real;

/// Softmax along `axis`, applied to each of the four quaternion components
/// independently when the trailing axis is the component axis; on plain real
/// tensors this is the ordinary axis softmax.
pub fn component_softmax<T: Real>(x: &Var<T>, axis: usize) -> Result<Var<T>> {
    x.softmax(axis)
}

/// Global average pooling: spatial mean per channel, `[H, W, C] -> [C]`.
pub fn gap<T: Real>(x: &Var<T>) -> Result<Var<T>> {
    let xs = x.shape();
    if xs.len() != 3 {
        return Err(Error::shape(
            "gap",
            format!("need [H, W, C], got {:?}", xs),
        ));
    }
    let (h, w) = (xs[0], xs[1]);
    x.sum_axis(0)?
        .sum_axis(0)
        .map(|s| s.scale(T::from_f64(1.0 / (h * w) as f64)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autograd::Tape;
    use crate::qcore::QTensor;

    #[test]
    fn gap_constant_map_yields_constant_vector() {
        let tape = Tape::<f64>::new();
        let x = tape.constant(QTensor::full(vec![5, 3, 4], 2.5));
        let v = gap(&x).unwrap().value();
        assert_eq!(v.shape(), &[4]);
        assert!(v.data().iter().all(|&c| (c - 2.5).abs() < 1e-15));
    }

    #[test]
    fn gap_on_single_pixel_is_identity() {
        let tape = Tape::<f64>::new();
        let x = tape.constant(QTensor::from_vec(vec![1, 1, 3], vec![1.0, 2.0, 3.0]).unwrap());
        let v = gap(&x).unwrap().value();
        assert_eq!(v.data(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn gap_matches_per_channel_mean_oracle() {
        let tape = Tape::<f64>::new();
        let xv = QTensor::from_fn(vec![7, 7, 64], |i| ((i * 29 % 101) as f64 - 50.0) * 0.037);
        let x = tape.constant(xv.clone());
        let v = gap(&x).unwrap().value();
        for c in 0..64 {
            let mut acc = 0.0;
            for y in 0..7 {
                for xx in 0..7 {
                    acc += xv.data()[(y * 7 + xx) * 64 + c];
                }
            }
            assert!((v.data()[c] - acc / 49.0).abs() < 1e-12);
        }
    }

    #[test]
    fn component_softmax_equal_entries_are_uniform() {
        let tape = Tape::<f64>::new();
        let x = tape.constant(QTensor::full(vec![5, 4], 1.25));
        let s = component_softmax(&x, 0).unwrap().value();
        assert!(s.data().iter().all(|&v| (v - 0.2).abs() < 1e-15));
    }

    #[test]
    fn component_softmax_zero_imaginaries_stay_uniform() {
        let tape = Tape::<f64>::new();
        // quaternion row of 3 entries with only real components set
        let x = tape.constant(QTensor::from_fn(vec![3, 4], |i| {
            if i % 4 == 0 {
                (i / 4) as f64
            } else {
                0.0
            }
        }));
        let s = component_softmax(&x, 0).unwrap().value();
        // imaginary components: softmax of zeros = uniform 1/3
        for comp in 1..4 {
            for t in 0..3 {
                assert!((s.data()[t * 4 + comp] - 1.0 / 3.0).abs() < 1e-12);
            }
        }
        // real component matches scalar softmax of [0, 1, 2]
        let denom = 1.0 + 1.0f64.exp() + 2.0f64.exp();
        for t in 0..3 {
            assert!((s.data()[t * 4] - (t as f64).exp() / denom).abs() < 1e-12);
        }
    }

    #[test]
    fn component_softmax_matches_scalar_oracle_per_component() {
        let tape = Tape::<f64>::new();
        let xv = QTensor::from_fn(vec![6, 4], |i| ((i * 31 % 17) as f64 - 8.0) * 0.4);
        let x = tape.constant(xv.clone());
        let s = component_softmax(&x, 0).unwrap().value();
        for comp in 0..4 {
            let col: Vec<f64> = (0..6).map(|t| xv.data()[t * 4 + comp]).collect();
            let mx = col.iter().cloned().fold(f64::MIN, f64::max);
            let exps: Vec<f64> = col.iter().map(|v| (v - mx).exp()).collect();
            let denom: f64 = exps.iter().sum();
            for t in 0..6 {
                assert!((s.data()[t * 4 + comp] - exps[t] / denom).abs() < 1e-12);
            }
        }
    }
}
