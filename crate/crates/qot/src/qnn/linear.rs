//! Quaternion and real fully-connected layers.

use rand::Rng;

use crate::autograd::{Param, Parameterized, Tape, Var};
use crate::error::{Error, Result};
use crate::qcore::{QTensor, Real};

use super::init;

/// Hamilton-product linear map with the weight on the left of each product:
/// `out[t][o] = b[o] + sum_d W[d][o] (x) x[t][d]`.
///
/// Real parameter count is `4 d_in d_out + 4 d_out`, a quarter of the weight
/// count of a real fully-connected layer on the same real widths.
pub struct QfcLayer<T: Real> {
    pub w: Param<T>,
    pub b: Param<T>,
    d_in: usize,
    d_out: usize,
}

/// `w [d_in, d_out, 4]` applied weight-left to `x [t, d_in, 4]`, giving
/// `[t, d_out, 4]`. Shared by the pointwise-convolution fast path.
pub(crate) fn weight_left_apply<T: Real>(w: &Var<T>, x: &Var<T>) -> Result<Var<T>> {
    let wt = w.permute(&[1, 0, 2])?;
    let xt = x.permute(&[1, 0, 2])?;
    wt.quat_matmul(&xt)?.permute(&[1, 0, 2])
}

impl<T: Real> QfcLayer<T> {
    pub fn init(name: &str, d_in: usize, d_out: usize, rng: &mut impl Rng) -> Self {
        QfcLayer {
            w: Param::new(
                format!("{name}.w"),
                init::quat_glorot(rng, d_in, d_out, vec![d_in, d_out, 4]),
            ),
            b: Param::new(format!("{name}.b"), QTensor::zeros(vec![d_out, 4])),
            d_in,
            d_out,
        }
    }

    /// Square layer whose weight matrix is the quaternion identity; output
    /// equals input. Test fixture.
    pub fn identity(name: &str, d: usize) -> Self {
        let w = QTensor::from_fn(vec![d, d, 4], |flat| {
            let (quat, comp) = (flat / 4, flat % 4);
            let (row, col) = (quat / d, quat % d);
            if row == col && comp == 0 {
                T::one()
            } else {
                T::zero()
            }
        });
        QfcLayer {
            w: Param::new(format!("{name}.w"), w),
            b: Param::new(format!("{name}.b"), QTensor::zeros(vec![d, 4])),
            d_in: d,
            d_out: d,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.d_in, self.d_out)
    }

    pub fn forward(&self, tape: &Tape<T>, x: &Var<T>) -> Result<Var<T>> {
        let xs = x.shape();
        if xs.len() != 3 || xs[2] != 4 || xs[1] != self.d_in {
            return Err(Error::shape(
                "qfc_forward",
                format!("input {:?} vs layer [{} -> {}]", xs, self.d_in, self.d_out),
            ));
        }
        weight_left_apply(&self.w.var(tape), x)?.add_bias(&self.b.var(tape))
    }
}

impl<T: Real> Parameterized<T> for QfcLayer<T> {
    fn visit_params(&self, f: &mut dyn FnMut(&Param<T>)) {
        f(&self.w);
        f(&self.b);
    }
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        f(&mut self.w);
        f(&mut self.b);
    }
}

/// Ordinary real fully-connected layer, `[batch, d_in] -> [batch, d_out]`.
pub struct FcLayer<T: Real> {
    pub w: Param<T>,
    pub b: Param<T>,
    d_in: usize,
    d_out: usize,
}

impl<T: Real> FcLayer<T> {
    pub fn init(name: &str, d_in: usize, d_out: usize, rng: &mut impl Rng) -> Self {
        FcLayer {
            w: Param::new(format!("{name}.w"), init::real_glorot(rng, d_in, d_out, vec![d_in, d_out])),
            b: Param::new(format!("{name}.b"), QTensor::zeros(vec![d_out])),
            d_in,
            d_out,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.d_in, self.d_out)
    }

    pub fn forward(&self, tape: &Tape<T>, x: &Var<T>) -> Result<Var<T>> {
        let xs = x.shape();
        if xs.len() != 2 || xs[1] != self.d_in {
            return Err(Error::shape(
                "fc_forward",
                format!("input {:?} vs layer [{} -> {}]", xs, self.d_in, self.d_out),
            ));
        }
        x.matmul(&self.w.var(tape))?.add_bias(&self.b.var(tape))
    }
}

impl<T: Real> Parameterized<T> for FcLayer<T> {
    fn visit_params(&self, f: &mut dyn FnMut(&Param<T>)) {
        f(&self.w);
        f(&self.b);
    }
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        f(&mut self.w);
        f(&mut self.b);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autograd::param::param_count;
    use crate::qcore::Quaternion;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_layer_passes_input_through() {
        let tape = Tape::<f64>::new();
        let layer = QfcLayer::<f64>::identity("id", 3);
        let x = tape.constant(QTensor::from_fn(vec![2, 3, 4], |i| i as f64 * 0.1 - 0.5));
        let y = layer.forward(&tape, &x).unwrap();
        assert!(y.value().max_abs_diff(&x.value()) < 1e-15);
    }

    #[test]
    fn one_by_one_reduces_to_hamilton_plus_bias() {
        let tape = Tape::<f64>::new();
        let w = Quaternion::new(0.3, -0.7, 1.1, 0.5);
        let xq = Quaternion::new(-1.0, 0.2, 0.4, 2.0);
        let bq = Quaternion::new(0.05, -0.1, 0.2, 0.8);
        let layer = QfcLayer {
            w: Param::new("l.w", QTensor::from_vec(vec![1, 1, 4], w.to_array().to_vec()).unwrap()),
            b: Param::new("l.b", QTensor::from_vec(vec![1, 4], bq.to_array().to_vec()).unwrap()),
            d_in: 1,
            d_out: 1,
        };
        let x = tape.constant(QTensor::from_vec(vec![1, 1, 4], xq.to_array().to_vec()).unwrap());
        let y = layer.forward(&tape, &x).unwrap().value();
        let expected = w.hamilton(xq).add(bq);
        for (got, want) in y.data().iter().zip(expected.to_array()) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn parameter_count_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let qfc = QfcLayer::<f64>::init("q", 5, 3, &mut rng);
        assert_eq!(param_count(&qfc), 4 * 5 * 3 + 4 * 3);
        let fc = FcLayer::<f64>::init("f", 20, 12, &mut rng);
        assert_eq!(param_count(&fc), 20 * 12 + 12);
        // quaternion weight count is exactly a quarter of the real FC's
        // weight count on the same real widths
        assert_eq!((4 * 5 * 3) * 4, 20 * 12);
    }

    #[test]
    fn rejects_wrong_width() {
        let tape = Tape::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let layer = QfcLayer::<f64>::init("q", 4, 2, &mut rng);
        let x = tape.constant(QTensor::zeros(vec![2, 3, 4]));
        assert!(layer.forward(&tape, &x).is_err());
    }

    #[test]
    fn fc_matches_manual_affine() {
        let tape = Tape::<f64>::new();
        let layer = FcLayer {
            w: Param::new("f.w", QTensor::from_vec(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap()),
            b: Param::new("f.b", QTensor::from_vec(vec![2], vec![10.0, 20.0]).unwrap()),
            d_in: 2,
            d_out: 2,
        };
        let x = tape.constant(QTensor::from_vec(vec![1, 2], vec![1.0, 1.0]).unwrap());
        let y = layer.forward(&tape, &x).unwrap().value();
        assert_eq!(y.data(), &[14.0, 26.0]);
    }
}
