//! Quaternion orthogonal representation builder.

use crate::autograd::Var;
use crate::error::{Error, Result};
use crate::qcore::Real;

/// Packs three equal-shape real maps into a quaternion tensor: the real part
/// is their elementwise average, the imaginary parts are the maps themselves.
/// `[d...] x 3 -> [d..., 4]` with components `((f1+f2+f3)/3, f1, f2, f3)`.
pub fn build_quaternion<T: Real>(f1: &Var<T>, f2: &Var<T>, f3: &Var<T>) -> Result<Var<T>> {
    let shape = f1.shape();
    if f2.shape() != shape || f3.shape() != shape {
        return Err(Error::shape(
            "build_quaternion",
            format!("{:?} vs {:?} vs {:?}", shape, f2.shape(), f3.shape()),
        ));
    }
    let third = T::from_f64(1.0 / 3.0);
    let ave = f1.add(f2)?.add(f3)?.scale(third);

    let mut col_shape = shape.clone();
    col_shape.push(1);
    let cols = [
        ave.reshape(col_shape.clone())?,
        f1.reshape(col_shape.clone())?,
        f2.reshape(col_shape.clone())?,
        f3.reshape(col_shape)?,
    ];
    Var::concat(&cols, shape.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autograd::Tape;
    use crate::qcore::QTensor;

    #[test]
    fn equal_maps_fill_all_components() {
        let tape = Tape::<f64>::new();
        let fv = QTensor::from_fn(vec![2, 3], |i| i as f64 * 0.5 - 1.0);
        let f = tape.constant(fv.clone());
        let q = build_quaternion(&f, &f, &f).unwrap().value();
        assert_eq!(q.shape(), &[2, 3, 4]);
        for r in 0..2 {
            for c in 0..3 {
                for comp in 0..4 {
                    assert!((q.get(&[r, c, comp]) - fv.get(&[r, c])).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn zeros_stay_zero() {
        let tape = Tape::<f64>::new();
        let z = tape.constant(QTensor::zeros(vec![3, 3]));
        let q = build_quaternion(&z, &z, &z).unwrap().value();
        assert!(q.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn average_is_arithmetic_mean() {
        let tape = Tape::<f64>::new();
        let f1 = tape.constant(QTensor::scalar(3.0).reshape(vec![1, 1]).unwrap());
        let f2 = tape.constant(QTensor::zeros(vec![1, 1]));
        let f3 = tape.constant(QTensor::zeros(vec![1, 1]));
        let q = build_quaternion(&f1, &f2, &f3).unwrap().value();
        assert_eq!(q.data(), &[1.0, 3.0, 0.0, 0.0]);
    }

    #[test]
    fn components_extract_exactly() {
        let tape = Tape::<f64>::new();
        let mk = |seed: usize| {
            QTensor::from_fn(vec![4, 5], move |i| ((i * seed * 7 + seed) % 29) as f64 * 0.31 - 2.0)
        };
        let (a, b, c) = (mk(1), mk(2), mk(3));
        let q = build_quaternion(&tape.constant(a.clone()), &tape.constant(b.clone()), &tape.constant(c.clone()))
            .unwrap()
            .value();
        for r in 0..4 {
            for col in 0..5 {
                let ave = (a.get(&[r, col]) + b.get(&[r, col]) + c.get(&[r, col])) / 3.0;
                assert!((q.get(&[r, col, 0]) - ave).abs() < 1e-12);
                assert!((q.get(&[r, col, 1]) - a.get(&[r, col])).abs() < 1e-12);
                assert!((q.get(&[r, col, 2]) - b.get(&[r, col])).abs() < 1e-12);
                assert!((q.get(&[r, col, 3]) - c.get(&[r, col])).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn builder_is_linear_in_scale() {
        let tape = Tape::<f64>::new();
        let mk = |s: f64| tape.constant(QTensor::from_fn(vec![2, 2], move |i| (i as f64 + 1.0) * s));
        let (a, b, c) = (mk(0.3), mk(-0.8), mk(1.7));
        let q1 = build_quaternion(&a, &b, &c).unwrap().value().scale(2.5);
        let q2 = build_quaternion(&a.scale(2.5), &b.scale(2.5), &c.scale(2.5)).unwrap().value();
        assert!(q1.max_abs_diff(&q2) < 1e-12);
    }

    #[test]
    fn rejects_shape_mismatch() {
        let tape = Tape::<f64>::new();
        let a = tape.constant(QTensor::zeros(vec![2, 2]));
        let b = tape.constant(QTensor::zeros(vec![2, 3]));
        assert!(build_quaternion(&a, &b, &a).is_err());
    }
}
