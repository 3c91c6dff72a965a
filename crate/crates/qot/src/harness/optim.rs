//! First-order optimizers driven by the tape's name-keyed gradient map.

use std::collections::BTreeMap;

use crate::autograd::{for_each_trainable, Parameterized};
use crate::error::{Error, Result};
use crate::qcore::{QTensor, Real};

/// Applies one update from a gradient map. Parameters absent from the map
/// were untouched by the loss and are left as they are; state is keyed by
/// parameter name so it survives across tapes.
pub trait Optimizer<T: Real> {
    fn step(
        &mut self,
        model: &mut dyn Parameterized<T>,
        grads: &BTreeMap<String, QTensor<T>>,
    ) -> Result<()>;
}

pub struct Sgd<T: Real> {
    lr: T,
    momentum: T,
    velocity: BTreeMap<String, Vec<T>>,
}

impl<T: Real> Sgd<T> {
    pub fn new(lr: f64, momentum: f64) -> Self {
        Sgd {
            lr: T::from_f64(lr),
            momentum: T::from_f64(momentum),
            velocity: BTreeMap::new(),
        }
    }
}

impl<T: Real> Optimizer<T> for Sgd<T> {
    fn step(
        &mut self,
        model: &mut dyn Parameterized<T>,
        grads: &BTreeMap<String, QTensor<T>>,
    ) -> Result<()> {
        let mut failure: Option<Error> = None;
        for_each_trainable(model, &mut |p| {
            if failure.is_some() {
                return;
            }
            let Some(g) = grads.get(&p.name) else { return };
            if g.shape() != p.value.shape() {
                failure = Some(Error::shape(
                    "sgd step",
                    format!("{}: grad {:?} vs param {:?}", p.name, g.shape(), p.value.shape()),
                ));
                return;
            }
            let v = self
                .velocity
                .entry(p.name.clone())
                .or_insert_with(|| vec![T::zero(); g.len()]);
            let mut next = Vec::with_capacity(g.len());
            for ((vi, &gi), &xi) in v.iter_mut().zip(g.data()).zip(p.value.data()) {
                *vi = self.momentum * *vi + gi;
                next.push(xi - self.lr * *vi);
            }
            p.value = QTensor::from_vec(p.value.shape().to_vec(), next)
                .expect("update preserves shape");
        });
        failure.map_or(Ok(()), Err)
    }
}

pub struct Adam<T: Real> {
    lr: T,
    beta1: T,
    beta2: T,
    eps: T,
    t: u32,
    m: BTreeMap<String, Vec<T>>,
    v: BTreeMap<String, Vec<T>>,
}

impl<T: Real> Adam<T> {
    /// Standard defaults: beta1 0.9, beta2 0.999, eps 1e-8.
    pub fn new(lr: f64) -> Self {
        Adam::with_betas(lr, 0.9, 0.999, 1e-8)
    }

    pub fn with_betas(lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Adam {
            lr: T::from_f64(lr),
            beta1: T::from_f64(beta1),
            beta2: T::from_f64(beta2),
            eps: T::from_f64(eps),
            t: 0,
            m: BTreeMap::new(),
            v: BTreeMap::new(),
        }
    }
}

impl<T: Real> Optimizer<T> for Adam<T> {
    fn step(
        &mut self,
        model: &mut dyn Parameterized<T>,
        grads: &BTreeMap<String, QTensor<T>>,
    ) -> Result<()> {
        self.t += 1;
        let one = T::one();
        let bias1 = one - self.beta1.powi(self.t as i32);
        let bias2 = one - self.beta2.powi(self.t as i32);
        let mut failure: Option<Error> = None;
        for_each_trainable(model, &mut |p| {
            if failure.is_some() {
                return;
            }
            let Some(g) = grads.get(&p.name) else { return };
            if g.shape() != p.value.shape() {
                failure = Some(Error::shape(
                    "adam step",
                    format!("{}: grad {:?} vs param {:?}", p.name, g.shape(), p.value.shape()),
                ));
                return;
            }
            let m = self.m.entry(p.name.clone()).or_insert_with(|| vec![T::zero(); g.len()]);
            let v = self.v.entry(p.name.clone()).or_insert_with(|| vec![T::zero(); g.len()]);
            let mut next = Vec::with_capacity(g.len());
            for (((mi, vi), &gi), &xi) in m.iter_mut().zip(v.iter_mut()).zip(g.data()).zip(p.value.data()) {
                *mi = self.beta1 * *mi + (one - self.beta1) * gi;
                *vi = self.beta2 * *vi + (one - self.beta2) * gi * gi;
                let m_hat = *mi / bias1;
                let v_hat = *vi / bias2;
                next.push(xi - self.lr * m_hat / (v_hat.sqrt() + self.eps));
            }
            p.value = QTensor::from_vec(p.value.shape().to_vec(), next)
                .expect("update preserves shape");
        });
        failure.map_or(Ok(()), Err)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autograd::Param;

    struct Toy {
        a: Param<f64>,
        frozen: Param<f64>,
    }

    impl Parameterized<f64> for Toy {
        fn visit_params(&self, f: &mut dyn FnMut(&Param<f64>)) {
            f(&self.a);
            f(&self.frozen);
        }
        fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<f64>)) {
            f(&mut self.a);
            f(&mut self.frozen);
        }
    }

    fn toy() -> Toy {
        Toy {
            a: Param::new("a", QTensor::from_vec(vec![2], vec![1.0, -2.0]).unwrap()),
            frozen: Param::frozen("frozen", QTensor::full(vec![1], 5.0)),
        }
    }

    fn grads(g: &[f64]) -> BTreeMap<String, QTensor<f64>> {
        let mut map = BTreeMap::new();
        map.insert("a".to_string(), QTensor::from_vec(vec![2], g.to_vec()).unwrap());
        map.insert("frozen".to_string(), QTensor::full(vec![1], 100.0));
        map
    }

    #[test]
    fn plain_sgd_subtracts_scaled_gradient() {
        let mut model = toy();
        let mut opt = Sgd::new(0.1, 0.0);
        opt.step(&mut model, &grads(&[1.0, -4.0])).unwrap();
        assert_eq!(model.a.value.data(), &[0.9, -1.6]);
        assert_eq!(model.frozen.value.data(), &[5.0]);
    }

    #[test]
    fn momentum_accumulates_velocity() {
        let mut model = toy();
        let mut opt = Sgd::new(0.1, 0.5);
        opt.step(&mut model, &grads(&[1.0, 0.0])).unwrap();
        opt.step(&mut model, &grads(&[1.0, 0.0])).unwrap();
        // v1 = 1, v2 = 1.5; x = 1 - 0.1 - 0.15
        assert!((model.a.value.data()[0] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn adam_matches_hand_computation() {
        let mut model = toy();
        let mut opt = Adam::new(0.01);
        opt.step(&mut model, &grads(&[0.5, 0.5])).unwrap();
        // Step 1 with constant gradient: m_hat = g, v_hat = g^2, so the
        // update is lr * g / (|g| + eps), essentially a full lr step.
        let expect = 1.0 - 0.01 * 0.5 / (0.5 + 1e-8);
        assert!((model.a.value.data()[0] - expect).abs() < 1e-12);

        opt.step(&mut model, &grads(&[0.5, 0.5])).unwrap();
        let m2 = 0.9 * (0.1 * 0.5) + 0.1 * 0.5;
        let v2 = 0.999 * (0.001 * 0.25) + 0.001 * 0.25;
        let m_hat = m2 / (1.0 - 0.9f64.powi(2));
        let v_hat = v2 / (1.0 - 0.999f64.powi(2));
        let expect2 = expect - 0.01 * m_hat / (v_hat.sqrt() + 1e-8);
        assert!((model.a.value.data()[0] - expect2).abs() < 1e-12);
    }

    #[test]
    fn missing_gradient_leaves_parameter_alone() {
        let mut model = toy();
        let mut opt = Adam::new(0.1);
        opt.step(&mut model, &BTreeMap::new()).unwrap();
        assert_eq!(model.a.value.data(), &[1.0, -2.0]);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut model = toy();
        let mut bad = BTreeMap::new();
        bad.insert("a".to_string(), QTensor::full(vec![3], 1.0));
        let mut opt = Sgd::new(0.1, 0.0);
        assert!(opt.step(&mut model, &bad).is_err());
    }
}
