//! Named trainable tensors and the visitor that exposes a model's full
//! parameter set to optimizers, checkpoints, and counters.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::qcore::{QTensor, Real};

use super::tape::{Tape, Var};

/// A named tensor owned by a layer. Binding it to a tape yields the graph
/// leaf; the name is the stable identity across tapes, optimizer state, and
/// checkpoints.
#[derive(Clone, Debug)]
pub struct Param<T: Real> {
    pub name: String,
    pub value: QTensor<T>,
    pub trainable: bool,
}

impl<T: Real> Param<T> {
    pub fn new(name: impl Into<String>, value: QTensor<T>) -> Self {
        Param { name: name.into(), value, trainable: true }
    }

    pub fn frozen(name: impl Into<String>, value: QTensor<T>) -> Self {
        Param { name: name.into(), value, trainable: false }
    }

    pub fn var(&self, tape: &Tape<T>) -> Var<T> {
        tape.param(&self.name, self.value.clone(), self.trainable)
    }
}

/// Anything owning an ordered set of parameters. Visit order must be
/// deterministic; it defines checkpoint layout.
pub trait Parameterized<T: Real> {
    fn visit_params(&self, f: &mut dyn FnMut(&Param<T>));
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>));
}

pub fn param_count<T: Real>(model: &dyn Parameterized<T>) -> u64 {
    let mut n = 0u64;
    model.visit_params(&mut |p| {
        if p.trainable {
            n += p.value.len() as u64;
        }
    });
    n
}

/// (name, value) pairs in visit order.
pub fn snapshot<T: Real>(model: &dyn Parameterized<T>) -> Vec<(String, QTensor<T>)> {
    let mut out = Vec::new();
    model.visit_params(&mut |p| out.push((p.name.clone(), p.value.clone())));
    out
}

/// Writes values into matching names; every name must exist with the same
/// shape, surplus map entries are reported as errors.
pub fn load_values<T: Real>(
    model: &mut dyn Parameterized<T>,
    values: &BTreeMap<String, QTensor<T>>,
) -> Result<()> {
    let mut used = 0usize;
    let mut missing = Vec::new();
    let mut bad_shape = Vec::new();
    model.visit_params_mut(&mut |p| match values.get(&p.name) {
        Some(v) if v.shape() == p.value.shape() => {
            p.value = v.clone();
            used += 1;
        }
        Some(v) => bad_shape.push(format!(
            "{}: stored {:?}, model {:?}",
            p.name,
            v.shape(),
            p.value.shape()
        )),
        None => missing.push(p.name.clone()),
    });
    if !bad_shape.is_empty() {
        return Err(Error::shape("load_values", bad_shape.join("; ")));
    }
    if !missing.is_empty() {
        return Err(Error::Contract(format!(
            "load_values: no stored tensor for {}",
            missing.join(", ")
        )));
    }
    if used != values.len() {
        let mut names: Vec<&String> = values.keys().collect();
        let mut model_names = std::collections::BTreeSet::new();
        model.visit_params_mut(&mut |p| {
            model_names.insert(p.name.clone());
        });
        names.retain(|n| !model_names.contains(*n));
        return Err(Error::Contract(format!(
            "load_values: {} stored tensors match no parameter: {:?}",
            names.len(),
            names
        )));
    }
    Ok(())
}

pub fn set_trainable<T: Real>(model: &mut dyn Parameterized<T>, trainable: bool) {
    model.visit_params_mut(&mut |p| p.trainable = trainable);
}

/// Applies the trainable-parameter gradients of a finished tape via `f`.
pub fn for_each_trainable<T: Real>(
    model: &mut dyn Parameterized<T>,
    f: &mut dyn FnMut(&mut Param<T>),
) {
    model.visit_params_mut(&mut |p| {
        if p.trainable {
            f(p);
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Toy {
        a: Param<f64>,
        b: Param<f64>,
    }

    impl Parameterized<f64> for Toy {
        fn visit_params(&self, f: &mut dyn FnMut(&Param<f64>)) {
            f(&self.a);
            f(&self.b);
        }
        fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<f64>)) {
            f(&mut self.a);
            f(&mut self.b);
        }
    }

    fn toy() -> Toy {
        Toy {
            a: Param::new("a", QTensor::full(vec![2, 2], 1.0)),
            b: Param::new("b", QTensor::full(vec![3], 2.0)),
        }
    }

    #[test]
    fn count_and_snapshot() {
        let t = toy();
        assert_eq!(param_count(&t), 7);
        let snap = snapshot(&t);
        assert_eq!(snap.len(), 2);
        assert_eq!(snap[0].0, "a");
    }

    #[test]
    fn load_roundtrip_and_mismatch() {
        let mut t = toy();
        let mut values: BTreeMap<String, QTensor<f64>> =
            snapshot(&t).into_iter().collect();
        values.insert("a".into(), QTensor::full(vec![2, 2], 9.0));
        load_values(&mut t, &values).unwrap();
        assert_eq!(t.a.value.data()[0], 9.0);

        values.insert("ghost".into(), QTensor::zeros(vec![1]));
        assert!(load_values(&mut t, &values).is_err());

        let mut bad: BTreeMap<String, QTensor<f64>> = snapshot(&t).into_iter().collect();
        bad.insert("a".into(), QTensor::zeros(vec![5]));
        assert!(load_values(&mut t, &bad).is_err());
    }
}
