//! Define-by-run reverse-mode tape.
//!
//! A `Tape` records one forward pass as a sequence of nodes in creation
//! order, which is already a topological order of the graph. `backward`
//! walks that order in reverse exactly once, handing each node's upstream
//! gradient to its recorded backward rule and accumulating the returned
//! contributions additively, so fan-out sums naturally.
//!
//! Named parameters are deduplicated per tape: binding the same name twice
//! returns the same node, which is what makes batched forward passes
//! accumulate parameter gradients across samples.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::rc::Rc;

use crate::error::{Error, Result};
use crate::qcore::{QTensor, Real};

/// Given the node's upstream gradient, returns (input index, contribution)
/// pairs. Contributions are dense and input-shaped.
pub(crate) type BackwardFn<T> = Box<dyn Fn(&QTensor<T>) -> Vec<(usize, QTensor<T>)>>;

pub(crate) struct Node<T: Real> {
    pub value: QTensor<T>,
    pub grad: Option<QTensor<T>>,
    pub requires_grad: bool,
    pub backward: Option<BackwardFn<T>>,
    pub op: &'static str,
    pub name: Option<String>,
}

pub(crate) struct TapeInner<T: Real> {
    pub nodes: Vec<Node<T>>,
    pub by_name: BTreeMap<String, usize>,
    pub ran_backward: bool,
}

/// Shared handle to one forward pass's recorded graph.
pub struct Tape<T: Real> {
    pub(crate) inner: Rc<RefCell<TapeInner<T>>>,
}

impl<T: Real> Clone for Tape<T> {
    fn clone(&self) -> Self {
        Tape { inner: Rc::clone(&self.inner) }
    }
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// One value in the recorded graph; cheap to clone.
pub struct Var<T: Real> {
    pub(crate) tape: Tape<T>,
    pub(crate) idx: usize,
}

impl<T: Real> Clone for Var<T> {
    fn clone(&self) -> Self {
        Var { tape: self.tape.clone(), idx: self.idx }
    }
}

impl<T: Real> std::fmt::Debug for Var<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Var")
            .field("idx", &self.idx)
            .field("shape", &self.shape())
            .finish()
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Tape {
            inner: Rc::new(RefCell::new(TapeInner {
                nodes: Vec::new(),
                by_name: BTreeMap::new(),
                ran_backward: false,
            })),
        }
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub(crate) fn push(
        &self,
        value: QTensor<T>,
        requires_grad: bool,
        backward: Option<BackwardFn<T>>,
        op: &'static str,
        name: Option<String>,
    ) -> Var<T> {
        let mut inner = self.inner.borrow_mut();
        let idx = inner.nodes.len();
        inner.nodes.push(Node {
            value,
            grad: None,
            requires_grad,
            backward,
            op,
            name,
        });
        Var { tape: self.clone(), idx }
    }

    /// Records a value that never receives gradient.
    pub fn constant(&self, value: QTensor<T>) -> Var<T> {
        self.push(value, false, None, "constant", None)
    }

    /// Binds a named leaf. Rebinding an existing name on this tape returns
    /// the already-recorded node (the value argument is ignored then), so a
    /// parameter used at several sites is one graph node.
    pub fn param(&self, name: &str, value: QTensor<T>, trainable: bool) -> Var<T> {
        if let Some(&idx) = self.inner.borrow().by_name.get(name) {
            return Var { tape: self.clone(), idx };
        }
        let var = self.push(value, trainable, None, "param", Some(name.to_string()));
        self.inner.borrow_mut().by_name.insert(name.to_string(), var.idx);
        var
    }

    /// Propagates gradients from a scalar loss to every reachable
    /// `requires_grad` node. One-shot per tape.
    pub fn backward(&self, loss: &Var<T>) -> Result<()> {
        if !Rc::ptr_eq(&self.inner, &loss.tape.inner) {
            return Err(Error::Contract("backward: loss from a different tape".into()));
        }
        let mut inner = self.inner.borrow_mut();
        if inner.ran_backward {
            return Err(Error::Contract("backward already ran on this tape".into()));
        }
        if inner.nodes[loss.idx].value.len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                inner.nodes[loss.idx].value.shape()
            )));
        }
        inner.ran_backward = true;
        let seed_shape = inner.nodes[loss.idx].value.shape().to_vec();
        inner.nodes[loss.idx].grad = Some(QTensor::full(seed_shape, T::one()));
        for i in (0..=loss.idx).rev() {
            if !inner.nodes[i].requires_grad {
                continue;
            }
            let Some(g) = inner.nodes[i].grad.clone() else { continue };
            let Some(f) = inner.nodes[i].backward.take() else { continue };
            for (target, contribution) in f(&g) {
                debug_assert!(target < i, "backward edge must point upstream");
                let node = &mut inner.nodes[target];
                if !node.requires_grad {
                    continue;
                }
                node.grad = Some(match node.grad.take() {
                    Some(old) => old.add(&contribution)?,
                    None => contribution,
                });
            }
        }
        Ok(())
    }

    /// Gradient of a node, if any reached it during `backward`.
    pub fn grad(&self, var: &Var<T>) -> Option<QTensor<T>> {
        self.inner.borrow().nodes[var.idx].grad.clone()
    }

    /// Gradient of a named parameter; zeros if it never received one.
    pub fn param_grad(&self, name: &str) -> Option<QTensor<T>> {
        let inner = self.inner.borrow();
        let &idx = inner.by_name.get(name)?;
        let node = &inner.nodes[idx];
        Some(match &node.grad {
            Some(g) => g.clone(),
            None => QTensor::zeros(node.value.shape().to_vec()),
        })
    }

    /// All bound parameter names on this tape, sorted.
    pub fn param_names(&self) -> Vec<String> {
        self.inner.borrow().by_name.keys().cloned().collect()
    }

    /// Gradients of every trainable bound parameter, keyed by name.
    /// Parameters the loss never touched report zeros.
    pub fn trainable_grads(&self) -> BTreeMap<String, QTensor<T>> {
        let inner = self.inner.borrow();
        let mut out = BTreeMap::new();
        for (name, &idx) in &inner.by_name {
            let node = &inner.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let g = match &node.grad {
                Some(g) => g.clone(),
                None => QTensor::zeros(node.value.shape().to_vec()),
            };
            out.insert(name.clone(), g);
        }
        out
    }

    /// Index and op label of the first node holding a non-finite value, used
    /// for loss-blowup diagnostics.
    pub fn first_non_finite(&self) -> Option<(usize, &'static str, Option<String>)> {
        let inner = self.inner.borrow();
        inner
            .nodes
            .iter()
            .enumerate()
            .find(|(_, n)| !n.value.is_finite())
            .map(|(i, n)| (i, n.op, n.name.clone()))
    }
}

impl<T: Real> Var<T> {
    /// Clones the node's value out of the tape (cheap: shared buffer).
    pub fn value(&self) -> QTensor<T> {
        self.tape.inner.borrow().nodes[self.idx].value.clone()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.tape.inner.borrow().nodes[self.idx].value.shape().to_vec()
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.inner.borrow().nodes[self.idx].requires_grad
    }

    pub fn tape(&self) -> Tape<T> {
        self.tape.clone()
    }

    pub(crate) fn same_tape(&self, other: &Var<T>) -> Result<()> {
        if Rc::ptr_eq(&self.tape.inner, &other.tape.inner) {
            Ok(())
        } else {
            Err(Error::Contract("operands recorded on different tapes".into()))
        }
    }
}
