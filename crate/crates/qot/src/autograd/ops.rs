//! Elementwise, shape, reduction, and matrix ops on tape variables.
//!
//! Every op records its backward rule as a closure over cheaply-cloned
//! input values. Ops whose inputs all have `requires_grad == false` record
//! no closure, so inference passes pay no graph cost beyond values.

use crate::error::{Error, Result};
use crate::qcore::{QTensor, QuatTensor, Real};

use super::tape::{BackwardFn, Var};

/// Repeats `g` (shape = `shape` minus `axis`) along `axis`, the adjoint of
/// `sum_axis`.
fn expand_axis<T: Real>(g: &QTensor<T>, shape: &[usize], axis: usize) -> QTensor<T> {
    let outer: usize = shape[..axis].iter().product();
    let mid = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    let src = g.data();
    let mut out = Vec::with_capacity(outer * mid * inner);
    for o in 0..outer {
        let row = &src[o * inner..(o + 1) * inner];
        for _ in 0..mid {
            out.extend_from_slice(row);
        }
    }
    QTensor::from_vec(shape.to_vec(), out).expect("expand_axis length")
}

fn inverse_axes(axes: &[usize]) -> Vec<usize> {
    let mut inv = vec![0usize; axes.len()];
    for (i, &a) in axes.iter().enumerate() {
        inv[a] = i;
    }
    inv
}

fn as_quat<T: Real>(t: &QTensor<T>, op: &'static str) -> Result<QuatTensor<T>> {
    QuatTensor::new(t.clone()).map_err(|_| {
        Error::shape(op, format!("expected trailing component axis 4, got {:?}", t.shape()))
    })
}

impl<T: Real> Var<T> {
    fn unary(
        &self,
        op: &'static str,
        value: QTensor<T>,
        back: impl Fn(&QTensor<T>) -> QTensor<T> + 'static,
    ) -> Var<T> {
        let rg = self.requires_grad();
        let idx = self.idx;
        let backward: Option<BackwardFn<T>> =
            if rg { Some(Box::new(move |g| vec![(idx, back(g))])) } else { None };
        self.tape.push(value, rg, backward, op, None)
    }

    pub fn add(&self, other: &Var<T>) -> Result<Var<T>> {
        self.same_tape(other)?;
        let value = self.value().add(&other.value())?;
        let (ia, ib) = (self.idx, other.idx);
        let (ra, rb) = (self.requires_grad(), other.requires_grad());
        let backward: Option<BackwardFn<T>> = if ra || rb {
            Some(Box::new(move |g| {
                let mut out = Vec::new();
                if ra {
                    out.push((ia, g.clone()));
                }
                if rb {
                    out.push((ib, g.clone()));
                }
                out
            }))
        } else {
            None
        };
        Ok(self.tape.push(value, ra || rb, backward, "add", None))
    }

    pub fn sub(&self, other: &Var<T>) -> Result<Var<T>> {
        self.same_tape(other)?;
        let value = self.value().sub(&other.value())?;
        let (ia, ib) = (self.idx, other.idx);
        let (ra, rb) = (self.requires_grad(), other.requires_grad());
        let backward: Option<BackwardFn<T>> = if ra || rb {
            Some(Box::new(move |g| {
                let mut out = Vec::new();
                if ra {
                    out.push((ia, g.clone()));
                }
                if rb {
                    out.push((ib, g.neg()));
                }
                out
            }))
        } else {
            None
        };
        Ok(self.tape.push(value, ra || rb, backward, "sub", None))
    }

    /// Elementwise product; both operands same shape.
    pub fn mul(&self, other: &Var<T>) -> Result<Var<T>> {
        self.same_tape(other)?;
        let (av, bv) = (self.value(), other.value());
        let value = av.mul(&bv)?;
        let (ia, ib) = (self.idx, other.idx);
        let (ra, rb) = (self.requires_grad(), other.requires_grad());
        let backward: Option<BackwardFn<T>> = if ra || rb {
            Some(Box::new(move |g| {
                let mut out = Vec::new();
                if ra {
                    out.push((ia, g.mul(&bv).expect("mul backward shape")));
                }
                if rb {
                    out.push((ib, g.mul(&av).expect("mul backward shape")));
                }
                out
            }))
        } else {
            None
        };
        Ok(self.tape.push(value, ra || rb, backward, "mul", None))
    }

    /// Elementwise quotient; both operands same shape.
    pub fn div(&self, other: &Var<T>) -> Result<Var<T>> {
        self.same_tape(other)?;
        let (av, bv) = (self.value(), other.value());
        let value = av.zip(&bv, "div", |a, b| a / b)?;
        let (ia, ib) = (self.idx, other.idx);
        let (ra, rb) = (self.requires_grad(), other.requires_grad());
        let backward: Option<BackwardFn<T>> = if ra || rb {
            Some(Box::new(move |g| {
                let mut out = Vec::new();
                if ra {
                    out.push((ia, g.zip(&bv, "div", |g, b| g / b).expect("shape")));
                }
                if rb {
                    let ga = g.mul(&av).expect("shape");
                    out.push((ib, ga.zip(&bv, "div", |n, b| -n / (b * b)).expect("shape")));
                }
                out
            }))
        } else {
            None
        };
        Ok(self.tape.push(value, ra || rb, backward, "div", None))
    }

    pub fn neg(&self) -> Var<T> {
        self.unary("neg", self.value().neg(), |g| g.neg())
    }

    pub fn scale(&self, c: T) -> Var<T> {
        self.unary("scale", self.value().scale(c), move |g| g.scale(c))
    }

    /// Elementwise |x|; subgradient 0 at the kink.
    pub fn abs(&self) -> Var<T> {
        let xv = self.value();
        self.unary("abs", xv.map(|v| v.abs()), move |g| {
            g.zip(&xv, "abs", |g, x| {
                if x > T::zero() {
                    g
                } else if x < T::zero() {
                    -g
                } else {
                    T::zero()
                }
            })
            .expect("shape")
        })
    }

    pub fn sqrt(&self) -> Var<T> {
        let out = self.value().map(|v| v.sqrt());
        let saved = out.clone();
        let half = T::from_f64(0.5);
        self.unary("sqrt", out, move |g| {
            g.zip(&saved, "sqrt", |g, s| g * half / s).expect("shape")
        })
    }

    /// Sum of all elements, as a rank-0 scalar.
    pub fn sum(&self) -> Var<T> {
        let shape = self.value().shape().to_vec();
        let value = QTensor::scalar(self.value().sum());
        self.unary("sum", value, move |g| QTensor::full(shape.clone(), g.item()))
    }

    pub fn mean(&self) -> Var<T> {
        let n = self.value().len();
        self.sum().scale(T::from_f64(1.0 / n as f64))
    }

    pub fn sum_axis(&self, axis: usize) -> Result<Var<T>> {
        let xv = self.value();
        let value = xv.sum_axis(axis)?;
        let shape = xv.shape().to_vec();
        Ok(self.unary("sum_axis", value, move |g| expand_axis(g, &shape, axis)))
    }

    pub fn reshape(&self, shape: impl Into<Vec<usize>>) -> Result<Var<T>> {
        let old = self.value().shape().to_vec();
        let value = self.value().reshape(shape)?;
        Ok(self.unary("reshape", value, move |g| {
            g.reshape(old.clone()).expect("reshape backward")
        }))
    }

    pub fn permute(&self, axes: &[usize]) -> Result<Var<T>> {
        let value = self.value().permute(axes)?;
        let inv = inverse_axes(axes);
        Ok(self.unary("permute", value, move |g| {
            g.permute(&inv).expect("permute backward")
        }))
    }

    /// Concatenation along `axis`; the backward rule splits the gradient.
    pub fn concat(parts: &[Var<T>], axis: usize) -> Result<Var<T>> {
        let first = parts.first().ok_or_else(|| Error::Contract("concat of zero vars".into()))?;
        for p in parts {
            first.same_tape(p)?;
        }
        let values: Vec<QTensor<T>> = parts.iter().map(|p| p.value()).collect();
        let refs: Vec<&QTensor<T>> = values.iter().collect();
        let value = QTensor::concat(&refs, axis)?;
        let rg = parts.iter().any(|p| p.requires_grad());
        let meta: Vec<(usize, usize, bool)> = parts
            .iter()
            .zip(&values)
            .map(|(p, v)| (p.idx, v.shape()[axis], p.requires_grad()))
            .collect();
        let backward: Option<BackwardFn<T>> = if rg {
            Some(Box::new(move |g| {
                let sizes: Vec<usize> = meta.iter().map(|m| m.1).collect();
                let pieces = g.split(axis, &sizes).expect("concat backward split");
                meta.iter()
                    .zip(pieces)
                    .filter(|(m, _)| m.2)
                    .map(|(m, piece)| (m.0, piece))
                    .collect()
            }))
        } else {
            None
        };
        Ok(first.tape.push(value, rg, backward, "concat", None))
    }

    /// Real 2-D matrix product.
    pub fn matmul(&self, other: &Var<T>) -> Result<Var<T>> {
        self.same_tape(other)?;
        let (av, bv) = (self.value(), other.value());
        let value = av.matmul(&bv)?;
        let (ia, ib) = (self.idx, other.idx);
        let (ra, rb) = (self.requires_grad(), other.requires_grad());
        let backward: Option<BackwardFn<T>> = if ra || rb {
            Some(Box::new(move |g| {
                let mut out = Vec::new();
                if ra {
                    let bt = bv.transpose2d().expect("shape");
                    out.push((ia, g.matmul(&bt).expect("matmul backward")));
                }
                if rb {
                    let at = av.transpose2d().expect("shape");
                    out.push((ib, at.matmul(g).expect("matmul backward")));
                }
                out
            }))
        } else {
            None
        };
        Ok(self.tape.push(value, ra || rb, backward, "matmul", None))
    }

    /// Quaternion matrix product on `[m,n,4] x [n,p,4]`.
    ///
    /// Backward uses the conjugate-transpose rules
    /// `dA = G B^H`, `dB = A^H G`, which the finite-difference suite
    /// certifies component-wise.
    pub fn quat_matmul(&self, other: &Var<T>) -> Result<Var<T>> {
        self.same_tape(other)?;
        let a = as_quat(&self.value(), "quat_matmul")?;
        let b = as_quat(&other.value(), "quat_matmul")?;
        let value = a.matmul(&b)?.into_inner();
        let (ia, ib) = (self.idx, other.idx);
        let (ra, rb) = (self.requires_grad(), other.requires_grad());
        let backward: Option<BackwardFn<T>> = if ra || rb {
            Some(Box::new(move |g| {
                let gq = QuatTensor::new(g.clone()).expect("grad shape");
                let mut out = Vec::new();
                if ra {
                    let bh = b.conj_transpose().expect("shape");
                    out.push((ia, gq.matmul(&bh).expect("quat_matmul backward").into_inner()));
                }
                if rb {
                    let ah = a.conj_transpose().expect("shape");
                    out.push((ib, ah.matmul(&gq).expect("quat_matmul backward").into_inner()));
                }
                out
            }))
        } else {
            None
        };
        Ok(self.tape.push(value, ra || rb, backward, "quat_matmul", None))
    }

    /// Quaternion conjugate on the trailing component axis. Linear, and its
    /// own adjoint.
    pub fn conjugate(&self) -> Result<Var<T>> {
        let q = as_quat(&self.value(), "conjugate")?;
        let value = q.conjugate().into_inner();
        Ok(self.unary("conjugate", value, |g| {
            QuatTensor::new(g.clone()).expect("grad shape").conjugate().into_inner()
        }))
    }

    /// Adds a trailing-suffix-shaped bias, broadcast over leading axes.
    pub fn add_bias(&self, bias: &Var<T>) -> Result<Var<T>> {
        self.same_tape(bias)?;
        let xv = self.value();
        let bv = bias.value();
        let xs = xv.shape();
        let bs = bv.shape();
        if bs.len() > xs.len() || &xs[xs.len() - bs.len()..] != bs {
            return Err(Error::shape(
                "add_bias",
                format!("bias {:?} is not a trailing suffix of {:?}", bs, xs),
            ));
        }
        let chunk = bv.len().max(1);
        let bd = bv.data().to_vec();
        let mut out = Vec::with_capacity(xv.len());
        for block in xv.data().chunks_exact(chunk) {
            out.extend(block.iter().zip(&bd).map(|(&x, &b)| x + b));
        }
        let value = QTensor::from_vec(xs.to_vec(), out)?;
        let (ix, ib) = (self.idx, bias.idx);
        let (rx, rb) = (self.requires_grad(), bias.requires_grad());
        let b_shape = bs.to_vec();
        let backward: Option<BackwardFn<T>> = if rx || rb {
            Some(Box::new(move |g| {
                let mut out = Vec::new();
                if rx {
                    out.push((ix, g.clone()));
                }
                if rb {
                    let chunk: usize = b_shape.iter().product::<usize>().max(1);
                    let mut acc = vec![T::zero(); chunk];
                    for block in g.data().chunks_exact(chunk) {
                        for (a, &v) in acc.iter_mut().zip(block) {
                            *a = *a + v;
                        }
                    }
                    out.push((ib, QTensor::from_vec(b_shape.clone(), acc).expect("bias grad")));
                }
                out
            }))
        } else {
            None
        };
        Ok(self.tape.push(value, rx || rb, backward, "add_bias", None))
    }
}
