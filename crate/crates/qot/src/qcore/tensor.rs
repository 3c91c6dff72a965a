//! Dense row-major real tensor, the universal value carrier.
//!
//! Values are immutable once constructed; the element buffer is shared via
//! `Arc`, so clones are cheap and safe to hand across threads.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::qcore::real::Real;

/// Dense multi-dimensional array of reals in row-major order.
///
/// A scalar is the rank-0 tensor (empty shape, one element).
#[derive(Clone, Debug, PartialEq)]
pub struct QTensor<T: Real> {
    shape: Vec<usize>,
    data: Arc<[T]>,
}

impl<T: Real> QTensor<T> {
    pub fn from_vec(shape: impl Into<Vec<usize>>, data: Vec<T>) -> Result<Self> {
        let shape = shape.into();
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::shape(
                "from_vec",
                format!("shape {:?} wants {} elements, got {}", shape, expected, data.len()),
            ));
        }
        Ok(QTensor {
            shape,
            data: data.into(),
        })
    }

    pub fn zeros(shape: impl Into<Vec<usize>>) -> Self {
        let shape = shape.into();
        let n: usize = shape.iter().product();
        QTensor {
            shape,
            data: vec![T::zero(); n].into(),
        }
    }

    pub fn full(shape: impl Into<Vec<usize>>, value: T) -> Self {
        let shape = shape.into();
        let n: usize = shape.iter().product();
        QTensor {
            shape,
            data: vec![value; n].into(),
        }
    }

    pub fn scalar(value: T) -> Self {
        QTensor {
            shape: vec![],
            data: vec![value].into(),
        }
    }

    /// Builds a tensor by evaluating `f` on each flat (row-major) index.
    pub fn from_fn(shape: impl Into<Vec<usize>>, f: impl FnMut(usize) -> T) -> Self {
        let shape = shape.into();
        let n: usize = shape.iter().product();
        QTensor {
            shape,
            data: (0..n).map(f).collect::<Vec<_>>().into(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    /// The single element of a one-element tensor.
    pub fn item(&self) -> T {
        assert_eq!(self.data.len(), 1, "item() on tensor with {} elements", self.data.len());
        self.data[0]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Element at a full multi-index.
    pub fn get(&self, idx: &[usize]) -> T {
        assert_eq!(idx.len(), self.shape.len(), "index rank {} vs tensor rank {}", idx.len(), self.shape.len());
        let flat: usize = idx
            .iter()
            .zip(self.strides())
            .zip(&self.shape)
            .map(|((i, s), extent)| {
                assert!(i < extent, "index {i} out of bounds for extent {extent}");
                i * s
            })
            .sum();
        self.data[flat]
    }

    /// Row-major strides for the current shape.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1usize; self.shape.len()];
        for axis in (0..self.shape.len().saturating_sub(1)).rev() {
            strides[axis] = strides[axis + 1] * self.shape[axis + 1];
        }
        strides
    }

    pub fn reshape(&self, shape: impl Into<Vec<usize>>) -> Result<Self> {
        let shape = shape.into();
        let n: usize = shape.iter().product();
        if n != self.data.len() {
            return Err(Error::shape(
                "reshape",
                format!("cannot reshape {:?} ({} elems) to {:?} ({} elems)",
                    self.shape, self.data.len(), shape, n),
            ));
        }
        Ok(QTensor {
            shape,
            data: self.data.clone(),
        })
    }

    /// Reorders axes: output axis `i` is input axis `axes[i]`.
    pub fn permute(&self, axes: &[usize]) -> Result<Self> {
        if axes.len() != self.rank() {
            return Err(Error::shape(
                "permute",
                format!("{} axes given for rank-{} tensor {:?}", axes.len(), self.rank(), self.shape),
            ));
        }
        let mut seen = vec![false; axes.len()];
        for &a in axes {
            if a >= axes.len() || seen[a] {
                return Err(Error::shape("permute", format!("invalid axis list {:?}", axes)));
            }
            seen[a] = true;
        }
        let in_strides = self.strides();
        let out_shape: Vec<usize> = axes.iter().map(|&a| self.shape[a]).collect();
        let out_strides_in: Vec<usize> = axes.iter().map(|&a| in_strides[a]).collect();
        let n = self.data.len();
        let mut out = vec![T::zero(); n];
        // Walk output positions in row-major order, tracking the input offset.
        let mut idx = vec![0usize; out_shape.len()];
        let mut src = 0usize;
        for slot in out.iter_mut() {
            *slot = self.data[src];
            for axis in (0..out_shape.len()).rev() {
                idx[axis] += 1;
                src += out_strides_in[axis];
                if idx[axis] < out_shape[axis] {
                    break;
                }
                src -= out_strides_in[axis] * out_shape[axis];
                idx[axis] = 0;
            }
        }
        Ok(QTensor {
            shape: out_shape,
            data: out.into(),
        })
    }

    /// Concatenates tensors along `axis`. All other extents must agree.
    pub fn concat(parts: &[&QTensor<T>], axis: usize) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::Contract("concat of zero tensors".into()))?;
        let rank = first.rank();
        if axis >= rank {
            return Err(Error::shape("concat", format!("axis {} out of range for rank {}", axis, rank)));
        }
        let mut axis_total = 0usize;
        for p in parts {
            if p.rank() != rank {
                return Err(Error::shape("concat", format!("rank mismatch: {:?} vs {:?}", first.shape, p.shape)));
            }
            for d in 0..rank {
                if d != axis && p.shape[d] != first.shape[d] {
                    return Err(Error::shape(
                        "concat",
                        format!("extent mismatch on axis {}: {:?} vs {:?}", d, first.shape, p.shape),
                    ));
                }
            }
            axis_total += p.shape[axis];
        }
        let mut out_shape = first.shape.clone();
        out_shape[axis] = axis_total;

        let outer: usize = first.shape[..axis].iter().product();
        let inner: usize = first.shape[axis + 1..].iter().product();
        let mut out = Vec::with_capacity(outer * axis_total * inner);
        for o in 0..outer {
            for p in parts {
                let rows = p.shape[axis];
                let start = o * rows * inner;
                out.extend_from_slice(&p.data[start..start + rows * inner]);
            }
        }
        Ok(QTensor {
            shape: out_shape,
            data: out.into(),
        })
    }

    /// Splits along `axis` into chunks of the given sizes (must sum to the extent).
    pub fn split(&self, axis: usize, sizes: &[usize]) -> Result<Vec<Self>> {
        if axis >= self.rank() {
            return Err(Error::shape("split", format!("axis {} out of range for rank {}", axis, self.rank())));
        }
        let total: usize = sizes.iter().sum();
        if total != self.shape[axis] {
            return Err(Error::shape(
                "split",
                format!("sizes {:?} sum to {}, axis extent is {}", sizes, total, self.shape[axis]),
            ));
        }
        let outer: usize = self.shape[..axis].iter().product();
        let inner: usize = self.shape[axis + 1..].iter().product();
        let axis_len = self.shape[axis];
        let mut parts = Vec::with_capacity(sizes.len());
        let mut offset = 0usize;
        for &sz in sizes {
            let mut shape = self.shape.clone();
            shape[axis] = sz;
            let mut data = Vec::with_capacity(outer * sz * inner);
            for o in 0..outer {
                let start = (o * axis_len + offset) * inner;
                data.extend_from_slice(&self.data[start..start + sz * inner]);
            }
            parts.push(QTensor { shape, data: data.into() });
            offset += sz;
        }
        Ok(parts)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        QTensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect::<Vec<_>>().into(),
        }
    }

    pub fn zip(&self, other: &Self, op: &'static str, f: impl Fn(T, T) -> T) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::shape(op, format!("{:?} vs {:?}", self.shape, other.shape)));
        }
        Ok(QTensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(other.data.iter())
                .map(|(&a, &b)| f(a, b))
                .collect::<Vec<_>>()
                .into(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip(other, "sub", |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip(other, "mul", |a, b| a * b)
    }

    pub fn scale(&self, c: T) -> Self {
        self.map(|v| v * c)
    }

    pub fn neg(&self) -> Self {
        self.map(|v| -v)
    }

    pub fn sum(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &v| acc + v)
    }

    /// Sums out one axis, reducing the rank by one.
    pub fn sum_axis(&self, axis: usize) -> Result<Self> {
        if axis >= self.rank() {
            return Err(Error::shape("sum_axis", format!("axis {} out of range for rank {}", axis, self.rank())));
        }
        let outer: usize = self.shape[..axis].iter().product();
        let mid = self.shape[axis];
        let inner: usize = self.shape[axis + 1..].iter().product();
        let mut out = vec![T::zero(); outer * inner];
        for o in 0..outer {
            for m in 0..mid {
                let base = (o * mid + m) * inner;
                let dst = &mut out[o * inner..(o + 1) * inner];
                for (d, s) in dst.iter_mut().zip(&self.data[base..base + inner]) {
                    *d = *d + *s;
                }
            }
        }
        let mut shape = self.shape.clone();
        shape.remove(axis);
        Ok(QTensor { shape, data: out.into() })
    }

    /// Real matrix product: `[m,n] x [n,p] -> [m,p]`.
    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.rank() != 2 || rhs.rank() != 2 || self.shape[1] != rhs.shape[0] {
            return Err(Error::shape(
                "matmul",
                format!("{:?} x {:?}", self.shape, rhs.shape),
            ));
        }
        let (m, n) = (self.shape[0], self.shape[1]);
        let p = rhs.shape[1];
        let mut out = vec![T::zero(); m * p];
        for i in 0..m {
            let a_row = &self.data[i * n..(i + 1) * n];
            let c_row = &mut out[i * p..(i + 1) * p];
            for (k, &a_ik) in a_row.iter().enumerate() {
                let b_row = &rhs.data[k * p..(k + 1) * p];
                for (c, &b) in c_row.iter_mut().zip(b_row) {
                    *c = *c + a_ik * b;
                }
            }
        }
        QTensor::from_vec(vec![m, p], out)
    }

    pub fn transpose2d(&self) -> Result<Self> {
        self.permute(&[1, 0])
    }

    /// Lossy conversion through f64 (exact for f32 -> f64).
    pub fn cast<U: Real>(&self) -> QTensor<U> {
        QTensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .map(|&v| U::from_f64(v.to_f64()))
                .collect::<Vec<_>>()
                .into(),
        }
    }

    /// Max |a - b| over all elements; shapes must match.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        assert_eq!(self.shape, other.shape, "max_abs_diff shape mismatch");
        self.data
            .iter()
            .zip(other.data.iter())
            .fold(T::zero(), |acc, (&a, &b)| acc.max((a - b).abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_len_agree() {
        let t = QTensor::<f64>::zeros(vec![2, 3, 4]);
        assert_eq!(t.len(), 24);
        assert_eq!(t.shape(), &[2, 3, 4]);
    }

    #[test]
    fn from_vec_rejects_bad_length() {
        assert!(QTensor::<f64>::from_vec(vec![2, 2], vec![1.0; 3]).is_err());
    }

    #[test]
    fn reshape_preserves_data_and_count() {
        let t = QTensor::from_vec(vec![2, 3], (0..6).map(|v| v as f64).collect()).unwrap();
        let r = t.reshape(vec![3, 2]).unwrap();
        assert_eq!(r.data(), t.data());
        assert!(t.reshape(vec![4, 2]).is_err());
    }

    #[test]
    fn permute_transposes() {
        let t = QTensor::from_vec(vec![2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let p = t.permute(&[1, 0]).unwrap();
        assert_eq!(p.shape(), &[3, 2]);
        assert_eq!(p.data(), &[1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
        // permuting back is the identity
        assert_eq!(p.permute(&[1, 0]).unwrap(), t);
    }

    #[test]
    fn permute_roundtrip_rank3() {
        let t = QTensor::from_fn(vec![2, 3, 4], |i| i as f64);
        let p = t.permute(&[2, 0, 1]).unwrap();
        assert_eq!(p.shape(), &[4, 2, 3]);
        let back = p.permute(&[1, 2, 0]).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn concat_then_split_roundtrips() {
        let a = QTensor::from_fn(vec![2, 2], |i| i as f64);
        let b = QTensor::from_fn(vec![2, 3], |i| 10.0 + i as f64);
        let c = QTensor::concat(&[&a, &b], 1).unwrap();
        assert_eq!(c.shape(), &[2, 5]);
        let parts = c.split(1, &[2, 3]).unwrap();
        assert_eq!(parts[0], a);
        assert_eq!(parts[1], b);
    }

    #[test]
    fn add_then_sub_is_identity() {
        let a = QTensor::from_fn(vec![3, 3], |i| (i as f64) * 0.37 - 1.0);
        let b = QTensor::from_fn(vec![3, 3], |i| (i as f64).sin());
        let round = a.add(&b).unwrap().sub(&b).unwrap();
        assert!(round.max_abs_diff(&a) < 1e-12);
    }

    #[test]
    fn matmul_small_known() {
        let a = QTensor::from_vec(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = QTensor::from_vec(vec![2, 2], vec![5.0, 6.0, 7.0, 8.0]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.data(), &[19.0, 22.0, 43.0, 50.0]);
        assert!(a.matmul(&QTensor::zeros(vec![3, 2])).is_err());
    }

    #[test]
    fn sum_axis_matches_manual() {
        let t = QTensor::from_fn(vec![2, 3], |i| i as f64);
        let s0 = t.sum_axis(0).unwrap();
        assert_eq!(s0.data(), &[3.0, 5.0, 7.0]);
        let s1 = t.sum_axis(1).unwrap();
        assert_eq!(s1.data(), &[3.0, 12.0]);
    }

    #[test]
    fn scalar_is_rank_zero() {
        let s = QTensor::scalar(2.5f64);
        assert_eq!(s.rank(), 0);
        assert_eq!(s.item(), 2.5);
        assert!(s.is_scalar());
    }
}
