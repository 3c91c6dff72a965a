//! Quaternion-valued tensors.
//!
//! A `QuatTensor` wraps a real tensor whose trailing axis has extent 4 and
//! holds the (r, i, j, k) components of each quaternion entry interleaved.
//! `quat_shape` is the shape with that trailing axis dropped.

use crate::error::{Error, Result};
use crate::qcore::quat::Quaternion;
use crate::qcore::real::Real;
use crate::qcore::tensor::QTensor;

#[derive(Clone, Debug, PartialEq)]
pub struct QuatTensor<T: Real>(QTensor<T>);

impl<T: Real> QuatTensor<T> {
    pub fn new(inner: QTensor<T>) -> Result<Self> {
        match inner.shape().last() {
            Some(4) => Ok(QuatTensor(inner)),
            _ => Err(Error::shape(
                "quat_tensor",
                format!("trailing axis must be 4, got shape {:?}", inner.shape()),
            )),
        }
    }

    pub fn zeros(quat_shape: &[usize]) -> Self {
        let mut shape = quat_shape.to_vec();
        shape.push(4);
        QuatTensor(QTensor::zeros(shape))
    }

    /// Builds from flat quaternion entries evaluated in row-major order.
    pub fn from_fn(quat_shape: &[usize], mut f: impl FnMut(usize) -> Quaternion<T>) -> Self {
        let n: usize = quat_shape.iter().product();
        let mut data = Vec::with_capacity(n * 4);
        for idx in 0..n {
            data.extend_from_slice(&f(idx).to_array());
        }
        let mut shape = quat_shape.to_vec();
        shape.push(4);
        QuatTensor(QTensor::from_vec(shape, data).expect("from_fn length is deterministic"))
    }

    pub fn inner(&self) -> &QTensor<T> {
        &self.0
    }

    pub fn into_inner(self) -> QTensor<T> {
        self.0
    }

    /// Shape with the trailing component axis dropped.
    pub fn quat_shape(&self) -> &[usize] {
        let s = self.0.shape();
        &s[..s.len() - 1]
    }

    pub fn num_quats(&self) -> usize {
        self.0.len() / 4
    }

    pub fn get(&self, flat: usize) -> Quaternion<T> {
        let d = self.0.data();
        Quaternion::new(d[flat * 4], d[flat * 4 + 1], d[flat * 4 + 2], d[flat * 4 + 3])
    }

    /// Stacks four same-shaped real tensors into the component axis.
    pub fn from_components(
        r: &QTensor<T>,
        i: &QTensor<T>,
        j: &QTensor<T>,
        k: &QTensor<T>,
    ) -> Result<Self> {
        for (name, t) in [("i", i), ("j", j), ("k", k)] {
            if t.shape() != r.shape() {
                return Err(Error::shape(
                    "from_components",
                    format!("component {} shape {:?} differs from r {:?}", name, t.shape(), r.shape()),
                ));
            }
        }
        let n = r.len();
        let mut data = Vec::with_capacity(n * 4);
        let (rd, id, jd, kd) = (r.data(), i.data(), j.data(), k.data());
        for idx in 0..n {
            data.push(rd[idx]);
            data.push(id[idx]);
            data.push(jd[idx]);
            data.push(kd[idx]);
        }
        let mut shape = r.shape().to_vec();
        shape.push(4);
        Ok(QuatTensor(QTensor::from_vec(shape, data)?))
    }

    /// Extracts one component (0=r, 1=i, 2=j, 3=k) as a real tensor.
    pub fn component(&self, c: usize) -> QTensor<T> {
        assert!(c < 4, "component index {} out of range", c);
        let n = self.num_quats();
        let d = self.0.data();
        let data: Vec<T> = (0..n).map(|q| d[q * 4 + c]).collect();
        QTensor::from_vec(self.quat_shape().to_vec(), data).expect("component length matches")
    }

    pub fn conjugate(&self) -> Self {
        let d = self.0.data();
        let mut out = Vec::with_capacity(d.len());
        for q in d.chunks_exact(4) {
            out.push(q[0]);
            out.push(-q[1]);
            out.push(-q[2]);
            out.push(-q[3]);
        }
        QuatTensor(QTensor::from_vec(self.0.shape().to_vec(), out).expect("same length"))
    }

    /// Swaps the two leading axes of a rank-2 quaternion matrix `[m, n]`.
    pub fn transpose(&self) -> Result<Self> {
        if self.quat_shape().len() != 2 {
            return Err(Error::shape(
                "quat_transpose",
                format!("need quat matrix, got quat shape {:?}", self.quat_shape()),
            ));
        }
        Ok(QuatTensor(self.0.permute(&[1, 0, 2])?))
    }

    pub fn conj_transpose(&self) -> Result<Self> {
        self.conjugate().transpose()
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        Ok(QuatTensor(self.0.add(&other.0)?))
    }

    pub fn scale(&self, c: T) -> Self {
        QuatTensor(self.0.scale(c))
    }

    /// Hamilton product per paired entry; shapes must match.
    pub fn mul_elementwise(&self, other: &Self) -> Result<Self> {
        if self.0.shape() != other.0.shape() {
            return Err(Error::shape(
                "quat_mul_elementwise",
                format!("{:?} vs {:?}", self.0.shape(), other.0.shape()),
            ));
        }
        let a = self.0.data();
        let b = other.0.data();
        let mut out = Vec::with_capacity(a.len());
        for (qa, qb) in a.chunks_exact(4).zip(b.chunks_exact(4)) {
            let c = Quaternion::new(qa[0], qa[1], qa[2], qa[3])
                .hamilton(Quaternion::new(qb[0], qb[1], qb[2], qb[3]));
            out.extend_from_slice(&c.to_array());
        }
        Ok(QuatTensor(QTensor::from_vec(self.0.shape().to_vec(), out)?))
    }

    /// Quaternion matrix product: `[m, n] x [n, p] -> [m, p]` with Hamilton
    /// products in place of scalar multiplies and componentwise sums.
    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        let (ls, rs) = (self.quat_shape(), rhs.quat_shape());
        if ls.len() != 2 || rs.len() != 2 || ls[1] != rs[0] {
            return Err(Error::shape(
                "quat_matmul",
                format!("{:?} x {:?}", ls, rs),
            ));
        }
        let (m, n) = (ls[0], ls[1]);
        let p = rs[1];
        let a = self.0.data();
        let b = rhs.0.data();
        let mut out = vec![T::zero(); m * p * 4];
        for i in 0..m {
            let c_row = &mut out[i * p * 4..(i + 1) * p * 4];
            for k in 0..n {
                let qa = Quaternion::new(
                    a[(i * n + k) * 4],
                    a[(i * n + k) * 4 + 1],
                    a[(i * n + k) * 4 + 2],
                    a[(i * n + k) * 4 + 3],
                );
                let b_row = &b[k * p * 4..(k + 1) * p * 4];
                for (c, qb) in c_row.chunks_exact_mut(4).zip(b_row.chunks_exact(4)) {
                    let prod = qa.hamilton(Quaternion::new(qb[0], qb[1], qb[2], qb[3]));
                    c[0] = c[0] + prod.r;
                    c[1] = c[1] + prod.i;
                    c[2] = c[2] + prod.j;
                    c[3] = c[3] + prod.k;
                }
            }
        }
        Ok(QuatTensor(QTensor::from_vec(vec![m, p, 4], out)?))
    }
}
