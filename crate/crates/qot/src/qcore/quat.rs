//! Scalar quaternion arithmetic.
//!
//! Component order is (r, i, j, k) everywhere. The Hamilton product is
//! non-commutative; `left_matrix` and `right_matrix` give its two real 4x4
//! matrix representations, which the test oracles expand against.

use crate::qcore::real::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quaternion<T: Real> {
    pub r: T,
    pub i: T,
    pub j: T,
    pub k: T,
}

// Inherent add/sub mirror the tensor method API; operator overloading is
// deliberately not offered so every arithmetic call site names its op.
#[allow(clippy::should_implement_trait)]
impl<T: Real> Quaternion<T> {
    pub fn new(r: T, i: T, j: T, k: T) -> Self {
        Quaternion { r, i, j, k }
    }

    pub fn zero() -> Self {
        Quaternion::new(T::zero(), T::zero(), T::zero(), T::zero())
    }

    pub fn one() -> Self {
        Quaternion::new(T::one(), T::zero(), T::zero(), T::zero())
    }

    pub fn from_array(a: [T; 4]) -> Self {
        Quaternion::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(self) -> [T; 4] {
        [self.r, self.i, self.j, self.k]
    }

    pub fn conjugate(self) -> Self {
        Quaternion::new(self.r, -self.i, -self.j, -self.k)
    }

    pub fn norm_sq(self) -> T {
        self.r * self.r + self.i * self.i + self.j * self.j + self.k * self.k
    }

    pub fn norm(self) -> T {
        self.norm_sq().sqrt()
    }

    pub fn add(self, o: Self) -> Self {
        Quaternion::new(self.r + o.r, self.i + o.i, self.j + o.j, self.k + o.k)
    }

    pub fn sub(self, o: Self) -> Self {
        Quaternion::new(self.r - o.r, self.i - o.i, self.j - o.j, self.k - o.k)
    }

    pub fn scale(self, c: T) -> Self {
        Quaternion::new(self.r * c, self.i * c, self.j * c, self.k * c)
    }

    /// Hamilton product `self (x) o`.
    pub fn hamilton(self, o: Self) -> Self {
        let (ar, ai, aj, ak) = (self.r, self.i, self.j, self.k);
        let (br, bi, bj, bk) = (o.r, o.i, o.j, o.k);
        Quaternion::new(
            ar * br - ai * bi - aj * bj - ak * bk,
            ar * bi + ai * br + aj * bk - ak * bj,
            ar * bj - ai * bk + aj * br + ak * bi,
            ar * bk + ai * bj - aj * bi + ak * br,
        )
    }

    /// Real 4x4 matrix `L(q)` with `L(a) vec(b) = vec(a (x) b)`.
    /// Row-major rows over (r, i, j, k).
    pub fn left_matrix(self) -> [[T; 4]; 4] {
        let Quaternion { r, i, j, k } = self;
        [
            [r, -i, -j, -k],
            [i, r, -k, j],
            [j, k, r, -i],
            [k, -j, i, r],
        ]
    }

    /// Real 4x4 matrix `R(q)` with `R(b) vec(a) = vec(a (x) b)`.
    pub fn right_matrix(self) -> [[T; 4]; 4] {
        let Quaternion { r, i, j, k } = self;
        [
            [r, -i, -j, -k],
            [i, r, k, -j],
            [j, -k, r, i],
            [k, j, -i, r],
        ]
    }
}

/// `L(q) v` for a quaternion as a 4-vector.
pub fn mat4_apply<T: Real>(m: &[[T; 4]; 4], v: [T; 4]) -> [T; 4] {
    let mut out = [T::zero(); 4];
    for (row, slot) in m.iter().zip(out.iter_mut()) {
        *slot = row[0] * v[0] + row[1] * v[1] + row[2] * v[2] + row[3] * v[3];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(r: f64, i: f64, j: f64, k: f64) -> Quaternion<f64> {
        Quaternion::new(r, i, j, k)
    }

    #[test]
    fn identity_is_neutral() {
        let a = q(0.3, -1.2, 0.5, 2.0);
        assert_eq!(a.hamilton(Quaternion::one()), a);
        assert_eq!(Quaternion::one().hamilton(a), a);
    }

    #[test]
    fn basis_sign_table() {
        let i = q(0.0, 1.0, 0.0, 0.0);
        let j = q(0.0, 0.0, 1.0, 0.0);
        let k = q(0.0, 0.0, 0.0, 1.0);
        let neg_one = q(-1.0, 0.0, 0.0, 0.0);
        assert_eq!(i.hamilton(j), k);
        assert_eq!(j.hamilton(i), k.scale(-1.0));
        assert_eq!(j.hamilton(k), i);
        assert_eq!(k.hamilton(j), i.scale(-1.0));
        assert_eq!(k.hamilton(i), j);
        assert_eq!(i.hamilton(k), j.scale(-1.0));
        assert_eq!(i.hamilton(i), neg_one);
        assert_eq!(j.hamilton(j), neg_one);
        assert_eq!(k.hamilton(k), neg_one);
    }

    #[test]
    fn left_matrix_matches_product() {
        let a = q(0.7, -0.2, 1.5, 0.3);
        let b = q(-1.1, 0.4, 0.9, -2.0);
        let via_mat = mat4_apply(&a.left_matrix(), b.to_array());
        let direct = a.hamilton(b).to_array();
        for c in 0..4 {
            assert!((via_mat[c] - direct[c]).abs() < 1e-14);
        }
    }

    #[test]
    fn right_matrix_matches_product() {
        let a = q(0.7, -0.2, 1.5, 0.3);
        let b = q(-1.1, 0.4, 0.9, -2.0);
        let via_mat = mat4_apply(&b.right_matrix(), a.to_array());
        let direct = a.hamilton(b).to_array();
        for c in 0..4 {
            assert!((via_mat[c] - direct[c]).abs() < 1e-14);
        }
    }

    #[test]
    fn conjugation_reverses_products() {
        let a = q(0.7, -0.2, 1.5, 0.3);
        let b = q(-1.1, 0.4, 0.9, -2.0);
        let lhs = a.hamilton(b).conjugate();
        let rhs = b.conjugate().hamilton(a.conjugate());
        for (l, r) in lhs.to_array().iter().zip(rhs.to_array()) {
            assert!((l - r).abs() < 1e-14);
        }
    }

    #[test]
    fn norm_is_multiplicative() {
        let a = q(0.7, -0.2, 1.5, 0.3);
        let b = q(-1.1, 0.4, 0.9, -2.0);
        let prod = a.hamilton(b).norm();
        assert!((prod - a.norm() * b.norm()).abs() < 1e-12);
    }
}
