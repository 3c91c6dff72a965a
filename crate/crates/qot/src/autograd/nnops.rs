//! Fused neural-network ops: softmax, layer norm, GELU, cross-entropy, and
//! the two convolution kernels. Each bakes its analytic backward rule into
//! the tape; the finite-difference suite certifies all of them.

use crate::error::{Error, Result};
use crate::qcore::quat::Quaternion;
use crate::qcore::{QTensor, Real};

use super::tape::{BackwardFn, Var};

const LAYER_NORM_EPS: f64 = 1e-5;

fn axis_extents(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer: usize = shape[..axis].iter().product();
    let mid = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    (outer, mid, inner)
}

/// Max-subtracted softmax along `axis`, leaving all other axes independent.
fn softmax_values<T: Real>(x: &QTensor<T>, axis: usize) -> QTensor<T> {
    let (outer, mid, inner) = axis_extents(x.shape(), axis);
    let src = x.data();
    let mut out = vec![T::zero(); src.len()];
    for o in 0..outer {
        for i in 0..inner {
            let at = |m: usize| (o * mid + m) * inner + i;
            let mut mx = src[at(0)];
            for m in 1..mid {
                mx = mx.max(src[at(m)]);
            }
            let mut denom = T::zero();
            for m in 0..mid {
                let e = (src[at(m)] - mx).exp();
                out[at(m)] = e;
                denom = denom + e;
            }
            for m in 0..mid {
                out[at(m)] = out[at(m)] / denom;
            }
        }
    }
    QTensor::from_vec(x.shape().to_vec(), out).expect("softmax shape")
}

fn valid_conv_extent(input: usize, kernel: usize, stride: usize, pad: usize) -> Result<usize> {
    let padded = input + 2 * pad;
    if kernel == 0 || stride == 0 || padded < kernel {
        return Err(Error::shape(
            "conv2d",
            format!("kernel {} stride {} does not fit extent {} (pad {})", kernel, stride, input, pad),
        ));
    }
    Ok((padded - kernel) / stride + 1)
}

impl<T: Real> Var<T> {
    /// Softmax along `axis`; rows of every other axis are independent.
    pub fn softmax(&self, axis: usize) -> Result<Var<T>> {
        let xv = self.value();
        if axis >= xv.rank() {
            return Err(Error::shape(
                "softmax",
                format!("axis {} out of range for shape {:?}", axis, xv.shape()),
            ));
        }
        let value = softmax_values(&xv, axis);
        let saved = value.clone();
        let rg = self.requires_grad();
        let idx = self.idx;
        let backward: Option<BackwardFn<T>> = if rg {
            Some(Box::new(move |g| {
                // dx = s * (g - sum(g * s)) per softmax fiber
                let (outer, mid, inner) = axis_extents(saved.shape(), axis);
                let s = saved.data();
                let gd = g.data();
                let mut out = vec![T::zero(); s.len()];
                for o in 0..outer {
                    for i in 0..inner {
                        let at = |m: usize| (o * mid + m) * inner + i;
                        let mut dot = T::zero();
                        for m in 0..mid {
                            dot = dot + gd[at(m)] * s[at(m)];
                        }
                        for m in 0..mid {
                            out[at(m)] = s[at(m)] * (gd[at(m)] - dot);
                        }
                    }
                }
                vec![(idx, QTensor::from_vec(saved.shape().to_vec(), out).expect("shape"))]
            }))
        } else {
            None
        };
        Ok(self.tape.push(value, rg, backward, "softmax", None))
    }

    /// Layer normalization over the trailing `norm_rank` axes, jointly, with
    /// elementwise affine parameters of exactly that trailing shape.
    /// Epsilon 1e-5 sits inside the square root.
    pub fn layer_norm(&self, gamma: &Var<T>, beta: &Var<T>, norm_rank: usize) -> Result<Var<T>> {
        self.same_tape(gamma)?;
        self.same_tape(beta)?;
        let xv = self.value();
        let gv = gamma.value();
        let bv = beta.value();
        let xs = xv.shape();
        if norm_rank == 0 || norm_rank > xs.len() {
            return Err(Error::shape(
                "layer_norm",
                format!("norm rank {} invalid for shape {:?}", norm_rank, xs),
            ));
        }
        let norm_shape = &xs[xs.len() - norm_rank..];
        if gv.shape() != norm_shape || bv.shape() != norm_shape {
            return Err(Error::shape(
                "layer_norm",
                format!(
                    "affine shapes {:?}/{:?} must equal normalized shape {:?}",
                    gv.shape(),
                    bv.shape(),
                    norm_shape
                ),
            ));
        }
        let d: usize = norm_shape.iter().product();
        let lead = xv.len() / d;
        let eps = T::from_f64(LAYER_NORM_EPS);
        let inv_d = T::from_f64(1.0 / d as f64);

        let src = xv.data();
        let gd = gv.data();
        let bd = bv.data();
        let mut y = vec![T::zero(); src.len()];
        let mut out = vec![T::zero(); src.len()];
        let mut rstds = vec![T::zero(); lead];
        for row in 0..lead {
            let x_row = &src[row * d..(row + 1) * d];
            let mut mu = T::zero();
            for &v in x_row {
                mu = mu + v;
            }
            mu = mu * inv_d;
            let mut var = T::zero();
            for &v in x_row {
                let c = v - mu;
                var = var + c * c;
            }
            var = var * inv_d;
            let rstd = T::one() / (var + eps).sqrt();
            rstds[row] = rstd;
            for (c, &v) in x_row.iter().enumerate() {
                let yy = (v - mu) * rstd;
                y[row * d + c] = yy;
                out[row * d + c] = yy * gd[c] + bd[c];
            }
        }
        let value = QTensor::from_vec(xs.to_vec(), out)?;
        let y_saved = QTensor::from_vec(xs.to_vec(), y)?;
        let (ix, ig, ib) = (self.idx, gamma.idx, beta.idx);
        let (rx, rgm, rb) = (self.requires_grad(), gamma.requires_grad(), beta.requires_grad());
        let rg = rx || rgm || rb;
        let norm_shape = norm_shape.to_vec();
        let backward: Option<BackwardFn<T>> = if rg {
            Some(Box::new(move |g| {
                let gd_up = g.data();
                let yv = y_saved.data();
                let gamma_d = gv.data();
                let mut contributions = Vec::new();
                if rx {
                    let mut dx = vec![T::zero(); yv.len()];
                    for row in 0..lead {
                        let base = row * d;
                        let mut mean_h = T::zero();
                        let mut mean_hy = T::zero();
                        for c in 0..d {
                            let h = gd_up[base + c] * gamma_d[c];
                            mean_h = mean_h + h;
                            mean_hy = mean_hy + h * yv[base + c];
                        }
                        mean_h = mean_h * inv_d;
                        mean_hy = mean_hy * inv_d;
                        for c in 0..d {
                            let h = gd_up[base + c] * gamma_d[c];
                            dx[base + c] = rstds[row] * (h - mean_h - yv[base + c] * mean_hy);
                        }
                    }
                    contributions
                        .push((ix, QTensor::from_vec(y_saved.shape().to_vec(), dx).expect("shape")));
                }
                if rgm {
                    let mut dg = vec![T::zero(); d];
                    for row in 0..lead {
                        for c in 0..d {
                            dg[c] = dg[c] + gd_up[row * d + c] * yv[row * d + c];
                        }
                    }
                    contributions
                        .push((ig, QTensor::from_vec(norm_shape.clone(), dg).expect("shape")));
                }
                if rb {
                    let mut db = vec![T::zero(); d];
                    for row in 0..lead {
                        for c in 0..d {
                            db[c] = db[c] + gd_up[row * d + c];
                        }
                    }
                    contributions
                        .push((ib, QTensor::from_vec(norm_shape.clone(), db).expect("shape")));
                }
                contributions
            }))
        } else {
            None
        };
        Ok(self.tape.push(value, rg, backward, "layer_norm", None))
    }

    /// Exact GELU `x * Phi(x)` with the standard normal CDF via erf, applied
    /// to every real element independently.
    pub fn gelu(&self) -> Var<T> {
        let xv = self.value();
        let inv_sqrt2 = T::from_f64(std::f64::consts::FRAC_1_SQRT_2);
        let half = T::from_f64(0.5);
        let value = xv.map(|x| x * half * (T::one() + (x * inv_sqrt2).erf()));
        let rg = self.requires_grad();
        let idx = self.idx;
        let backward: Option<BackwardFn<T>> = if rg {
            let inv_sqrt_2pi = T::from_f64(1.0 / (2.0 * std::f64::consts::PI).sqrt());
            Some(Box::new(move |g| {
                let dx = g
                    .zip(&xv, "gelu", |g, x| {
                        let phi_cdf = half * (T::one() + (x * inv_sqrt2).erf());
                        let pdf = inv_sqrt_2pi * (-half * x * x).exp();
                        g * (phi_cdf + x * pdf)
                    })
                    .expect("shape");
                vec![(idx, dx)]
            }))
        } else {
            None
        };
        self.tape.push(value, rg, backward, "gelu", None)
    }

    /// Mean negative log-softmax of the true class over a `[B, K]` logit
    /// batch, computed through a stable log-sum-exp.
    pub fn cross_entropy(&self, labels: &[usize]) -> Result<Var<T>> {
        let xv = self.value();
        let xs = xv.shape();
        if xs.len() != 2 {
            return Err(Error::shape(
                "cross_entropy",
                format!("logits must be [batch, classes], got {:?}", xs),
            ));
        }
        let (b, k) = (xs[0], xs[1]);
        if labels.len() != b {
            return Err(Error::Contract(format!(
                "cross_entropy: {} labels for batch of {}",
                labels.len(),
                b
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::Contract(format!(
                "cross_entropy: label {} out of range for {} classes",
                bad, k
            )));
        }
        let src = xv.data();
        let mut lses = vec![T::zero(); b];
        let mut total = T::zero();
        for row in 0..b {
            let r = &src[row * k..(row + 1) * k];
            let mx = r.iter().fold(r[0], |a, &v| a.max(v));
            let mut s = T::zero();
            for &v in r {
                s = s + (v - mx).exp();
            }
            let lse = mx + s.ln();
            lses[row] = lse;
            total = total + lse - r[labels[row]];
        }
        let inv_b = T::from_f64(1.0 / b as f64);
        let value = QTensor::scalar(total * inv_b);
        let rg = self.requires_grad();
        let idx = self.idx;
        let labels = labels.to_vec();
        let backward: Option<BackwardFn<T>> = if rg {
            Some(Box::new(move |g| {
                let gs = g.item();
                let src = xv.data();
                let mut dx = vec![T::zero(); src.len()];
                for row in 0..b {
                    for col in 0..k {
                        let p = (src[row * k + col] - lses[row]).exp();
                        let onehot = if labels[row] == col { T::one() } else { T::zero() };
                        dx[row * k + col] = gs * (p - onehot) * inv_b;
                    }
                }
                vec![(idx, QTensor::from_vec(vec![b, k], dx).expect("shape"))]
            }))
        } else {
            None
        };
        Ok(self.tape.push(value, rg, backward, "cross_entropy", None))
    }

    /// Real 2-D cross-correlation: input `[H, W, C_in]`, kernel
    /// `[kh, kw, C_in, C_out]`, output `[H', W', C_out]`. Bias is a separate
    /// `add_bias`.
    pub fn conv2d(&self, kernel: &Var<T>, stride: usize, pad: usize) -> Result<Var<T>> {
        self.same_tape(kernel)?;
        let xv = self.value();
        let wv = kernel.value();
        let (xs, ws) = (xv.shape().to_vec(), wv.shape().to_vec());
        if xs.len() != 3 || ws.len() != 4 || xs[2] != ws[2] {
            return Err(Error::shape(
                "conv2d",
                format!("input {:?} kernel {:?}", xs, ws),
            ));
        }
        let (h, w, c_in) = (xs[0], xs[1], xs[2]);
        let (kh, kw, c_out) = (ws[0], ws[1], ws[3]);
        let ho = valid_conv_extent(h, kh, stride, pad)?;
        let wo = valid_conv_extent(w, kw, stride, pad)?;

        let x = xv.data();
        let k = wv.data();
        let mut out = vec![T::zero(); ho * wo * c_out];
        for oy in 0..ho {
            for ox in 0..wo {
                let o_base = (oy * wo + ox) * c_out;
                for ky in 0..kh {
                    let iy = (oy * stride + ky) as isize - pad as isize;
                    if iy < 0 || iy as usize >= h {
                        continue;
                    }
                    for kx in 0..kw {
                        let ix = (ox * stride + kx) as isize - pad as isize;
                        if ix < 0 || ix as usize >= w {
                            continue;
                        }
                        let i_base = (iy as usize * w + ix as usize) * c_in;
                        let k_base = (ky * kw + kx) * c_in * c_out;
                        for ci in 0..c_in {
                            let a = x[i_base + ci];
                            let k_row = &k[k_base + ci * c_out..k_base + (ci + 1) * c_out];
                            let o_row = &mut out[o_base..o_base + c_out];
                            for (o, &kk) in o_row.iter_mut().zip(k_row) {
                                *o = *o + a * kk;
                            }
                        }
                    }
                }
            }
        }
        let value = QTensor::from_vec(vec![ho, wo, c_out], out)?;
        let (ix_idx, iw_idx) = (self.idx, kernel.idx);
        let (rx, rw) = (self.requires_grad(), kernel.requires_grad());
        let rg = rx || rw;
        let backward: Option<BackwardFn<T>> = if rg {
            Some(Box::new(move |g| {
                let gd = g.data();
                let x = xv.data();
                let k = wv.data();
                let mut dx = vec![T::zero(); x.len()];
                let mut dw = vec![T::zero(); k.len()];
                for oy in 0..ho {
                    for ox in 0..wo {
                        let o_base = (oy * wo + ox) * c_out;
                        for ky in 0..kh {
                            let iy = (oy * stride + ky) as isize - pad as isize;
                            if iy < 0 || iy as usize >= h {
                                continue;
                            }
                            for kx in 0..kw {
                                let ix = (ox * stride + kx) as isize - pad as isize;
                                if ix < 0 || ix as usize >= w {
                                    continue;
                                }
                                let i_base = (iy as usize * w + ix as usize) * c_in;
                                let k_base = (ky * kw + kx) * c_in * c_out;
                                for ci in 0..c_in {
                                    let a = x[i_base + ci];
                                    let mut acc = T::zero();
                                    for co in 0..c_out {
                                        let gv = gd[o_base + co];
                                        acc = acc + k[k_base + ci * c_out + co] * gv;
                                        if rw {
                                            dw[k_base + ci * c_out + co] =
                                                dw[k_base + ci * c_out + co] + a * gv;
                                        }
                                    }
                                    dx[i_base + ci] = dx[i_base + ci] + acc;
                                }
                            }
                        }
                    }
                }
                let mut outv = Vec::new();
                if rx {
                    outv.push((ix_idx, QTensor::from_vec(xs.clone(), dx).expect("shape")));
                }
                if rw {
                    outv.push((iw_idx, QTensor::from_vec(ws.clone(), dw).expect("shape")));
                }
                outv
            }))
        } else {
            None
        };
        Ok(self.tape.push(value, rg, backward, "conv2d", None))
    }

    /// Quaternion 2-D cross-correlation with Hamilton products: input
    /// `[H, W, C_in, 4]`, kernel `[kh, kw, C_in, C_out, 4]` (kernel entry on
    /// the left of each product), output `[H', W', C_out, 4]`.
    pub fn qconv2d(&self, kernel: &Var<T>, stride: usize, pad: usize) -> Result<Var<T>> {
        self.same_tape(kernel)?;
        let xv = self.value();
        let wv = kernel.value();
        let (xs, ws) = (xv.shape().to_vec(), wv.shape().to_vec());
        if xs.len() != 4 || ws.len() != 5 || xs[3] != 4 || ws[4] != 4 || xs[2] != ws[2] {
            return Err(Error::shape(
                "qconv2d",
                format!("input {:?} kernel {:?}", xs, ws),
            ));
        }
        let (h, w, c_in) = (xs[0], xs[1], xs[2]);
        let (kh, kw, c_out) = (ws[0], ws[1], ws[3]);
        let ho = valid_conv_extent(h, kh, stride, pad)?;
        let wo = valid_conv_extent(w, kw, stride, pad)?;

        let quat_at = |d: &[T], base: usize| Quaternion::new(d[base], d[base + 1], d[base + 2], d[base + 3]);
        let x = xv.data();
        let k = wv.data();
        let mut out = vec![T::zero(); ho * wo * c_out * 4];
        for oy in 0..ho {
            for ox in 0..wo {
                let o_base = (oy * wo + ox) * c_out * 4;
                for ky in 0..kh {
                    let iy = (oy * stride + ky) as isize - pad as isize;
                    if iy < 0 || iy as usize >= h {
                        continue;
                    }
                    for kx in 0..kw {
                        let ix = (ox * stride + kx) as isize - pad as isize;
                        if ix < 0 || ix as usize >= w {
                            continue;
                        }
                        let i_base = (iy as usize * w + ix as usize) * c_in * 4;
                        let k_base = (ky * kw + kx) * c_in * c_out * 4;
                        for ci in 0..c_in {
                            let qx = quat_at(x, i_base + ci * 4);
                            for co in 0..c_out {
                                let qw = quat_at(k, k_base + (ci * c_out + co) * 4);
                                let p = qw.hamilton(qx);
                                let o = o_base + co * 4;
                                out[o] = out[o] + p.r;
                                out[o + 1] = out[o + 1] + p.i;
                                out[o + 2] = out[o + 2] + p.j;
                                out[o + 3] = out[o + 3] + p.k;
                            }
                        }
                    }
                }
            }
        }
        let value = QTensor::from_vec(vec![ho, wo, c_out, 4], out)?;
        let (ix_idx, iw_idx) = (self.idx, kernel.idx);
        let (rx, rw) = (self.requires_grad(), kernel.requires_grad());
        let rg = rx || rw;
        let backward: Option<BackwardFn<T>> = if rg {
            Some(Box::new(move |g| {
                let gd = g.data();
                let x = xv.data();
                let k = wv.data();
                let mut dx = vec![T::zero(); x.len()];
                let mut dw = vec![T::zero(); k.len()];
                let quat_at =
                    |d: &[T], base: usize| Quaternion::new(d[base], d[base + 1], d[base + 2], d[base + 3]);
                let accum = |buf: &mut [T], base: usize, q: Quaternion<T>| {
                    buf[base] = buf[base] + q.r;
                    buf[base + 1] = buf[base + 1] + q.i;
                    buf[base + 2] = buf[base + 2] + q.j;
                    buf[base + 3] = buf[base + 3] + q.k;
                };
                for oy in 0..ho {
                    for ox in 0..wo {
                        let o_base = (oy * wo + ox) * c_out * 4;
                        for ky in 0..kh {
                            let iy = (oy * stride + ky) as isize - pad as isize;
                            if iy < 0 || iy as usize >= h {
                                continue;
                            }
                            for kx in 0..kw {
                                let ix = (ox * stride + kx) as isize - pad as isize;
                                if ix < 0 || ix as usize >= w {
                                    continue;
                                }
                                let i_base = (iy as usize * w + ix as usize) * c_in * 4;
                                let k_base = (ky * kw + kx) * c_in * c_out * 4;
                                for ci in 0..c_in {
                                    let qx = quat_at(x, i_base + ci * 4);
                                    for co in 0..c_out {
                                        let qw = quat_at(k, k_base + (ci * c_out + co) * 4);
                                        let qg = quat_at(gd, o_base + co * 4);
                                        // out = w (x) x, so dx gets conj(w) (x) g
                                        // and dw gets g (x) conj(x).
                                        if rx {
                                            accum(
                                                &mut dx,
                                                i_base + ci * 4,
                                                qw.conjugate().hamilton(qg),
                                            );
                                        }
                                        if rw {
                                            accum(
                                                &mut dw,
                                                k_base + (ci * c_out + co) * 4,
                                                qg.hamilton(qx.conjugate()),
                                            );
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                let mut outv = Vec::new();
                if rx {
                    outv.push((ix_idx, QTensor::from_vec(xs.clone(), dx).expect("shape")));
                }
                if rw {
                    outv.push((iw_idx, QTensor::from_vec(ws.clone(), dw).expect("shape")));
                }
                outv
            }))
        } else {
            None
        };
        Ok(self.tape.push(value, rg, backward, "qconv2d", None))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autograd::tape::Tape;

    #[test]
    fn softmax_rows_sum_to_one() {
        let tape = Tape::<f64>::new();
        let x = tape.constant(QTensor::from_fn(vec![3, 5], |i| (i as f64).sin() * 3.0));
        let s = x.softmax(1).unwrap().value();
        for row in 0..3 {
            let sum: f64 = s.data()[row * 5..(row + 1) * 5].iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_uniform_on_equal_inputs() {
        let tape = Tape::<f64>::new();
        let x = tape.constant(QTensor::full(vec![4], 2.5));
        let s = x.softmax(0).unwrap().value();
        for &v in s.data() {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_middle_axis_normalizes_fibers() {
        let tape = Tape::<f64>::new();
        let x = tape.constant(QTensor::from_fn(vec![2, 3, 4], |i| (i as f64) * 0.21 - 1.0));
        let s = x.softmax(1).unwrap().value();
        for o in 0..2 {
            for i in 0..4 {
                let sum: f64 = (0..3).map(|m| s.data()[(o * 3 + m) * 4 + i]).sum();
                assert!((sum - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn layer_norm_constant_input_maps_to_beta() {
        let tape = Tape::<f64>::new();
        let x = tape.constant(QTensor::full(vec![2, 6], 3.75));
        let gamma = tape.constant(QTensor::full(vec![6], 1.0));
        let beta = tape.constant(QTensor::from_fn(vec![6], |i| i as f64));
        let out = x.layer_norm(&gamma, &beta, 1).unwrap().value();
        for row in 0..2 {
            for c in 0..6 {
                assert!((out.data()[row * 6 + c] - c as f64).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn layer_norm_standardizes_rows() {
        let tape = Tape::<f64>::new();
        let x = tape.constant(QTensor::from_fn(vec![3, 8], |i| (i as f64).cos() * 4.0 + 1.0));
        let gamma = tape.constant(QTensor::full(vec![8], 1.0));
        let beta = tape.constant(QTensor::zeros(vec![8]));
        let out = x.layer_norm(&gamma, &beta, 1).unwrap().value();
        for row in 0..3 {
            let r = &out.data()[row * 8..(row + 1) * 8];
            let mean: f64 = r.iter().sum::<f64>() / 8.0;
            let var: f64 = r.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 8.0;
            assert!(mean.abs() < 1e-6);
            assert!((var - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn gelu_known_values() {
        let tape = Tape::<f64>::new();
        let x = tape.constant(QTensor::from_vec(vec![3], vec![0.0, 1.0, 10.0]).unwrap());
        let y = x.gelu().value();
        assert_eq!(y.data()[0], 0.0);
        assert!((y.data()[1] - 0.8413447460685429).abs() < 1e-12);
        assert!((y.data()[2] - 10.0).abs() < 1e-6);
    }

    #[test]
    fn cross_entropy_uniform_logits_is_ln_k() {
        let tape = Tape::<f64>::new();
        let logits = tape.constant(QTensor::zeros(vec![2, 7]));
        let loss = logits.cross_entropy(&[3, 5]).unwrap().value().item();
        assert!((loss - (7.0f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_saturated_true_class_is_near_zero() {
        let tape = Tape::<f64>::new();
        let mut v = vec![0.0; 7];
        v[2] = 1000.0;
        let logits = tape.constant(QTensor::from_vec(vec![1, 7], v).unwrap());
        let loss = logits.cross_entropy(&[2]).unwrap().value().item();
        assert!(loss.abs() < 1e-9);
    }

    #[test]
    fn cross_entropy_rejects_bad_labels() {
        let tape = Tape::<f64>::new();
        let logits = tape.constant(QTensor::zeros(vec![1, 3]));
        assert!(logits.cross_entropy(&[3]).is_err());
        assert!(logits.cross_entropy(&[0, 1]).is_err());
    }

    #[test]
    fn conv2d_identity_kernel_passthrough() {
        let tape = Tape::<f64>::new();
        let x = tape.constant(QTensor::from_fn(vec![4, 4, 2], |i| i as f64 * 0.3));
        // 1x1 kernel = identity over channels
        let k = tape.constant(QTensor::from_vec(vec![1, 1, 2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap());
        let y = x.conv2d(&k, 1, 0).unwrap().value();
        assert!(y.max_abs_diff(&x.value()) < 1e-15);
    }

    #[test]
    fn conv2d_matches_naive_oracle() {
        let tape = Tape::<f64>::new();
        let (h, w, ci, co, kh, kw, stride, pad) = (5, 6, 3, 2, 3, 3, 2, 1);
        let xv = QTensor::from_fn(vec![h, w, ci], |i| ((i * 37 % 11) as f64 - 5.0) * 0.17);
        let kv = QTensor::from_fn(vec![kh, kw, ci, co], |i| ((i * 53 % 13) as f64 - 6.0) * 0.09);
        let x = tape.constant(xv.clone());
        let k = tape.constant(kv.clone());
        let y = x.conv2d(&k, stride, pad).unwrap().value();
        let ho = (h + 2 * pad - kh) / stride + 1;
        let wo = (w + 2 * pad - kw) / stride + 1;
        assert_eq!(y.shape(), &[ho, wo, co]);
        for oy in 0..ho {
            for ox in 0..wo {
                for c in 0..co {
                    let mut acc = 0.0;
                    for ky in 0..kh {
                        for kx in 0..kw {
                            let iy = (oy * stride + ky) as isize - pad as isize;
                            let ix = (ox * stride + kx) as isize - pad as isize;
                            if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                continue;
                            }
                            for c_in in 0..ci {
                                acc += xv.data()[(iy as usize * w + ix as usize) * ci + c_in]
                                    * kv.data()[((ky * kw + kx) * ci + c_in) * co + c];
                            }
                        }
                    }
                    let got = y.data()[(oy * wo + ox) * co + c];
                    assert!((got - acc).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn qconv2d_identity_kernel_passthrough() {
        let tape = Tape::<f64>::new();
        let x = tape.constant(QTensor::from_fn(vec![3, 3, 2, 4], |i| i as f64 * 0.11 - 1.0));
        let mut k = vec![0.0; 16];
        k[0] = 1.0; // kernel[0,0,0,0] = 1
        k[12] = 1.0; // kernel[0,0,1,1] = 1
        let kv = tape.constant(QTensor::from_vec(vec![1, 1, 2, 2, 4], k).unwrap());
        let y = x.qconv2d(&kv, 1, 0).unwrap().value();
        assert!(y.max_abs_diff(&x.value()) < 1e-15);
    }
}
