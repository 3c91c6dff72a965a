//! Real and quaternion 2-D convolution layers.
//!
//! Feature maps are `[H, W, C]` (real) or `[H, W, C, 4]` (quaternion);
//! kernels are `[kh, kw, C_in, C_out(, 4)]`. Pointwise quaternion kernels
//! take the fully-connected fast path, which is the definitional reduction
//! of a 1x1 convolution.

use rand::Rng;

use crate::autograd::{Param, Parameterized, Tape, Var};
use crate::error::{Error, Result};
use crate::qcore::{QTensor, Real};

use super::init;
use super::linear::weight_left_apply;

pub struct ConvLayer<T: Real> {
    pub kernel: Param<T>,
    pub b: Param<T>,
    pub stride: usize,
    pub padding: usize,
    c_in: usize,
    c_out: usize,
}

impl<T: Real> ConvLayer<T> {
    #[allow(clippy::too_many_arguments)]
    pub fn init(
        name: &str,
        kh: usize,
        kw: usize,
        c_in: usize,
        c_out: usize,
        stride: usize,
        padding: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let fan_in = kh * kw * c_in;
        let fan_out = kh * kw * c_out;
        ConvLayer {
            kernel: Param::new(
                format!("{name}.kernel"),
                init::real_glorot(rng, fan_in, fan_out, vec![kh, kw, c_in, c_out]),
            ),
            b: Param::new(format!("{name}.b"), QTensor::zeros(vec![c_out])),
            stride,
            padding,
            c_in,
            c_out,
        }
    }

    pub fn channels(&self) -> (usize, usize) {
        (self.c_in, self.c_out)
    }

    pub fn forward(&self, tape: &Tape<T>, x: &Var<T>) -> Result<Var<T>> {
        let xs = x.shape();
        if xs.len() != 3 || xs[2] != self.c_in {
            return Err(Error::shape(
                "conv_forward",
                format!("input {:?} vs {} channels", xs, self.c_in),
            ));
        }
        x.conv2d(&self.kernel.var(tape), self.stride, self.padding)?
            .add_bias(&self.b.var(tape))
    }
}

impl<T: Real> Parameterized<T> for ConvLayer<T> {
    fn visit_params(&self, f: &mut dyn FnMut(&Param<T>)) {
        f(&self.kernel);
        f(&self.b);
    }
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        f(&mut self.kernel);
        f(&mut self.b);
    }
}

/// Quaternion convolution; every scalar multiply of the real layer becomes
/// a Hamilton product with the kernel entry on the left. Real parameter
/// count is `4 kh kw c_in c_out + 4 c_out`.
pub struct QConvLayer<T: Real> {
    pub kernel: Param<T>,
    pub b: Param<T>,
    pub stride: usize,
    pub padding: usize,
    kh: usize,
    kw: usize,
    c_in: usize,
    c_out: usize,
}

impl<T: Real> QConvLayer<T> {
    #[allow(clippy::too_many_arguments)]
    pub fn init(
        name: &str,
        kh: usize,
        kw: usize,
        c_in: usize,
        c_out: usize,
        stride: usize,
        padding: usize,
        rng: &mut impl Rng,
    ) -> Self {
        QConvLayer {
            kernel: Param::new(
                format!("{name}.kernel"),
                init::quat_glorot(rng, kh * kw * c_in, kh * kw * c_out, vec![kh, kw, c_in, c_out, 4]),
            ),
            b: Param::new(format!("{name}.b"), QTensor::zeros(vec![c_out, 4])),
            stride,
            padding,
            kh,
            kw,
            c_in,
            c_out,
        }
    }

    /// Pointwise identity kernel; output equals input. Test fixture.
    pub fn identity(name: &str, c: usize) -> Self {
        let kernel = QTensor::from_fn(vec![1, 1, c, c, 4], |flat| {
            let (quat, comp) = (flat / 4, flat % 4);
            let (ci, co) = (quat / c, quat % c);
            if ci == co && comp == 0 {
                T::one()
            } else {
                T::zero()
            }
        });
        QConvLayer {
            kernel: Param::new(format!("{name}.kernel"), kernel),
            b: Param::new(format!("{name}.b"), QTensor::zeros(vec![c, 4])),
            stride: 1,
            padding: 0,
            kh: 1,
            kw: 1,
            c_in: c,
            c_out: c,
        }
    }

    pub fn channels(&self) -> (usize, usize) {
        (self.c_in, self.c_out)
    }

    pub fn kernel_extent(&self) -> (usize, usize) {
        (self.kh, self.kw)
    }

    pub fn forward(&self, tape: &Tape<T>, x: &Var<T>) -> Result<Var<T>> {
        let xs = x.shape();
        if xs.len() != 4 || xs[3] != 4 || xs[2] != self.c_in {
            return Err(Error::shape(
                "qconv_forward",
                format!("input {:?} vs {} channels", xs, self.c_in),
            ));
        }
        let bias = self.b.var(tape);
        if self.kh == 1 && self.kw == 1 && self.stride == 1 && self.padding == 0 {
            let (h, w) = (xs[0], xs[1]);
            let flat = x.reshape(vec![h * w, self.c_in, 4])?;
            let kernel = self.kernel.var(tape).reshape(vec![self.c_in, self.c_out, 4])?;
            return weight_left_apply(&kernel, &flat)?
                .add_bias(&bias)?
                .reshape(vec![h, w, self.c_out, 4]);
        }
        x.qconv2d(&self.kernel.var(tape), self.stride, self.padding)?
            .add_bias(&bias)
    }

    /// Forces the general convolution kernel even for pointwise shapes, so
    /// tests can compare the two paths.
    pub fn forward_general(&self, tape: &Tape<T>, x: &Var<T>) -> Result<Var<T>> {
        x.qconv2d(&self.kernel.var(tape), self.stride, self.padding)?
            .add_bias(&self.b.var(tape))
    }
}

impl<T: Real> Parameterized<T> for QConvLayer<T> {
    fn visit_params(&self, f: &mut dyn FnMut(&Param<T>)) {
        f(&self.kernel);
        f(&self.b);
    }
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        f(&mut self.kernel);
        f(&mut self.b);
    }
}
