//! Core value types: reals, dense tensors, and quaternion tensors.

pub mod quat;
pub mod quat_tensor;
pub mod real;
pub mod tensor;

pub use quat::Quaternion;
pub use quat_tensor::QuatTensor;
pub use real::{Dtype, Real};
pub use tensor::QTensor;
