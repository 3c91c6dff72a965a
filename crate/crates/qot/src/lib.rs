//! Quaternion orthogonal transformer.
//!
//! Layers build on a quaternion tensor core and a define-by-run autograd
//! tape. The crate splits into:
//!
//! * [`qcore`]: real and quaternion tensor values.
//! * [`autograd`]: tape, variables, gradients, and the gradient checker.
//! * [`qnn`]: layer primitives (quaternion linear/conv, norms, losses).
//! * [`qvit`]: the quaternion vision transformer assembled from `qnn`.
//! * [`ortho`]: orthogonal feature decomposition and quaternion packing.
//! * [`harness`]: configs, datasets, training loops, accounting, and IO.

pub mod autograd;
pub mod error;
pub mod harness;
pub mod qcore;
pub mod ortho;
pub mod qnn;
pub mod qvit;

pub use error::{Error, Result};
