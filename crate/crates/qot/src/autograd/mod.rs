//! Reverse-mode automatic differentiation and its certification suite.

pub mod certify;
pub mod gradcheck;
mod nnops;
mod ops;
pub mod param;
pub mod tape;

pub use gradcheck::{grad_check, grad_check_model, GradCheckReport, DEFAULT_STEP, DEFAULT_TOL};
pub use param::{
    for_each_trainable, load_values, param_count, set_trainable, snapshot, Param, Parameterized,
};
pub use tape::{Tape, Var};
