//! Registry of finite-difference certifications, one per differentiable op.
//!
//! Both the test suite and the `gradcheck` CLI subcommand run this list;
//! composite model-level cases are appended by higher modules' tests.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::qcore::QTensor;

use super::gradcheck::{grad_check, GradCheckReport};
use super::tape::Var;

fn rng(tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0x9e3779b97f4a7c15 ^ tag)
}

fn randt(rng: &mut ChaCha8Rng, shape: Vec<usize>) -> QTensor<f64> {
    QTensor::from_fn(shape, |_| rng.random::<f64>() * 2.0 - 1.0)
}

/// Positive-valued tensor bounded away from zero, for sqrt/div/abs cases
/// where a kink or pole would invalidate finite differences.
fn randt_pos(rng: &mut ChaCha8Rng, shape: Vec<usize>) -> QTensor<f64> {
    QTensor::from_fn(shape, |_| 0.5 + rng.random::<f64>())
}

type CaseFn = Box<dyn Fn() -> Result<GradCheckReport>>;

pub struct Case {
    pub name: &'static str,
    pub run: CaseFn,
}

fn case<F>(name: &'static str, f: F) -> Case
where
    F: Fn() -> Result<GradCheckReport> + 'static,
{
    Case { name, run: Box::new(f) }
}

fn names(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

const STEP: f64 = 1e-5;
const TOL: f64 = 1e-4;

/// Every core differentiable op, each checked against central differences
/// on a small random instance.
pub fn core_op_cases() -> Vec<Case> {
    vec![
        case("add", || {
            let mut r = rng(1);
            grad_check(
                &names(&["a", "b"]),
                &[randt(&mut r, vec![2, 3]), randt(&mut r, vec![2, 3])],
                |_, v| {
                    let w = v[0].add(&v[1])?;
                    Ok(w.mul(&w)?.sum())
                },
                STEP,
                TOL,
            )
        }),
        case("sub", || {
            let mut r = rng(2);
            grad_check(
                &names(&["a", "b"]),
                &[randt(&mut r, vec![3, 2]), randt(&mut r, vec![3, 2])],
                |_, v| {
                    let w = v[0].sub(&v[1])?;
                    Ok(w.mul(&w)?.sum())
                },
                STEP,
                TOL,
            )
        }),
        case("mul", || {
            let mut r = rng(3);
            grad_check(
                &names(&["a", "b"]),
                &[randt(&mut r, vec![4]), randt(&mut r, vec![4])],
                |_, v| Ok(v[0].mul(&v[1])?.sum()),
                STEP,
                TOL,
            )
        }),
        case("div", || {
            let mut r = rng(4);
            grad_check(
                &names(&["a", "b"]),
                &[randt(&mut r, vec![4]), randt_pos(&mut r, vec![4])],
                |_, v| Ok(v[0].div(&v[1])?.sum()),
                STEP,
                TOL,
            )
        }),
        case("neg", || {
            let mut r = rng(5);
            grad_check(
                &names(&["a"]),
                &[randt(&mut r, vec![5])],
                |_, v| Ok(v[0].neg().mul(&v[0])?.sum()),
                STEP,
                TOL,
            )
        }),
        case("scale", || {
            let mut r = rng(6);
            grad_check(
                &names(&["a"]),
                &[randt(&mut r, vec![5])],
                |_, v| Ok(v[0].scale(-2.5).mul(&v[0])?.sum()),
                STEP,
                TOL,
            )
        }),
        case("abs", || {
            let mut r = rng(7);
            // bounded away from the kink at zero
            let sign = randt(&mut r, vec![6]).map(|v| if v > 0.0 { 1.0 } else { -1.0 });
            let mag = randt_pos(&mut r, vec![6]);
            grad_check(
                &names(&["a"]),
                &[sign.mul(&mag).unwrap()],
                |_, v| Ok(v[0].abs().mul(&v[0].abs())?.sum()),
                STEP,
                TOL,
            )
        }),
        case("sqrt", || {
            let mut r = rng(8);
            grad_check(
                &names(&["a"]),
                &[randt_pos(&mut r, vec![5])],
                |_, v| Ok(v[0].sqrt().sum()),
                STEP,
                TOL,
            )
        }),
        case("sum", || {
            let mut r = rng(9);
            grad_check(
                &names(&["a"]),
                &[randt(&mut r, vec![2, 4])],
                |_, v| Ok(v[0].sum().mul(&v[0].sum())?.sum()),
                STEP,
                TOL,
            )
        }),
        case("sum_axis", || {
            let mut r = rng(10);
            grad_check(
                &names(&["a"]),
                &[randt(&mut r, vec![3, 4])],
                |_, v| {
                    let s = v[0].sum_axis(1)?;
                    Ok(s.mul(&s)?.sum())
                },
                STEP,
                TOL,
            )
        }),
        case("reshape", || {
            let mut r = rng(11);
            grad_check(
                &names(&["a"]),
                &[randt(&mut r, vec![2, 6])],
                |_, v| {
                    let s = v[0].reshape(vec![3, 4])?;
                    Ok(s.mul(&s)?.sum_axis(0)?.sqrt().sum())
                },
                STEP,
                TOL,
            )
        }),
        case("permute", || {
            let mut r = rng(12);
            grad_check(
                &names(&["a"]),
                &[randt(&mut r, vec![2, 3, 4])],
                |_, v| {
                    let p = v[0].permute(&[2, 0, 1])?;
                    Ok(p.mul(&p)?.sum())
                },
                STEP,
                TOL,
            )
        }),
        case("concat", || {
            let mut r = rng(13);
            grad_check(
                &names(&["a", "b"]),
                &[randt(&mut r, vec![2, 2]), randt(&mut r, vec![2, 3])],
                |_, v| {
                    let c = Var::concat(&[v[0].clone(), v[1].clone()], 1)?;
                    Ok(c.mul(&c)?.sum())
                },
                STEP,
                TOL,
            )
        }),
        case("matmul", || {
            let mut r = rng(14);
            grad_check(
                &names(&["a", "b"]),
                &[randt(&mut r, vec![2, 3]), randt(&mut r, vec![3, 4])],
                |_, v| {
                    let m = v[0].matmul(&v[1])?;
                    Ok(m.mul(&m)?.sum())
                },
                STEP,
                TOL,
            )
        }),
        case("quat_matmul", || {
            let mut r = rng(15);
            grad_check(
                &names(&["a", "b"]),
                &[randt(&mut r, vec![2, 3, 4]), randt(&mut r, vec![3, 2, 4])],
                |_, v| {
                    let m = v[0].quat_matmul(&v[1])?;
                    Ok(m.mul(&m)?.sum())
                },
                STEP,
                TOL,
            )
        }),
        case("conjugate", || {
            let mut r = rng(16);
            grad_check(
                &names(&["a", "b"]),
                &[randt(&mut r, vec![3, 4]), randt(&mut r, vec![3, 4])],
                |_, v| Ok(v[0].conjugate()?.mul(&v[1])?.sum()),
                STEP,
                TOL,
            )
        }),
        case("add_bias", || {
            let mut r = rng(17);
            grad_check(
                &names(&["x", "b"]),
                &[randt(&mut r, vec![3, 2, 4]), randt(&mut r, vec![2, 4])],
                |_, v| {
                    let o = v[0].add_bias(&v[1])?;
                    Ok(o.mul(&o)?.sum())
                },
                STEP,
                TOL,
            )
        }),
        case("softmax", || {
            let mut r = rng(18);
            let w = randt(&mut r, vec![3, 5]);
            grad_check(
                &names(&["x"]),
                &[randt(&mut r, vec![3, 5]).scale(2.0)],
                move |tape, v| {
                    let probs = v[0].softmax(1)?;
                    Ok(probs.mul(&tape.constant(w.clone()))?.sum())
                },
                STEP,
                TOL,
            )
        }),
        case("layer_norm", || {
            let mut r = rng(19);
            let w = randt(&mut r, vec![3, 6]);
            grad_check(
                &names(&["x", "gamma", "beta"]),
                &[
                    randt(&mut r, vec![3, 6]).scale(3.0),
                    randt_pos(&mut r, vec![6]),
                    randt(&mut r, vec![6]),
                ],
                move |tape, v| {
                    let o = v[0].layer_norm(&v[1], &v[2], 1)?;
                    Ok(o.mul(&tape.constant(w.clone()))?.sum())
                },
                STEP,
                TOL,
            )
        }),
        case("gelu", || {
            let mut r = rng(20);
            grad_check(
                &names(&["x"]),
                &[randt(&mut r, vec![7]).scale(2.0)],
                |_, v| Ok(v[0].gelu().sum()),
                STEP,
                TOL,
            )
        }),
        case("cross_entropy", || {
            let mut r = rng(21);
            grad_check(
                &names(&["logits"]),
                &[randt(&mut r, vec![3, 5]).scale(2.0)],
                |_, v| v[0].cross_entropy(&[0, 3, 4]),
                STEP,
                TOL,
            )
        }),
        case("conv2d", || {
            let mut r = rng(22);
            grad_check(
                &names(&["x", "k"]),
                &[randt(&mut r, vec![4, 4, 2]), randt(&mut r, vec![3, 3, 2, 2])],
                |_, v| {
                    let o = v[0].conv2d(&v[1], 2, 1)?;
                    Ok(o.mul(&o)?.sum())
                },
                STEP,
                TOL,
            )
        }),
        case("qconv2d", || {
            let mut r = rng(23);
            grad_check(
                &names(&["x", "k"]),
                &[
                    randt(&mut r, vec![3, 3, 2, 4]),
                    randt(&mut r, vec![2, 2, 2, 2, 4]),
                ],
                |_, v| {
                    let o = v[0].qconv2d(&v[1], 1, 0)?;
                    Ok(o.mul(&o)?.sum())
                },
                STEP,
                TOL,
            )
        }),
    ]
}
