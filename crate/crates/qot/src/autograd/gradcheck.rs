//! Central-difference certification of backward rules.
//!
//! The checker treats the taped function as a black box: it binds candidate
//! parameter values as named leaves, reads the scalar loss, and compares the
//! tape's analytic gradients against (f(p+h) - f(p-h)) / 2h elementwise.
//! A bitwise determinism precheck rejects functions whose value moves
//! between identical evaluations, since the oracle is meaningless there.

use std::fmt;

use crate::error::{Error, Result};
use crate::qcore::QTensor;

use super::param::{snapshot, Parameterized};
use super::tape::{Tape, Var};

pub const DEFAULT_STEP: f64 = 1e-5;
pub const DEFAULT_TOL: f64 = 1e-4;

#[derive(Clone, Debug)]
pub struct GradCheckEntry {
    pub name: String,
    pub max_rel_err: f64,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub tol: f64,
    pub entries: Vec<GradCheckEntry>,
}

impl GradCheckReport {
    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }

    pub fn worst(&self) -> f64 {
        self.entries.iter().fold(0.0, |a, e| a.max(e.max_rel_err))
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            writeln!(
                f,
                "{}\t{:.3e}\t{}",
                e.name,
                e.max_rel_err,
                if e.pass { "PASS" } else { "FAIL" }
            )?;
        }
        Ok(())
    }
}

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / f64::max(1e-8, a.abs() + n.abs())
}

/// Checks the gradients of a taped scalar function of the named parameters.
///
/// `build` receives the parameters already bound as tape leaves, in the
/// order given. Because the tape deduplicates names, code inside `build`
/// that rebinds the same names (layers binding their own `Param`s) lands on
/// these leaves, so whole models can be checked through their ordinary
/// forward paths.
pub fn grad_check<F>(
    names: &[String],
    init: &[QTensor<f64>],
    build: F,
    step: f64,
    tol: f64,
) -> Result<GradCheckReport>
where
    F: Fn(&Tape<f64>, &[Var<f64>]) -> Result<Var<f64>>,
{
    if names.len() != init.len() {
        return Err(Error::Contract(format!(
            "grad_check: {} names for {} tensors",
            names.len(),
            init.len()
        )));
    }
    let eval = |values: &[QTensor<f64>]| -> Result<f64> {
        let tape = Tape::<f64>::new();
        let vars: Vec<Var<f64>> = names
            .iter()
            .zip(values)
            .map(|(n, v)| tape.param(n, v.clone(), true))
            .collect();
        let loss = build(&tape, &vars)?;
        let value = loss.value();
        if value.len() != 1 {
            return Err(Error::Contract(format!(
                "grad_check: loss must be scalar, got shape {:?}",
                value.shape()
            )));
        }
        Ok(value.item())
    };

    let v1 = eval(init)?;
    let v2 = eval(init)?;
    if v1.to_bits() != v2.to_bits() {
        return Err(Error::OracleInvalid(format!(
            "function is not deterministic: {} vs {} on identical inputs",
            v1, v2
        )));
    }

    // Analytic pass.
    let tape = Tape::<f64>::new();
    let vars: Vec<Var<f64>> = names
        .iter()
        .zip(init)
        .map(|(n, v)| tape.param(n, v.clone(), true))
        .collect();
    let loss = build(&tape, &vars)?;
    tape.backward(&loss)?;
    let analytic: Vec<QTensor<f64>> = names
        .iter()
        .map(|n| tape.param_grad(n).expect("bound above"))
        .collect();

    // Central differences, one element at a time.
    let mut entries = Vec::with_capacity(names.len());
    let mut work: Vec<QTensor<f64>> = init.to_vec();
    for (pi, name) in names.iter().enumerate() {
        let base = init[pi].clone();
        let mut max_err = 0.0f64;
        for e in 0..base.len() {
            let mut plus = base.data().to_vec();
            plus[e] += step;
            work[pi] = QTensor::from_vec(base.shape().to_vec(), plus)?;
            let fp = eval(&work)?;

            let mut minus = base.data().to_vec();
            minus[e] -= step;
            work[pi] = QTensor::from_vec(base.shape().to_vec(), minus)?;
            let fm = eval(&work)?;

            let numeric = (fp - fm) / (2.0 * step);
            max_err = max_err.max(rel_err(analytic[pi].data()[e], numeric));
        }
        work[pi] = base;
        entries.push(GradCheckEntry {
            name: name.clone(),
            max_rel_err: max_err,
            pass: max_err < tol,
        });
    }
    Ok(GradCheckReport { tol, entries })
}

/// Checks every parameter of a model through its own forward path. `build`
/// must bind the model's parameters on the tape it is given (any layer
/// forward does this).
pub fn grad_check_model<M, F>(model: &M, build: F, step: f64, tol: f64) -> Result<GradCheckReport>
where
    M: Parameterized<f64>,
    F: Fn(&Tape<f64>) -> Result<Var<f64>>,
{
    let snap = snapshot(model);
    let names: Vec<String> = snap.iter().map(|(n, _)| n.clone()).collect();
    let values: Vec<QTensor<f64>> = snap.into_iter().map(|(_, v)| v).collect();
    grad_check(&names, &values, |tape, _| build(tape), step, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::Cell;

    #[test]
    fn quadratic_is_exact_for_central_differences() {
        let names = vec!["p".to_string()];
        let init = vec![QTensor::from_fn(vec![5], |i| i as f64 * 0.3 - 0.7)];
        let report = grad_check(
            &names,
            &init,
            |_, vars| Ok(vars[0].mul(&vars[0])?.sum()),
            1e-5,
            1e-9,
        )
        .unwrap();
        assert!(report.all_pass(), "{}", report);
    }

    #[test]
    fn wrong_gradient_is_caught() {
        let names = vec!["p".to_string()];
        let init = vec![QTensor::from_fn(vec![3], |i| i as f64 + 1.0)];
        // x * stop_grad(x) has gradient x, while d(x^2)/dx = 2x; using a
        // constant copy halves the analytic gradient and must FAIL.
        let report = grad_check(
            &names,
            &init,
            |tape, vars| {
                let detached = tape.constant(vars[0].value());
                Ok(vars[0].mul(&detached)?.sum())
            },
            1e-5,
            1e-4,
        )
        .unwrap();
        assert!(!report.all_pass());
    }

    #[test]
    fn nondeterminism_is_rejected() {
        let names = vec!["p".to_string()];
        let init = vec![QTensor::scalar(1.0)];
        let counter = Cell::new(0.0f64);
        let err = grad_check(
            &names,
            &init,
            |_, vars| {
                counter.set(counter.get() + 1.0);
                Ok(vars[0].scale(counter.get()))
            },
            1e-5,
            1e-4,
        )
        .unwrap_err();
        assert!(matches!(err, Error::OracleInvalid(_)));
    }

    #[test]
    fn report_lines_are_tab_separated() {
        let names = vec!["w".to_string()];
        let init = vec![QTensor::scalar(2.0)];
        let report = grad_check(&names, &init, |_, vars| Ok(vars[0].scale(3.0)), 1e-5, 1e-6).unwrap();
        let text = report.to_string();
        assert!(text.starts_with("w\t"), "{}", text);
        assert!(text.trim_end().ends_with("PASS"));
    }
}
