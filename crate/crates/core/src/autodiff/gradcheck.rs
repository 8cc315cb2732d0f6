//! Central-difference gradient verification.

use serde::Serialize;

use super::params::{BoundParams, ParamStore};
use super::tape::{Tape, Var};
use crate::error::{Error, Result};

/// `|a − n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

#[derive(Clone, Debug, Serialize)]
pub struct TensorCheck {
    pub name: String,
    pub len: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub worst_index: usize,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct GradCheckReport {
    pub h: f64,
    pub tol: f64,
    pub tensors: Vec<TensorCheck>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.tensors.iter().all(|t| t.passed)
    }

    pub fn max_rel_error(&self) -> f64 {
        self.tensors.iter().map(|t| t.max_rel_error).fold(0.0, f64::max)
    }

    pub fn max_abs_error(&self) -> f64 {
        self.tensors.iter().map(|t| t.max_abs_error).fold(0.0, f64::max)
    }

    pub fn failures(&self) -> impl Iterator<Item = &TensorCheck> {
        self.tensors.iter().filter(|t| !t.passed)
    }
}

fn eval_scalar<F>(f: &mut F, params: &ParamStore) -> Result<f64>
where
    F: FnMut(&mut Tape, &BoundParams) -> Result<Var>,
{
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape);
    let out = f(&mut tape, &bound)?;
    let v = tape.value(out)?;
    if v.len() != 1 {
        return Err(Error::NonScalarLoss(tape.shape(out)?.to_vec()));
    }
    Ok(v[0])
}

/// Compares autodiff gradients of the scalar function `f` against central
/// differences `(f(θ+h) − f(θ−h)) / 2h` for every scalar parameter, where
/// the step is `h · max(1, |θ|)`.
///
/// `params` is perturbed in place and restored before returning.
pub fn grad_check<F>(mut f: F, params: &mut ParamStore, h: f64, tol: f64) -> Result<GradCheckReport>
where
    F: FnMut(&mut Tape, &BoundParams) -> Result<Var>,
{
    if h <= 0.0 {
        return Err(Error::Config(format!("finite-difference step must be positive, got {h}")));
    }
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape);
    let loss = f(&mut tape, &bound)?;
    let grads = tape.backward(loss)?;
    let analytic: Vec<(String, Vec<f64>)> = params
        .names()
        .map(|name| {
            let var = bound.get(name)?;
            Ok((name.to_string(), grads.get(var).ok_or(Error::ForeignVar)?.to_vec()))
        })
        .collect::<Result<_>>()?;

    let mut tensors = Vec::with_capacity(analytic.len());
    for (name, grad) in analytic {
        let mut worst = (0.0_f64, 0usize, 0.0, 0.0);
        let mut max_abs = 0.0_f64;
        for (i, &a) in grad.iter().enumerate() {
            let theta = params.get(&name).expect("bound name").data()[i];
            let step = h * theta.abs().max(1.0);
            set(params, &name, i, theta + step);
            let up = eval_scalar(&mut f, params);
            set(params, &name, i, theta - step);
            let down = eval_scalar(&mut f, params);
            set(params, &name, i, theta);
            let numeric = (up? - down?) / (2.0 * step);
            let err = relative_error(a, numeric);
            max_abs = max_abs.max((a - numeric).abs());
            if err > worst.0 || err.is_nan() {
                worst = (err, i, a, numeric);
            }
        }
        tensors.push(TensorCheck {
            len: grad.len(),
            passed: worst.0 <= tol,
            max_rel_error: worst.0,
            max_abs_error: max_abs,
            worst_index: worst.1,
            worst_analytic: worst.2,
            worst_numeric: worst.3,
            name,
        });
    }
    Ok(GradCheckReport { h, tol, tensors })
}

fn set(params: &mut ParamStore, name: &str, i: usize, value: f64) {
    params.get_mut(name).expect("bound name").data_mut()[i] = value;
}
