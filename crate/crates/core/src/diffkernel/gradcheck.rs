//! Central finite-difference gradient checking.
//!
//! The checker only ever calls the *forward* path of a freshly built graph,
//! so it stays independent of the backward implementation it validates.

use crate::diffkernel::graph::{Graph, Var};
use crate::diffkernel::tensor::Tensor;
use crate::error::{Error, Result};

/// Builds a scalar loss from leaf parameter vars. Called repeatedly with
/// perturbed parameter values.
pub type LossBuilder<'a> = dyn Fn(&Graph, &[Var]) -> Result<Var> + 'a;

/// Worst element found by [`max_relative_error`].
#[derive(Debug, Clone, Copy)]
pub struct GradCheckWorst {
    pub param: usize,
    pub element: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub relative_error: f64,
}

fn eval_loss(build: &LossBuilder, params: &[Tensor]) -> Result<f64> {
    let g = Graph::new();
    let vars: Vec<Var> = params.iter().map(|p| g.param(p.clone())).collect();
    let loss = build(&g, &vars)?;
    let v = g.value(loss);
    if !v.is_scalar() {
        return Err(Error::Contract(format!(
            "gradient check requires a scalar loss, got {:?}",
            v.shape()
        )));
    }
    Ok(v.data()[0])
}

/// Analytic gradients via one backward pass.
pub fn analytic_gradients(build: &LossBuilder, params: &[Tensor]) -> Result<Vec<Tensor>> {
    let g = Graph::new();
    let vars: Vec<Var> = params.iter().map(|p| g.param(p.clone())).collect();
    let loss = build(&g, &vars)?;
    g.backward(loss)?;
    Ok(vars.iter().map(|&v| g.grad(v)).collect())
}

/// Central finite differences, `(f(x+h) - f(x-h)) / 2h` per element.
pub fn numeric_gradients(
    build: &LossBuilder,
    params: &[Tensor],
    step: f64,
) -> Result<Vec<Tensor>> {
    let mut out = Vec::with_capacity(params.len());
    for pi in 0..params.len() {
        let mut grad = Tensor::zeros(params[pi].shape());
        for ei in 0..params[pi].numel() {
            let mut plus = params.to_vec();
            plus[pi].data_mut()[ei] += step;
            let mut minus = params.to_vec();
            minus[pi].data_mut()[ei] -= step;
            let f_plus = eval_loss(build, &plus)?;
            let f_minus = eval_loss(build, &minus)?;
            grad.data_mut()[ei] = (f_plus - f_minus) / (2.0 * step);
        }
        out.push(grad);
    }
    Ok(out)
}

/// Max relative error between analytic and central-difference gradients.
///
/// The denominator is floored at 1e-3 so that near-zero gradients are
/// compared absolutely, below the finite-difference noise floor for
/// desk-scale losses.
pub fn max_relative_error(build: &LossBuilder, params: &[Tensor], step: f64) -> Result<f64> {
    Ok(gradcheck(build, params, step)?.relative_error)
}

pub fn gradcheck(build: &LossBuilder, params: &[Tensor], step: f64) -> Result<GradCheckWorst> {
    let analytic = analytic_gradients(build, params)?;
    let numeric = numeric_gradients(build, params, step)?;
    let mut worst = GradCheckWorst {
        param: 0,
        element: 0,
        analytic: 0.0,
        numeric: 0.0,
        relative_error: 0.0,
    };
    for (pi, (a, n)) in analytic.iter().zip(&numeric).enumerate() {
        for (ei, (&av, &nv)) in a.data().iter().zip(n.data()).enumerate() {
            let denom = av.abs().max(nv.abs()).max(1e-3);
            let rel = (av - nv).abs() / denom;
            if rel > worst.relative_error {
                worst = GradCheckWorst {
                    param: pi,
                    element: ei,
                    analytic: av,
                    numeric: nv,
                    relative_error: rel,
                };
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detects_correct_quadratic_gradient() {
        let w = Tensor::vector(vec![1.0, -2.0, 0.5]);
        let build = |g: &Graph, p: &[Var]| -> Result<Var> {
            let sq = g.mul_elem(p[0], p[0])?;
            Ok(g.sum_all(sq))
        };
        let err = max_relative_error(&build, &[w], 1e-5).unwrap();
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn flags_a_wrong_gradient() {
        // scale op forward with a deliberately mismatched pseudo-gradient:
        // compare sum(2x) against numeric of sum(x*x); errors must be large.
        let w = Tensor::vector(vec![1.0, 2.0]);
        let analytic = analytic_gradients(
            &|g: &Graph, p: &[Var]| Ok(g.sum_all(p[0])),
            std::slice::from_ref(&w),
        )
        .unwrap();
        let numeric = numeric_gradients(
            &|g: &Graph, p: &[Var]| {
                let sq = g.mul_elem(p[0], p[0])?;
                Ok(g.sum_all(sq))
            },
            std::slice::from_ref(&w),
            1e-5,
        )
        .unwrap();
        let diff = analytic[0].max_abs_diff(&numeric[0]);
        assert!(diff > 0.5);
    }
}
