//! Finite-difference verification of analytic gradients.

use super::Mlp;
use crate::error::Result;

/// Central finite differences of a scalar function at `at`.
pub fn finite_diff_gradient<F>(mut f: F, at: &[f64], step: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut point = at.to_vec();
    let mut grad = vec![0.0; at.len()];
    for i in 0..at.len() {
        let orig = point[i];
        point[i] = orig + step;
        let plus = f(&point);
        point[i] = orig - step;
        let minus = f(&point);
        point[i] = orig;
        grad[i] = (plus - minus) / (2.0 * step);
    }
    grad
}

/// Worst per-coordinate relative error of `analytic` against the
/// finite-difference oracle `numeric`.
///
/// Each coordinate is measured against the oracle's magnitude, floored at
/// 1e-6 of the oracle's overall scale so coordinates whose true gradient is
/// (near) zero don't divide finite-difference noise by zero.
pub fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let scale = numeric.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let floor = 1e-6 * scale;
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / n.abs().max(floor))
        .fold(0.0, f64::max)
}

/// Default central-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Compare reverse-mode parameter gradients of `loss(mlp(x))` against central
/// finite differences; returns the worst relative error.
///
/// `loss` maps the network output to the loss value and its gradient with
/// respect to the output.
pub fn grad_check<L>(mlp: &Mlp, x: &[f64], loss: L) -> Result<f64>
where
    L: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let cache = mlp.forward(x)?;
    let (_, grad_out) = loss(&cache.output);
    let (grads, _) = mlp.backward(&cache, &grad_out)?;
    let analytic = grads.to_flat();

    let params = mlp.params_vec();
    let mut probe = mlp.clone();
    let numeric = finite_diff_gradient(
        |p| {
            probe.set_params_vec(p).expect("param layout is fixed");
            let out = probe.output(x).expect("forward succeeded at the base point");
            loss(&out).0
        },
        &params,
        FD_STEP,
    );
    Ok(max_rel_err(&analytic, &numeric))
}
