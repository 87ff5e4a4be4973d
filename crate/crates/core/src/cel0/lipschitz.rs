use rand::Rng as _;

use crate::error::{Error, Result};
use crate::noise::{derive_seed, rng_from_seed};
use crate::operator::ForwardOperator;

const MIN_ITERS: usize = 50;
const MAX_ITERS: usize = 500;
const REL_TOL: f64 = 1e-6;
const MAX_RESTARTS: usize = 3;
const SAFETY: f64 = 1.01;
const POWER_SEED: u64 = 0x5EED_0F_A7A;

/// Largest eigenvalue of `A^T A` by power iteration (Rayleigh quotient).
///
/// The start vector is strictly positive: `A^T A` has non-negative entries, so
/// its top eigenvector is non-negative and cannot be orthogonal to the start.
/// A start that still collapses to zero is redrawn from a new seed.
pub fn power_iteration(op: &ForwardOperator) -> Result<f64> {
    let n = op.hr_grid().len();
    let m = op.lr_grid().len();
    let mut ax = vec![0.0; m];
    let mut next = vec![0.0; n];

    for attempt in 0..=MAX_RESTARTS {
        let mut rng = rng_from_seed(derive_seed(POWER_SEED, attempt as u64));
        let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
        normalize(&mut v);

        let mut previous = 0.0;
        for iter in 1..=MAX_ITERS {
            op.forward_into(&v, &mut ax);
            let rayleigh: f64 = ax.iter().map(|a| a * a).sum();
            op.adjoint_into(&ax, &mut next);
            let norm = norm2(&next);
            if !norm.is_finite() {
                return Err(Error::Numerical(format!(
                    "power iteration diverged at step {iter}"
                )));
            }
            if norm == 0.0 {
                break;
            }
            if iter >= MIN_ITERS && (rayleigh - previous).abs() <= REL_TOL * rayleigh {
                return Ok(rayleigh);
            }
            previous = rayleigh;
            std::mem::swap(&mut v, &mut next);
            v.iter_mut().for_each(|x| *x /= norm);
        }
        if previous > 0.0 {
            return Err(Error::Numerical(format!(
                "power iteration did not stabilise within {MAX_ITERS} steps"
            )));
        }
    }
    Err(Error::Numerical(
        "power iteration start vectors were all annihilated by the operator".into(),
    ))
}

/// Upper bound on `||A||^2` used as the gradient Lipschitz constant.
pub fn lipschitz_estimate(op: &ForwardOperator) -> Result<f64> {
    Ok(SAFETY * power_iteration(op)?)
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn normalize(v: &mut [f64]) {
    let n = norm2(v);
    v.iter_mut().for_each(|x| *x /= n);
}
