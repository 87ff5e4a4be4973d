use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::operator::ForwardOperator;

use super::inner::weighted_l1_with_aty;
use super::penalty::{cel0_penalty, irl1_weights};

/// Entries below this fraction of the largest one are zeroed in the reported
/// solution.
const SUPPORT_CLEANUP_REL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cel0Params {
    pub lambda: f64,
}

impl Cel0Params {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::invalid(format!(
                "lambda must be positive, got {lambda}"
            )));
        }
        Ok(Self { lambda })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub outer_iters: usize,
    pub inner_iters: usize,
    pub outer_tol: f64,
    pub inner_tol: f64,
    /// Precomputed bound on `||A||^2`; estimated from the operator if absent.
    pub lipschitz: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            outer_iters: 40,
            inner_iters: 200,
            outer_tol: 1e-6,
            inner_tol: 1e-8,
            lipschitz: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.outer_iters == 0 || self.inner_iters == 0 {
            return Err(Error::invalid("iteration counts must be >= 1"));
        }
        if !(self.outer_tol > 0.0 && self.inner_tol > 0.0) {
            return Err(Error::invalid("tolerances must be positive"));
        }
        if let Some(l) = self.lipschitz {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::invalid(format!(
                    "Lipschitz bound must be positive, got {l}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub solution: Image,
    /// Objective at the initial point followed by one value per outer iterate.
    pub objective_trace: Vec<f64>,
    pub outer_iterations_used: usize,
    pub inner_iterations_total: usize,
    pub converged: bool,
}

/// Value of the CEL0 objective, or `Infeasible` if any entry is negative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Objective {
    Value(f64),
    Infeasible,
}

impl Objective {
    pub fn value(self) -> Option<f64> {
        match self {
            Objective::Value(v) => Some(v),
            Objective::Infeasible => None,
        }
    }
}

pub fn objective(
    x: &Image,
    y: &Image,
    op: &ForwardOperator,
    params: &Cel0Params,
) -> Result<Objective> {
    op.hr_grid().check_same(x.grid(), "objective unknown")?;
    op.lr_grid().check_same(y.grid(), "objective data")?;
    if x.values().iter().any(|v| *v < 0.0) {
        return Ok(Objective::Infeasible);
    }
    let mut ax = vec![0.0; op.lr_grid().len()];
    op.forward_into(x.values(), &mut ax);
    Ok(Objective::Value(objective_raw(
        &ax,
        y.values(),
        x.values(),
        op,
        params.lambda,
    )?))
}

fn objective_raw(
    ax: &[f64],
    y: &[f64],
    x: &[f64],
    op: &ForwardOperator,
    lambda: f64,
) -> Result<f64> {
    let data: f64 = ax.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(0.5 * data + cel0_penalty(x, op.column_norms(), lambda)?)
}

/// CEL0 deconvolution by iteratively reweighted l1.
///
/// `x0` defaults to `max(A^T y, 0)`.
pub fn solve_cel0(
    y: &Image,
    op: &ForwardOperator,
    params: &Cel0Params,
    config: &SolverConfig,
    x0: Option<&Image>,
) -> Result<SolveReport> {
    config.validate()?;
    Cel0Params::new(params.lambda)?;
    op.lr_grid().check_same(y.grid(), "observation")?;

    let mut x = match x0 {
        Some(init) => {
            op.hr_grid().check_same(init.grid(), "initial estimate")?;
            init.values().iter().map(|v| v.max(0.0)).collect::<Vec<_>>()
        }
        None => {
            let mut v = op.apply_adjoint(y)?.into_values();
            v.iter_mut().for_each(|e| *e = e.max(0.0));
            v
        }
    };
    let lip = match config.lipschitz {
        Some(l) => l,
        None => op.lipschitz()?,
    };
    let norms = op.column_norms();
    let aty = op.apply_adjoint(y)?.into_values();
    let mut ax = vec![0.0; op.lr_grid().len()];

    op.forward_into(&x, &mut ax);
    let mut trace = vec![objective_raw(&ax, y.values(), &x, op, params.lambda)?];
    let mut converged = false;
    let mut outer = 0;
    let mut inner_total = 0;

    while outer < config.outer_iters {
        outer += 1;
        let w = irl1_weights(&x, norms, params.lambda)?;
        let inner = weighted_l1_with_aty(
            op,
            y.values(),
            &aty,
            &w,
            x.clone(),
            lip,
            config.inner_iters,
            config.inner_tol,
        )
        .map_err(|e| match e {
            Error::Numerical(msg) => Error::Numerical(format!("outer iteration {outer}: {msg}")),
            other => other,
        })?;
        inner_total += inner.iterations;
        let x_new = inner.x;
        if x_new.iter().any(|v| v.is_nan()) {
            return Err(Error::Numerical(format!(
                "NaN in iterate at outer iteration {outer}"
            )));
        }

        op.forward_into(&x_new, &mut ax);
        trace.push(objective_raw(&ax, y.values(), &x_new, op, params.lambda)?);

        let diff: f64 = x_new
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let base: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        x = x_new;
        let change = if diff == 0.0 { 0.0 } else { diff / base };
        if change < config.outer_tol {
            converged = true;
            break;
        }
    }

    let peak = x.iter().copied().fold(0.0, f64::max);
    let cutoff = SUPPORT_CLEANUP_REL * peak;
    x.iter_mut().for_each(|v| {
        if *v < cutoff {
            *v = 0.0
        }
    });

    Ok(SolveReport {
        solution: Image::from_vec_unchecked(*op.hr_grid(), x),
        objective_trace: trace,
        outer_iterations_used: outer,
        inner_iterations_total: inner_total,
        converged,
    })
}
